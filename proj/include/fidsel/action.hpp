#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace fidsel {

/// Operator actions. Declaration order is the argmax tie-breaking order.
enum class Action : int { S = 0, R = 1, N = 2, H = 3, W = 4 };

inline constexpr std::array<Action, 5> kAllActions = {Action::S, Action::R, Action::N,
                                                      Action::H, Action::W};
inline constexpr int kActionCount = 5;

constexpr int index_of(Action a) { return static_cast<int>(a); }

constexpr char to_char(Action a) {
    switch (a) {
    case Action::S: return 'S';
    case Action::R: return 'R';
    case Action::N: return 'N';
    case Action::H: return 'H';
    case Action::W: return 'W';
    }
    return '?';
}

constexpr std::optional<Action> action_from_char(char c) {
    switch (c) {
    case 'S': return Action::S;
    case 'R': return Action::R;
    case 'N': return Action::N;
    case 'H': return Action::H;
    case 'W': return Action::W;
    default: return std::nullopt;
    }
}

constexpr const char* long_name(Action a) {
    switch (a) {
    case Action::S: return "skip";
    case Action::R: return "rest";
    case Action::N: return "normal";
    case Action::H: return "high";
    case Action::W: return "wait";
    }
    return "?";
}

/// Number of tasks removed from the queue at the start of an epoch.
constexpr int queue_decrement(Action a) {
    return (a == Action::S || a == Action::N || a == Action::H) ? 1 : 0;
}

} // namespace fidsel
