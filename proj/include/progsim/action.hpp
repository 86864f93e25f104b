#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace progsim {

// Classification of an action into the alphabets of a program/object system.
enum class ActionKind : std::uint8_t { Program, Call, Return, Internal, Idle };

inline std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Program: return "program";
    case ActionKind::Call: return "call";
    case ActionKind::Return: return "return";
    case ActionKind::Internal: return "internal";
    case ActionKind::Idle: return "idle";
  }
  return "?";
}

/// A labelled event. Argument and return values are part of the identity so
/// that `ret.1(0)` and `ret.1(5)` are different actions.
struct Action {
  std::string name;
  ActionKind kind = ActionKind::Internal;
  std::optional<int> thread;
  std::optional<long> payload;

  auto operator<=>(const Action&) const = default;
  bool operator==(const Action&) const = default;

  bool is_idle() const { return kind == ActionKind::Idle; }
  bool is_object_visible() const { return kind == ActionKind::Call || kind == ActionKind::Return; }

  /// Textual token `name[.thread][(payload)]`. The kind is not part of the
  /// token; model files declare it in the alphabet header.
  std::string token() const {
    std::string out = name;
    if (thread) out += "." + std::to_string(*thread);
    if (payload) out += "(" + std::to_string(*payload) + ")";
    return out;
  }
};

inline std::ostream& operator<<(std::ostream& os, const Action& a) { return os << a.token(); }

inline Action make_action(std::string name, ActionKind kind, std::optional<int> thread = std::nullopt,
                          std::optional<long> payload = std::nullopt) {
  return Action{std::move(name), kind, thread, payload};
}

inline Action idle_action() { return Action{"idle", ActionKind::Idle, std::nullopt, std::nullopt}; }

/// Parts of a token before the kind is known.
struct ActionToken {
  std::string name;
  std::optional<int> thread;
  std::optional<long> payload;

  Action with_kind(ActionKind k) const { return Action{name, k, thread, payload}; }
};

namespace detail {

inline bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

}  // namespace detail

/// Parses `name[.thread][(payload)]`. Returns nullopt on malformed input; the
/// second member is the offset of the first offending character.
inline std::pair<std::optional<ActionToken>, std::size_t> parse_action_token(std::string_view s) {
  std::size_t i = 0;
  if (s.empty() || !detail::is_name_start(s[0])) return {std::nullopt, 0};
  while (i < s.size() && detail::is_name_char(s[i])) ++i;
  ActionToken tok;
  tok.name = std::string(s.substr(0, i));
  auto read_int = [&](long& out) -> bool {
    std::size_t start = i;
    if (i < s.size() && s[i] == '-') ++i;
    std::size_t digits = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == digits) return false;
    out = std::stol(std::string(s.substr(start, i - start)));
    return true;
  };
  if (i < s.size() && s[i] == '.') {
    ++i;
    long t = 0;
    if (!read_int(t)) return {std::nullopt, i};
    tok.thread = static_cast<int>(t);
  }
  if (i < s.size() && s[i] == '(') {
    ++i;
    long p = 0;
    if (!read_int(p)) return {std::nullopt, i};
    if (i >= s.size() || s[i] != ')') return {std::nullopt, i};
    ++i;
    tok.payload = p;
  }
  if (i != s.size()) return {std::nullopt, i};
  return {tok, s.size()};
}

/// Sorted, duplicate-free set of actions.
class ActionSet {
 public:
  ActionSet() = default;
  ActionSet(std::initializer_list<Action> init) : items_(init) { normalize(); }
  explicit ActionSet(std::vector<Action> items) : items_(std::move(items)) { normalize(); }

  bool contains(const Action& a) const { return std::binary_search(items_.begin(), items_.end(), a); }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const Action& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Action>& items() const { return items_; }

  void insert(const Action& a) {
    auto it = std::lower_bound(items_.begin(), items_.end(), a);
    if (it == items_.end() || *it != a) items_.insert(it, a);
  }

  bool is_subset_of(const ActionSet& other) const {
    return std::includes(other.items_.begin(), other.items_.end(), items_.begin(), items_.end());
  }

  friend ActionSet set_union(const ActionSet& a, const ActionSet& b) {
    std::vector<Action> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    ActionSet r;
    r.items_ = std::move(out);
    return r;
  }
  friend ActionSet set_intersection(const ActionSet& a, const ActionSet& b) {
    std::vector<Action> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    ActionSet r;
    r.items_ = std::move(out);
    return r;
  }

  bool operator==(const ActionSet&) const = default;

 private:
  void normalize() {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }
  std::vector<Action> items_;
};

using Trace = std::vector<Action>;

inline std::string format_trace(std::span<const Action> t) {
  if (t.empty()) return "ε";
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += " ";
    out += t[i].token();
  }
  return out;
}

inline std::string format_set(const ActionSet& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& a : s) {
    if (!first) out += ", ";
    out += a.token();
    first = false;
  }
  return out + "}";
}

}  // namespace progsim
