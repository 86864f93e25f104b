#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "progsim/action.hpp"

namespace progsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed LTS: bad state index, dangling successor, duplicate transition.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent inputs, e.g. a product whose components disagree on C or R.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A trace step that is not enabled in the state reached so far.
class ReplayError : public Error {
 public:
  ReplayError(std::size_t position, Action action, const std::string& what)
      : Error(what), position_(position), action_(std::move(action)) {}

  std::size_t position() const { return position_; }
  const Action& action() const { return action_; }

 private:
  std::size_t position_;
  Action action_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& msg)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// A search or enumeration ran past its configured node budget.
class ResourceError : public Error {
 public:
  explicit ResourceError(std::size_t budget)
      : Error("node budget of " + std::to_string(budget) + " exceeded"), budget_(budget) {}

  std::size_t budget() const { return budget_; }

 private:
  std::size_t budget_;
};

/// A query reached beyond the depth a bounded structure was built to.
class DepthExhausted : public Error {
 public:
  explicit DepthExhausted(std::size_t depth)
      : Error("construction depth " + std::to_string(depth) + " exhausted; rebuild deeper"), depth_(depth) {}

  std::size_t depth() const { return depth_; }

 private:
  std::size_t depth_;
};

}  // namespace progsim
