#pragma once

#include <stdexcept>
#include <string>

namespace mflow {

/// Failures inside the differentiation engine.
class DiffError : public std::runtime_error {
 public:
  enum class Kind { NonFinite, TapeConsumed, Shape, NoTape };

  DiffError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class OptError : public std::runtime_error {
 public:
  enum class Kind { NonFiniteGrad, Shape };

  OptError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Numerical inversion failed to bracket or converge.
class InvError : public std::runtime_error {
 public:
  enum class Kind { NoBracket, NoConvergence };

  InvError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A point lies outside the domain of the map it was handed to.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A sphere point too close to a pole for a standalone cylinder map.
class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bad experiment configuration; `field` names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mflow
