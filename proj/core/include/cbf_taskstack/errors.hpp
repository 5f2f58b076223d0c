#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cbf_taskstack {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error
{
public:
  using Error::Error;
};

class NotPositiveDefinite : public Error
{
public:
  using Error::Error;
};

/// The active-set iteration proved the feasible region empty.
class Infeasible : public Error
{
public:
  using Error::Error;
};

class IterationLimit : public Error
{
public:
  using Error::Error;
};

class TooManyConstraints : public Error
{
public:
  using Error::Error;
};

/// Target point at or behind the camera's image plane.
class BehindCamera : public Error
{
public:
  using Error::Error;
};

class CyclicOrder : public Error
{
public:
  using Error::Error;
};

class IndexOutOfRange : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Malformed scenario input. `where` names the field path or line.
class ParseError : public Error
{
public:
  ParseError(std::string where, const std::string& what)
    : Error(where + ": " + what), where_(std::move(where))
  {}

  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

/// Collects every violation found while validating a scenario.
class ValidationError : public Error
{
public:
  explicit ValidationError(std::vector<std::string> violations)
    : Error(join(violations)), violations_(std::move(violations))
  {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v)
  {
    std::string out = "scenario validation failed";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace cbf_taskstack
