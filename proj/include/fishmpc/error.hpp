#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fishmpc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector that had to be normalized was (numerically) zero.
class ZeroVector : public Error {
 public:
  explicit ZeroVector(const std::string& where) : Error("zero vector in " + where) {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)) {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two distinct fish occupy exactly the same position.
class CoincidentFish : public Error {
 public:
  CoincidentFish(std::size_t i, std::size_t j)
      : Error("fish " + std::to_string(i) + " and " + std::to_string(j) + " coincide"),
        first(i),
        second(j) {}
  std::size_t first;
  std::size_t second;
};

class NotStronglyConnected : public Error {
 public:
  NotStronglyConnected() : Error("orientation graph is not strongly connected") {}
};

/// Fish i has no neighbor in its orientation zone.
class ZeroOrientationDegree : public Error {
 public:
  explicit ZeroOrientationDegree(std::size_t i)
      : Error("fish " + std::to_string(i) + " has no orientation neighbor"), fish(i) {}
  std::size_t fish;
};

/// A precondition of one of the reduction error bounds does not hold.
class AssumptionViolated : public Error {
 public:
  explicit AssumptionViolated(const std::string& condition)
      : Error("bound assumption violated: " + condition), condition(condition) {}
  std::string condition;
};

/// The argument of the reduced direction update degenerated to zero.
class ZeroArgument : public Error {
 public:
  ZeroArgument() : Error("reduced direction update argument is zero") {}
};

}  // namespace fishmpc
