#pragma once

#include <stdexcept>
#include <string>

namespace fedsac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or config value.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Line graph is not a tree rooted at bus 0.
class TopologyError : public Error {
 public:
  using Error::Error;
};

/// A bound or limit violates its invariant (e.g. v_min > v_max).
class BoundError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Index or value outside an admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Missing hour in a time series.
class GapError : public Error {
 public:
  using Error::Error;
};

/// Operation needs more data than is available (e.g. replay buffer).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Cached intermediate values no longer match the object that produced them.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsac
