#pragma once

#include <stdexcept>
#include <string>

namespace lowlight {

/// Shapes of two operands (or of an operand and its declared size) disagree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value lies outside the range its type or operation admits.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A parameter would make the computation singular (e.g. division by zero light).
class SingularParameterError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Ground-truth mask with no positive pixels; recall is undefined.
class DegenerateGroundTruthError : public DomainError {
 public:
  using DomainError::DomainError;
};

class EmptyDatasetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientAnnotationsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be read, written or decoded.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require_domain(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace lowlight
