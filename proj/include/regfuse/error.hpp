#pragma once

#include <stdexcept>
#include <string>

namespace regfuse {

/// Input violates a documented precondition (bad parameter, empty cloud, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Geometry too degenerate to determine a transform (collinear or coincident
/// weighted points, a rank-deficient covariance).
class DegenerateGeometry : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Correspondence weights are all zero or contain negative/non-finite values.
class InvalidWeights : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Fewer than three correspondences survived a filter.
class DegenerateSet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or directory content that cannot be parsed.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace regfuse
