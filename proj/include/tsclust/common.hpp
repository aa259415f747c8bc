#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsclust {

/// Row-major so that one series / one coefficient vector is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Cluster labels. Zero-based inside the library; files and the CLI use 1..k.
using Labels = std::vector<int>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: shapes, ranges, malformed files. CLI exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure could not produce a meaningful answer. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ValidationError(message);
}

}  // namespace tsclust
