#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace freesketch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Ridge level at or below the negative of the smallest nonzero eigenvalue
/// of the regularized system.
class regularization_error : public std::runtime_error {
public:
    explicit regularization_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// Iterative solver hit its iteration limit; carries the final residual.
class cg_error : public std::runtime_error {
public:
    cg_error(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// GCV denominator at 1 (trace of the smoother equals n) or a unit leverage.
class degenerate_error : public std::runtime_error {
public:
    explicit degenerate_error(const std::string& what)
        : std::runtime_error(what) {}
};

/// Subordination fixed point has no admissible root for the requested inputs.
class subordination_error : public std::domain_error {
public:
    explicit subordination_error(const std::string& what)
        : std::domain_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& what) {
    if (!condition) throw std::invalid_argument(what);
}

}  // namespace detail

}  // namespace freesketch
