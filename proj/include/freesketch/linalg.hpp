#pragma once

#include "freesketch/common.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace freesketch {

struct SymSpectrum {
    Vector evals;  // ascending
    Matrix evecs;
};

inline SymSpectrum sym_eig(const Eigen::Ref<const Matrix>& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    detail::require(solver.info() == Eigen::Success, "eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

inline Vector sym_eigenvalues(const Eigen::Ref<const Matrix>& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
    detail::require(solver.info() == Eigen::Success, "eigendecomposition failed");
    return solver.eigenvalues();
}

namespace detail {

/// Numerical-rank threshold for a PSD spectrum.
inline double rank_tol(const Vector& evals) {
    const double emax = evals.size() ? evals.cwiseAbs().maxCoeff() : 0.0;
    return emax * static_cast<double>(evals.size()) * 2.22e-16;
}

/// Minimum nonzero eigenvalue (lambda_min^+); +inf when the matrix is 0.
inline double lambda_min_pos(const Vector& evals) {
    const double tol = rank_tol(evals);
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < evals.size(); ++i)
        if (std::abs(evals[i]) > tol) best = std::min(best, evals[i]);
    return best;
}

}  // namespace detail

/// Eigenvalues of Sigma_hat = (1/n) X^T X, all p of them, computed from the
/// smaller Gram side. Ascending.
inline Vector sigma_hat_eigenvalues(const Eigen::Ref<const Matrix>& x) {
    const Index n = x.rows(), p = x.cols();
    if (p <= n) return sym_eigenvalues(x.transpose() * x / static_cast<double>(n));
    Vector w = sym_eigenvalues(x * x.transpose() / static_cast<double>(n));
    Vector out = Vector::Zero(p);
    out.tail(n) = w;  // pad with p - n zeros at the low end
    return out;
}

/// Eigenvalues of (1/n) X X^T, all n of them. Ascending.
inline Vector dual_gram_eigenvalues(const Eigen::Ref<const Matrix>& x) {
    const Index n = x.rows(), p = x.cols();
    if (n <= p) return sym_eigenvalues(x * x.transpose() / static_cast<double>(n));
    Vector d = sym_eigenvalues(x.transpose() * x / static_cast<double>(n));
    Vector out = Vector::Zero(n);
    out.tail(p) = d;
    return out;
}

/// Conjugate gradients on a SPD operator. Returns the final relative
/// residual; the caller decides whether non-convergence is an error.
inline double cg_solve(const std::function<Vector(const Vector&)>& op, const Vector& b,
                       Vector& x, double tol, int max_iter) {
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x = Vector::Zero(b.size());
        return 0.0;
    }
    x = Vector::Zero(b.size());
    Vector r = b;
    Vector d = r;
    double rs = r.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        if (std::sqrt(rs) / bnorm <= tol) break;
        Vector ad = op(d);
        const double da = d.dot(ad);
        if (da <= 0.0) break;  // lost positive definiteness
        const double alpha = rs / da;
        x += alpha * d;
        r -= alpha * ad;
        const double rs_new = r.squaredNorm();
        d = r + (rs_new / rs) * d;
        rs = rs_new;
    }
    return std::sqrt(rs) / bnorm;
}

/// Spectral factorization of the unsketched ridge problem, decomposed on the
/// smaller of the two Gram sides so that mu-sweeps cost O(min(n, p)) per
/// point. Resolves mu = 0 on rank-deficient systems to the min-norm
/// (pseudoinverse) solution.
class RidgeFactor {
public:
    RidgeFactor(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y)
        : n_(x.rows()), p_(x.cols()), dual_(p_ > n_) {
        detail::require(y.size() == n_, "ridge: y length must equal row count of X");
        const double n = static_cast<double>(n_);
        if (dual_) {
            SymSpectrum s = sym_eig(x * x.transpose() / n);
            evals_ = s.evals;
            proj_y_ = s.evecs.transpose() * y;  // V^T y, length n
            beta_basis_ = x.transpose() * s.evecs / n;  // (1/n) X^T V, p x n
            insample_basis_ = s.evecs;                  // V, n x n
        } else {
            SymSpectrum s = sym_eig(x.transpose() * x / n);
            evals_ = s.evals;
            Vector b = x.transpose() * y / n;
            proj_y_ = s.evecs.transpose() * b;  // U^T b, length p
            beta_basis_ = s.evecs;              // U
            insample_basis_ = x * s.evecs;      // X U, n x p
            y_sqnorm_ = y.squaredNorm();
            xu_ty_ = insample_basis_.transpose() * y;  // (X u_j)^T y
        }
        tol_ = detail::rank_tol(evals_);
        lam_min_pos_ = detail::lambda_min_pos(evals_);
    }

    Index n() const { return n_; }
    Index p() const { return p_; }
    const Vector& gram_evals() const { return evals_; }
    double lambda_min_pos() const { return lam_min_pos_; }

    /// Eigenvalues of Sigma_hat (length p), derived from the decomposed side.
    Vector sigma_spectrum() const {
        if (!dual_) return evals_;
        Vector out = Vector::Zero(p_);
        out.tail(evals_.size()) = evals_;
        return out;
    }

    Vector coefficients(double mu) const {
        return beta_basis_ * filtered(mu);
    }

    Vector insample(double mu) const {
        if (dual_) {
            Vector f(evals_.size());
            for (Index j = 0; j < evals_.size(); ++j)
                f[j] = shrink(evals_[j], mu) * proj_y_[j];
            return insample_basis_ * f;
        }
        return insample_basis_ * filtered(mu);
    }

    /// (1/n) tr[L_mu] for the ridge smoother.
    double smoother_trace(double mu) const {
        double acc = 0.0;
        for (Index j = 0; j < evals_.size(); ++j) acc += shrink(evals_[j], mu);
        return acc / static_cast<double>(n_);
    }

    /// Diagonal of the ridge smoother L_mu (length n).
    Vector smoother_diag(double mu) const {
        Vector out = Vector::Zero(n_);
        if (dual_) {
            for (Index i = 0; i < n_; ++i)
                for (Index j = 0; j < evals_.size(); ++j) {
                    const double v = insample_basis_(i, j);
                    out[i] += v * v * shrink(evals_[j], mu);
                }
            return out;
        }
        const double n = static_cast<double>(n_);
        for (Index i = 0; i < n_; ++i) {
            for (Index j = 0; j < evals_.size(); ++j) {
                if (evals_[j] <= tol_ && mu == 0.0) continue;
                const double v = insample_basis_(i, j);
                out[i] += v * v / (evals_[j] + mu);
            }
            out[i] /= n;
        }
        return out;
    }

    /// Ridge GCV of the squared risk at level mu.
    double gcv(double mu, const Eigen::Ref<const Vector>& y) const {
        const double denom = 1.0 - smoother_trace(mu);
        if (std::abs(denom) < 1e-12)
            throw degenerate_error("ridge GCV: smoother trace equals 1");
        const double num = (y - insample(mu)).squaredNorm() / static_cast<double>(n_);
        return num / (denom * denom);
    }

    /// Delta(mu) = (1/n) y^T ((1/n) X X^T + mu I_n)^{-2} y.
    double delta(double mu) const {
        const double n = static_cast<double>(n_);
        if (dual_) {
            double acc = 0.0;
            for (Index j = 0; j < evals_.size(); ++j) {
                const double d = evals_[j] + mu;
                acc += proj_y_[j] * proj_y_[j] / (d * d);
            }
            return acc / n;
        }
        // n-side spectrum: nonzero Sigma_hat eigenvalues plus n - rank zeros.
        double acc = 0.0;
        double captured = 0.0;
        for (Index j = 0; j < evals_.size(); ++j) {
            if (evals_[j] <= tol_) continue;
            const double proj_sq = xu_ty_[j] * xu_ty_[j] / (n * evals_[j]);
            captured += proj_sq;
            const double d = evals_[j] + mu;
            acc += proj_sq / (d * d);
        }
        const double orth = std::max(0.0, y_sqnorm_ - captured);
        return (acc + orth / (mu * mu)) / n;
    }

private:
    /// e/(e + mu) with the pseudoinverse convention at mu = 0.
    double shrink(double e, double mu) const {
        if (e <= tol_) return 0.0;
        return e / (e + mu);
    }

    /// Solves the spectral system, min-norm at mu = 0.
    Vector filtered(double mu) const {
        if (mu != 0.0 && mu <= -lam_min_pos_ + 1e-6 * lam_min_pos_)
            throw regularization_error("ridge level at or below -lambda_min^+");
        Vector f(evals_.size());
        for (Index j = 0; j < evals_.size(); ++j) {
            if (evals_[j] <= tol_ && mu == 0.0) {
                f[j] = 0.0;
            } else {
                f[j] = proj_y_[j] / (evals_[j] + mu);
            }
        }
        return f;
    }

    Index n_, p_;
    bool dual_;
    Vector evals_;
    Vector proj_y_;
    Matrix beta_basis_;
    Matrix insample_basis_;
    Vector xu_ty_;
    double y_sqnorm_ = 0.0;
    double tol_ = 0.0;
    double lam_min_pos_ = std::numeric_limits<double>::infinity();
};

}  // namespace freesketch
