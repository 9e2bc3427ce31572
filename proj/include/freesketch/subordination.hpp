#pragma once

#include "freesketch/common.hpp"
#include "freesketch/estimator.hpp"
#include "freesketch/gcv.hpp"
#include "freesketch/linalg.hpp"
#include "freesketch/s_transform.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace freesketch {

enum class SubordinationMode { Feature, Observation };

inline std::string to_string(SubordinationMode m) {
    return m == SubordinationMode::Feature ? "feature" : "observation";
}

/// Eigenvalues of the relevant empirical second-moment matrix plus the
/// sample count. Feature mode decomposes Sigma_hat (length p); observation
/// mode decomposes (1/n) X X^T (length n).
struct Spectrum {
    Vector evals;   // ascending, length = ambient dimension of the resolvent
    Index samples;  // n

    Index dim() const { return evals.size(); }
};

inline Spectrum sigma_hat_spectrum(const Eigen::Ref<const Matrix>& x) {
    return {sigma_hat_eigenvalues(x), x.rows()};
}

inline Spectrum gram_spectrum(const Eigen::Ref<const Matrix>& x) {
    return {dual_gram_eigenvalues(x), x.rows()};
}

struct SubordinationSolution {
    double lambda = 0.0;
    double mu = 0.0;  // nu in observation mode
    double alpha = 0.0;
    SketchKind kind = SketchKind::Identity;
    double trace_arg = 0.0;  // -(1/dim) tr[A (A + mu I)^{-1}]
    double dmu_dlambda = 0.0;
    SubordinationMode mode = SubordinationMode::Feature;

    nlohmann::json to_json() const {
        return {{"lambda", lambda},       {"mu", mu},
                {"alpha", alpha},         {"kind", to_string(kind)},
                {"trace_arg", trace_arg}, {"dmu_dlambda", dmu_dlambda},
                {"mode", to_string(mode)}};
    }
};

struct InflationFactors {
    double mu_prime = 0.0;   // NaN when the population covariance is not supplied
    double mu_dprime = 0.0;
    double delta = 0.0;
    SubordinationMode mode = SubordinationMode::Feature;

    nlohmann::json to_json() const {
        return {{"mu_prime", mu_prime},
                {"mu_dprime", mu_dprime},
                {"delta", delta},
                {"mode", to_string(mode)}};
    }
};

namespace detail {

/// w(mu) = -(1/dim) sum_i e_i / (e_i + mu).
inline double neg_resolvent_trace(const Vector& evals, double mu) {
    double acc = 0.0;
    for (Index i = 0; i < evals.size(); ++i) acc += evals[i] / (evals[i] + mu);
    return -acc / static_cast<double>(evals.size());
}

/// w'(mu) = (1/dim) sum_i e_i / (e_i + mu)^2.
inline double neg_resolvent_trace_deriv(const Vector& evals, double mu) {
    double acc = 0.0;
    for (Index i = 0; i < evals.size(); ++i) {
        const double d = evals[i] + mu;
        acc += evals[i] / (d * d);
    }
    return acc / static_cast<double>(evals.size());
}

/// Smallest admissible mu for the resolvent (above the most negative
/// eigenvalue; 0 for PSD spectra).
inline double mu_floor(const Vector& evals) {
    const double emin = evals.minCoeff();
    if (emin >= 0.0) return 0.0;
    return -emin * (1.0 + 1e-9);
}

/// Smallest mu at which the S-transform argument is inside the pole, i.e.
/// w(mu) > -alpha. Returns mu_floor when already admissible there.
inline double pole_floor(const Vector& evals, double alpha, double floor) {
    const double margin = 1e-12;
    if (neg_resolvent_trace(evals, floor + margin) > -alpha * (1.0 - 1e-10))
        return floor;
    double lo = floor + margin, hi = std::max(1.0, floor + 1.0);
    while (neg_resolvent_trace(evals, hi) <= -alpha * (1.0 - 1e-10)) {
        hi *= 2.0;
        if (hi > 1e18) throw subordination_error("no admissible mu for this alpha");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (neg_resolvent_trace(evals, mid) <= -alpha * (1.0 - 1e-10))
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

}  // namespace detail

/// alpha(mu) = (1/p) tr[Sigma_hat (Sigma_hat + mu I)^{-1}]; the sketch
/// aspect ratio that reproduces equivalent regularization mu at lambda = 0.
/// Strictly decreasing in mu with range (0, min(1, rank/p)).
inline double alpha_for_mu(const Spectrum& spec, double mu) {
    detail::require(mu > 0.0, "alpha_for_mu requires mu > 0");
    return -detail::neg_resolvent_trace(spec.evals, mu);
}

/// Solves the subordination fixed point
///   mu = lambda * S(-(1/dim) tr[A (A + mu I)^{-1}])
/// for the spectrum of A, by bracketed bisection plus Newton polish.
inline SubordinationSolution solve_mu(const Spectrum& spec, SketchKind kind, double alpha,
                                      double lambda,
                                      SubordinationMode mode = SubordinationMode::Feature) {
    const Vector& evals = spec.evals;
    detail::require(evals.size() > 0, "solve_mu: empty spectrum");
    if (kind != SketchKind::Identity)
        detail::require(alpha > 0.0 && alpha <= 1.0, "solve_mu: alpha must lie in (0, 1]");

    SubordinationSolution sol;
    sol.lambda = lambda;
    sol.alpha = alpha;
    sol.kind = kind;
    sol.mode = mode;

    if (kind == SketchKind::Identity) {
        sol.mu = lambda;
        sol.trace_arg = detail::neg_resolvent_trace(evals, lambda);
        sol.dmu_dlambda = 1.0;
        return sol;
    }

    const double floor = detail::mu_floor(evals);
    const double start = detail::pole_floor(evals, alpha, floor);

    auto s_at = [&](double mu) {
        return s_transform(kind, alpha, detail::neg_resolvent_trace(evals, mu));
    };
    auto f = [&](double mu) { return mu - lambda * s_at(mu); };

    if (lambda == 0.0) {
        // Ridgeless limit: mu = 0 when the argument stays inside the pole,
        // otherwise the root of w(mu) = -alpha (the Prop.-5.1 inverse).
        if (start <= floor + 1e-300 && floor == 0.0) {
            sol.mu = 0.0;
        } else {
            sol.mu = start;
        }
        sol.trace_arg = detail::neg_resolvent_trace(evals, std::max(sol.mu, 1e-300));
        sol.dmu_dlambda = std::numeric_limits<double>::quiet_NaN();
        if (sol.trace_arg > -alpha * (1.0 - 1e-10))
            sol.dmu_dlambda = s_transform(kind, alpha, sol.trace_arg);
        return sol;
    }

    detail::require(lambda > 0.0 || floor > 0.0 || evals.minCoeff() > 0.0,
                    "solve_mu: negative lambda requires a strictly positive spectrum");

    double lo = start + 1e-14 * std::max(1.0, start);
    double hi;
    if (lambda > 0.0) {
        // f(lo) < 0 near the pole (S blows up) or f(lo) = lo - lambda S <= 0
        // when S >= 1; grow hi until the sign flips.
        if (f(lo) > 0.0) {
            // Already positive at the floor: root sits between floor and lo
            // only if the pole branch applies; treat lo as the answer bracket.
            hi = lo;
            lo = start;
        } else {
            hi = std::max(2.0 * lambda + 1.0, 2.0 * lo + 1.0);
            int guard = 0;
            while (f(hi) < 0.0) {
                hi *= 2.0;
                if (++guard > 120) throw subordination_error("solve_mu: no upper bracket");
            }
        }
    } else {
        // Negative lambda: mu < 0 with mu > -lambda_min^+. Scan for a sign
        // change on (floor - lambda_min^+, 0].
        const double lmp = detail::lambda_min_pos(evals);
        lo = -lmp * (1.0 - 1e-9);
        hi = 0.0;
        if (!(f(lo) < 0.0 && f(hi) > 0.0) && !(f(lo) > 0.0 && f(hi) < 0.0))
            throw subordination_error(
                "solve_mu: lambda appears to be at or below lambda_0 (no bracket)");
    }

    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm <= 0.0) == (flo <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    double mu = 0.5 * (lo + hi);

    // Newton polish with the analytic derivative.
    for (int it = 0; it < 5; ++it) {
        const double w = detail::neg_resolvent_trace(evals, mu);
        if (w <= -alpha * (1.0 - 1e-12)) break;
        const double sp = s_transform_derivative(kind, alpha, w);
        const double wp = detail::neg_resolvent_trace_deriv(evals, mu);
        const double fv = mu - lambda * s_transform(kind, alpha, w);
        const double fp = 1.0 - lambda * sp * wp;
        if (fp == 0.0) break;
        const double next = mu - fv / fp;
        if (next <= start || !std::isfinite(next)) break;
        mu = next;
    }

    sol.mu = mu;
    sol.trace_arg = detail::neg_resolvent_trace(evals, mu);
    const double sp = s_transform_derivative(kind, alpha, sol.trace_arg);
    const double wp = detail::neg_resolvent_trace_deriv(evals, mu);
    sol.dmu_dlambda = s_transform(kind, alpha, sol.trace_arg) / (1.0 - lambda * sp * wp);

    const double residual = mu - lambda * s_transform(kind, alpha, sol.trace_arg);
    if (std::abs(residual) > 1e-10 * std::max(1.0, std::abs(lambda)))
        throw subordination_error("solve_mu: fixed-point residual did not converge");
    return sol;
}

inline SubordinationSolution solve_mu(const Eigen::Ref<const Matrix>& x, SketchKind kind,
                                      double alpha, double lambda) {
    return solve_mu(sigma_hat_spectrum(x), kind, alpha, lambda);
}

/// Inverts the subordination relation: the lambda whose fixed point is mu.
inline double solve_lambda_from_mu(const Spectrum& spec, SketchKind kind, double alpha,
                                   double mu) {
    if (kind == SketchKind::Identity) return mu;
    const double w = detail::neg_resolvent_trace(spec.evals, mu);
    if (w <= -alpha * (1.0 - 1e-10))
        throw subordination_error(
            "solve_lambda_from_mu: mu below the attainable range for this sketch size");
    return mu / s_transform(kind, alpha, w);
}

/// Observation-sketch analogue on the n x n spectrum of (1/n) X X^T.
inline SubordinationSolution solve_nu(const Eigen::Ref<const Matrix>& x, SketchKind kind,
                                      double eta, double lambda) {
    return solve_mu(gram_spectrum(x), kind, eta, lambda, SubordinationMode::Observation);
}

/// Empirical implicit regularization: the root in mu of
///   (1/dim) tr[A S (S^T A S + lambda I)^{-1} S^T] = (1/dim) tr[A (A + mu I)^{-1}],
/// given the sketched and ambient spectra. Makes no use of any closed-form
/// S-transform.
inline double empirical_mu_from_spectra(const Vector& ambient_evals,
                                        const Vector& sketched_evals, double lambda,
                                        Index dim) {
    const double lmp_sketched = detail::lambda_min_pos(sketched_evals);
    if (std::isfinite(lmp_sketched) && lambda <= -lmp_sketched * (1.0 - 1e-9))
        throw subordination_error("empirical_mu: lambda at or below lambda_0");

    double lhs = 0.0;
    for (Index i = 0; i < sketched_evals.size(); ++i)
        lhs += sketched_evals[i] / (sketched_evals[i] + lambda);
    lhs /= static_cast<double>(dim);

    auto rhs = [&](double mu) {
        double acc = 0.0;
        for (Index i = 0; i < ambient_evals.size(); ++i)
            acc += ambient_evals[i] / (ambient_evals[i] + mu);
        return acc / static_cast<double>(dim);
    };

    const double floor = detail::mu_floor(ambient_evals);
    double lo = floor + 1e-14 * std::max(1.0, floor);
    if (rhs(lo) <= lhs)
        throw subordination_error("empirical_mu: trace equation has no root above mu floor");
    double hi = std::max(1.0, 2.0 * lo);
    int guard = 0;
    while (rhs(hi) > lhs) {
        hi *= 2.0;
        if (++guard > 200) throw subordination_error("empirical_mu: no upper bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (rhs(mid) > lhs)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Empirical mu from data and an actual sketch draw.
inline double empirical_mu(const Eigen::Ref<const Matrix>& x, const SketchOperator& s,
                           double lambda) {
    detail::require(x.cols() == s.p(), "empirical_mu: X columns must equal sketch p");
    const double n = static_cast<double>(x.rows());
    Matrix xs = s.apply_right(x);
    Vector sketched = sym_eigenvalues(xs.transpose() * xs / n);
    Vector ambient = sigma_hat_eigenvalues(x);
    return empirical_mu_from_spectra(ambient, sketched, lambda, s.p());
}

/// lambda_0 estimate from supplied member sketches: the negative of the
/// smallest nonzero eigenvalue of S_k^T Sigma_hat S_k across members, with a
/// 1e-9 relative safety margin.
inline double lambda0_estimate(const Eigen::Ref<const Matrix>& x,
                               const std::vector<SketchOperator>& sketches) {
    detail::require(!sketches.empty(), "lambda0_estimate: no sketches supplied");
    const double n = static_cast<double>(x.rows());
    double lmp = std::numeric_limits<double>::infinity();
    for (const auto& s : sketches) {
        Matrix xs = s.apply_right(x);
        Vector evals = sym_eigenvalues(xs.transpose() * xs / n);
        lmp = std::min(lmp, detail::lambda_min_pos(evals));
    }
    return -lmp * (1.0 - 1e-9);
}

/// 2 R_2 - R_1: eliminates the 1/K variance term from two ensemble sizes.
inline double ensemble_trick(double r1, double r2) { return 2.0 * r2 - r1; }

namespace detail {

struct InflationCore {
    SubordinationSolution sol;
    double s_deriv = 0.0;      // S'(w) at the solution
    double lead = 0.0;         // -dmu/dlambda * lambda^2 * S'(w) >= 0
    double denom_trace = 0.0;  // (1/n) tr[A (A + mu I)^{-1}]
};

inline InflationCore inflation_core(const Spectrum& spec, SketchKind kind, double alpha,
                                    double lambda, SubordinationMode mode) {
    InflationCore core;
    core.sol = solve_mu(spec, kind, alpha, lambda, mode);
    core.s_deriv = s_transform_derivative(kind, alpha, core.sol.trace_arg);
    core.lead = -core.sol.dmu_dlambda * lambda * lambda * core.s_deriv;
    double acc = 0.0;
    for (Index i = 0; i < spec.evals.size(); ++i)
        acc += spec.evals[i] / (spec.evals[i] + core.sol.mu);
    core.denom_trace = acc / static_cast<double>(spec.samples);
    return core;
}

}  // namespace detail

/// Feature-sketch inflation factors:
///   mu'  = -dmu/dlambda lambda^2 S'(w) (1/p) tr[Sigma (Sigma_hat + mu)^{-2}]
///   mu'' = -dmu/dlambda lambda^2 S'(w) (1/p) tr[Sigma_hat (Sigma_hat + mu)^{-2}]
///          / (1 - (1/n) tr[Sigma_hat (Sigma_hat + mu)^{-1}])^2
///   Delta = (1/n) y^T ((1/n) X X^T + mu I)^{-2} y.
/// mu' needs the population covariance; pass nullptr to skip it (NaN).
inline InflationFactors inflation_factors(const Eigen::Ref<const Matrix>& x,
                                          const Matrix* sigma,
                                          const Eigen::Ref<const Vector>& y, SketchKind kind,
                                          double alpha, double lambda) {
    const Index p = x.cols();
    const double pd = static_cast<double>(p);
    Spectrum spec = sigma_hat_spectrum(x);
    auto core = detail::inflation_core(spec, kind, alpha, lambda, SubordinationMode::Feature);
    const double mu = core.sol.mu;

    InflationFactors out;
    out.mode = SubordinationMode::Feature;

    if (sigma != nullptr) {
        detail::require(sigma->rows() == p && sigma->cols() == p,
                        "inflation_factors: Sigma must be p x p");
        // (1/p) tr[Sigma (Sigma_hat + mu I)^{-2}] through the p-side basis.
        const double n = static_cast<double>(x.rows());
        SymSpectrum es = sym_eig(x.transpose() * x / n);
        Matrix su = (*sigma) * es.evecs;
        double acc = 0.0;
        for (Index j = 0; j < p; ++j) {
            const double d = es.evals[j] + mu;
            acc += es.evecs.col(j).dot(su.col(j)) / (d * d);
        }
        out.mu_prime = core.lead * acc / pd;
    } else {
        out.mu_prime = std::numeric_limits<double>::quiet_NaN();
    }

    double tr2 = 0.0;
    for (Index j = 0; j < spec.evals.size(); ++j) {
        const double d = spec.evals[j] + mu;
        tr2 += spec.evals[j] / (d * d);
    }
    const double denom = 1.0 - core.denom_trace;
    out.mu_dprime = core.lead * (tr2 / pd) / (denom * denom);
    out.delta = RidgeFactor(x, y).delta(mu);
    return out;
}

/// Observation-sketch inflation factors (nu', nu'', Delta~) on the n x n
/// spectrum, with dnu/dlambda by implicit differentiation:
///   nu'  = -dnu/dlambda lambda^2 S'(w) (1/n) tr[(1/n) X Sigma X^T (R)^2]
///   nu'' = -dnu/dlambda lambda^2 S'(w) (1/n) tr[((1/n) X X^T)^2 (R)^2]
///          / (1 - (1/n) tr[(1/n) X X^T R])^2,  R = ((1/n) X X^T + nu I)^{-1}.
inline InflationFactors observation_inflation(const Eigen::Ref<const Matrix>& x,
                                              const Matrix* sigma,
                                              const Eigen::Ref<const Vector>& y,
                                              SketchKind kind, double eta, double lambda) {
    const Index n = x.rows();
    const double nd = static_cast<double>(n);
    SymSpectrum es = sym_eig(x * x.transpose() / nd);
    Spectrum spec{es.evals, n};
    auto core =
        detail::inflation_core(spec, kind, eta, lambda, SubordinationMode::Observation);
    const double nu = core.sol.mu;

    InflationFactors out;
    out.mode = SubordinationMode::Observation;

    if (sigma != nullptr) {
        detail::require(sigma->rows() == x.cols() && sigma->cols() == x.cols(),
                        "observation_inflation: Sigma must be p x p");
        Matrix mid = x * (*sigma) * x.transpose() / nd;
        Matrix mu_basis = mid * es.evecs;
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double d = es.evals[j] + nu;
            acc += es.evecs.col(j).dot(mu_basis.col(j)) / (d * d);
        }
        out.mu_prime = core.lead * acc / nd;
    } else {
        out.mu_prime = std::numeric_limits<double>::quiet_NaN();
    }

    double tr2 = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double d = es.evals[j] + nu;
        tr2 += es.evals[j] * es.evals[j] / (d * d);
    }
    const double denom = 1.0 - core.denom_trace;
    out.mu_dprime = core.lead * (tr2 / nd) / (denom * denom);

    Vector vty = es.evecs.transpose() * y;
    double delta = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double d = es.evals[j] + nu;
        delta += vty[j] * vty[j] / (d * d);
    }
    out.delta = delta / nd;
    return out;
}

/// Ground truth of a simulated regression task for oracle risk evaluation.
struct GroundTruth {
    Vector beta0;
    Vector sigma_diag;  // population covariance (diagonal)
    double sigma_xi = 0.0;
};

/// Population squared risk of feature-space coefficients under the truth.
inline double population_risk(const Vector& beta, const GroundTruth& truth) {
    const Vector d = beta - truth.beta0;
    double acc = 0.0;
    for (Index j = 0; j < d.size(); ++j) acc += truth.sigma_diag[j] * d[j] * d[j];
    return acc + truth.sigma_xi * truth.sigma_xi;
}

/// Predicted (bias, variance/K) of the sketched ensemble risk: bias is the
/// oracle risk of unsketched ridge at the equivalent mu, variance is
/// mu' Delta.
inline std::pair<double, double> risk_decomposition_predicted(
    const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
    const GroundTruth& truth, SketchKind kind, double alpha, double lambda, int k) {
    detail::require(k >= 1, "risk decomposition needs K >= 1");
    Spectrum spec = sigma_hat_spectrum(x);
    auto sol = solve_mu(spec, kind, alpha, lambda);
    Vector beta_ridge = RidgeFactor(x, y).coefficients(sol.mu);
    const double bias = population_risk(beta_ridge, truth);
    Matrix sigma = truth.sigma_diag.asDiagonal();
    auto infl = inflation_factors(x, &sigma, y, kind, alpha, lambda);
    return {bias, infl.mu_prime * infl.delta / static_cast<double>(k)};
}

/// Corrected observation-sketch GCV: estimates nu, Delta~, C1; removes the
/// 1/K variance with the ensemble trick at K = 1, 2; recovers the inflation
/// lead C2; replaces the inconsistent trace by
/// C1' = C1 - (s/(1-s))^2, s = (1/n) tr[Sigma_hat (Sigma_hat + nu I)^{-1}];
/// and returns R~(ridge at nu) + C2 C1' Delta~ / K.
inline RiskReport corrected_observation_gcv(const Eigen::Ref<const Matrix>& x,
                                            const Eigen::Ref<const Vector>& y,
                                            const std::vector<SketchOperator>& sketches,
                                            double lambda, const FitConfig& base_cfg = {}) {
    detail::require(sketches.size() >= 2,
                    "corrected observation GCV needs K >= 2 fits for the ensemble trick");
    const Index n = x.rows();
    const double nd = static_cast<double>(n);
    const double eta = static_cast<double>(sketches.front().q()) / nd;
    const SketchKind kind = sketches.front().kind();

    FitConfig cfg = base_cfg;
    cfg.lambda = lambda;
    auto model = EnsembleModel::fit_observation_with(x, y, sketches, cfg);
    const int k_total = model.members();

    int step = 1;
    try {
        // Step 1: nu from the subordination relation.
        SymSpectrum es = sym_eig(x * x.transpose() / nd);
        auto sol = solve_mu(Spectrum{es.evals, n}, kind, eta, lambda,
                            SubordinationMode::Observation);
        const double nu = sol.mu;

        // Step 2: Delta~ and C1.
        step = 2;
        Vector vty = es.evecs.transpose() * y;
        double delta = 0.0, s_tr = 0.0, tr2 = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double d = es.evals[j] + nu;
            delta += vty[j] * vty[j] / (d * d);
            s_tr += es.evals[j] / d;
            tr2 += es.evals[j] * es.evals[j] / (d * d);
        }
        delta /= nd;
        s_tr /= nd;
        const double one_minus_s = 1.0 - s_tr;
        if (std::abs(one_minus_s) < 1e-12)
            throw degenerate_error("corrected GCV: ridge denominator degenerate");
        const double c1 = (tr2 / nd) / (one_minus_s * one_minus_s);

        // Step 3: ensemble trick with K = 1 and K = 2.
        step = 3;
        double r1 = 0.0;
        for (int k = 0; k < k_total; ++k)
            r1 += gcv_squared_risk(model.with_members({k}), x, y).value;
        r1 /= static_cast<double>(k_total);
        double r2 = 0.0;
        int pairs = 0;
        for (int k = 0; k + 1 < k_total; k += 2) {
            r2 += gcv_squared_risk(model.with_members({k, k + 1}), x, y).value;
            ++pairs;
        }
        r2 /= static_cast<double>(pairs);
        const double ridge_est = ensemble_trick(r1, r2);
        const double c = r1 - ridge_est;  // nu'' Delta~

        // Step 4: strip Delta~ and C1 to recover the lead C2.
        step = 4;
        const double c2 = c / (c1 * delta);

        // Step 5: consistent trace via the mismatch identity.
        step = 5;
        const double ratio = s_tr / one_minus_s;
        const double c1_prime = c1 - ratio * ratio;

        // Step 6: corrected risk estimate.
        step = 6;
        const double value = ridge_est + c2 * c1_prime * delta / static_cast<double>(k_total);
        RiskReport report{RiskEstimatorKind::GCV, value, "squared",
                          {{"corrected", true},
                           {"nu", nu},
                           {"lambda", lambda},
                           {"eta", eta},
                           {"K", k_total},
                           {"kind", to_string(kind)},
                           {"naive", gcv_squared_risk(model, x, y).value},
                           {"ridge_estimate", ridge_est},
                           {"C1", c1},
                           {"C1_prime", c1_prime},
                           {"C2", c2},
                           {"delta", delta}}};
        return report;
    } catch (const degenerate_error&) {
        throw;
    } catch (const std::exception& e) {
        throw subordination_error("corrected observation GCV failed at step " +
                                  std::to_string(step) + ": " + e.what());
    }
}

}  // namespace freesketch
