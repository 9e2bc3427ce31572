#pragma once

#include "freesketch/common.hpp"
#include "freesketch/estimator.hpp"
#include "freesketch/functionals.hpp"
#include "freesketch/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace freesketch {

enum class RiskEstimatorKind { GCV, LOOCV, KFold, TestOracle };

inline std::string to_string(RiskEstimatorKind k) {
    switch (k) {
        case RiskEstimatorKind::GCV: return "GCV";
        case RiskEstimatorKind::LOOCV: return "LOOCV";
        case RiskEstimatorKind::KFold: return "KFold";
        case RiskEstimatorKind::TestOracle: return "TestOracle";
    }
    return "unknown";
}

struct RiskReport {
    RiskEstimatorKind estimator;
    double value;
    std::string functional;
    nlohmann::json meta;

    nlohmann::json to_json() const {
        return {{"estimator", to_string(estimator)},
                {"value", value},
                {"functional", functional},
                {"meta", meta}};
    }
};

/// The GCV-corrected empirical joint distribution: pairs (y_i, z_i) with
/// z_i = (x_i^T beta^ens - tr y_i) / (1 - tr), tr = (1/n) tr[L^ens].
struct GcvDistribution {
    std::vector<std::pair<double, double>> pairs;
    double trace_used = 0.0;
};

namespace detail {

inline nlohmann::json model_meta(const EnsembleModel& model) {
    return {{"lambda", model.lambda()},
            {"K", model.members()},
            {"n", model.n_train()},
            {"p", model.p()},
            {"mode", to_string(model.mode())}};
}

inline double checked_gcv_denominator(double trace) {
    const double denom = 1.0 - trace;
    if (std::abs(denom) < 1e-12)
        throw degenerate_error("GCV denominator degenerate: (1/n) tr[L] = 1");
    return denom;
}

}  // namespace detail

/// Plug-in GCV estimate of the squared prediction risk (exact trace).
inline RiskReport gcv_squared_risk(const EnsembleModel& model,
                                   const Eigen::Ref<const Matrix>& x,
                                   const Eigen::Ref<const Vector>& y) {
    detail::require(x.rows() == model.n_train() && y.size() == model.n_train(),
                    "gcv: model was not fitted on data of this shape");
    const double trace = model.smoother_trace_exact();
    const double denom = detail::checked_gcv_denominator(trace);
    const double num = (y - model.insample()).squaredNorm() / static_cast<double>(y.size());
    RiskReport r{RiskEstimatorKind::GCV, num / (denom * denom), "squared",
                 detail::model_meta(model)};
    r.meta["trace"] = trace;
    return r;
}

/// Same estimator with the Hutchinson trace in the denominator.
inline RiskReport gcv_squared_risk(const EnsembleModel& model,
                                   const Eigen::Ref<const Matrix>& x,
                                   const Eigen::Ref<const Vector>& y, const Hutchinson& h) {
    detail::require(x.rows() == model.n_train() && y.size() == model.n_train(),
                    "gcv: model was not fitted on data of this shape");
    const double trace = model.smoother_trace_hutchinson(h.seed, h.probes);
    const double denom = detail::checked_gcv_denominator(trace);
    const double num = (y - model.insample()).squaredNorm() / static_cast<double>(y.size());
    RiskReport r{RiskEstimatorKind::GCV, num / (denom * denom), "squared",
                 detail::model_meta(model)};
    r.meta["trace"] = trace;
    return r;
}

inline GcvDistribution gcv_corrected_pairs(const EnsembleModel& model,
                                           const Eigen::Ref<const Matrix>& x,
                                           const Eigen::Ref<const Vector>& y) {
    detail::require(x.rows() == model.n_train() && y.size() == model.n_train(),
                    "gcv: model was not fitted on data of this shape");
    const double trace = model.smoother_trace_exact();
    const double denom = detail::checked_gcv_denominator(trace);
    const Vector yhat = model.insample();
    GcvDistribution dist;
    dist.trace_used = trace;
    dist.pairs.reserve(static_cast<std::size_t>(y.size()));
    for (Index i = 0; i < y.size(); ++i)
        dist.pairs.emplace_back(y[i], (yhat[i] - trace * y[i]) / denom);
    return dist;
}

/// Plug-in GCV estimate (1/n) sum_i t(y_i, z_i) over the corrected pairs.
inline RiskReport gcv_functional(const EnsembleModel& model,
                                 const Eigen::Ref<const Matrix>& x,
                                 const Eigen::Ref<const Vector>& y,
                                 const ErrorFunctional& t) {
    GcvDistribution dist = gcv_corrected_pairs(model, x, y);
    double acc = 0.0;
    for (const auto& [yi, zi] : dist.pairs) acc += t.evaluate(yi, zi);
    RiskReport r{RiskEstimatorKind::GCV, acc / static_cast<double>(dist.pairs.size()),
                 t.name, detail::model_meta(model)};
    r.meta["trace"] = dist.trace_used;
    return r;
}

/// Exact leave-one-out functional via the per-member shortcut
/// x_i^T beta_{-i}^ens = y_i - (1/K) sum_k (y_i - x_i^T beta^k) / (1 - [L^k]_ii).
inline RiskReport loocv_functional(const EnsembleModel& model,
                                   const Eigen::Ref<const Matrix>& x,
                                   const Eigen::Ref<const Vector>& y,
                                   const ErrorFunctional& t) {
    detail::require(x.rows() == model.n_train() && y.size() == model.n_train(),
                    "loocv: model was not fitted on data of this shape");
    detail::require(model.mode() != SketchMode::ObservationSketch,
                    "loocv shortcut applies to feature-sketched and unsketched models");
    const Index n = y.size();
    Vector correction = Vector::Zero(n);
    const int k_members = model.mode() == SketchMode::FeatureSketch ? model.members() : 1;
    for (int k = 0; k < k_members; ++k) {
        const Vector resid = y - model.member_insample(k);
        const Vector diag = model.mode() == SketchMode::FeatureSketch
                                ? model.member_smoother_diag(k)
                                : model.ridge().smoother_diag(model.lambda());
        for (Index i = 0; i < n; ++i) {
            const double d = 1.0 - diag[i];
            if (std::abs(d) < 1e-12)
                throw degenerate_error("loocv: unit leverage at observation " +
                                       std::to_string(i));
            correction[i] += resid[i] / d;
        }
    }
    correction /= static_cast<double>(k_members);
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) acc += t.evaluate(y[i], y[i] - correction[i]);
    RiskReport r{RiskEstimatorKind::LOOCV, acc / static_cast<double>(n), t.name,
                 detail::model_meta(model)};
    return r;
}

/// Left-continuous empirical quantile Q(tau) = inf{z : F(z) >= tau}.
inline double empirical_quantile(std::vector<double> sorted_values, double tau) {
    const auto n = sorted_values.size();
    if (n == 0) throw std::invalid_argument("empirical quantile of an empty sample");
    if (tau <= 0.0) return sorted_values.front();
    const auto idx = static_cast<std::size_t>(
        std::min<double>(std::ceil(tau * static_cast<double>(n)), static_cast<double>(n)));
    return sorted_values[idx - 1];
}

/// Residual-quantile offsets (Q(tau_l), Q(tau_u)) of the GCV distribution;
/// the interval for a point x0 is x0^T beta^ens + [lower, upper].
inline std::pair<double, double> prediction_interval(const GcvDistribution& dist,
                                                     double tau_l, double tau_u) {
    detail::require(0.0 <= tau_l && tau_l < tau_u && tau_u <= 1.0,
                    "prediction interval needs 0 <= tau_l < tau_u <= 1");
    if (dist.pairs.empty()) throw std::invalid_argument("empty GCV distribution");
    std::vector<double> residuals;
    residuals.reserve(dist.pairs.size());
    for (const auto& [y, z] : dist.pairs) residuals.push_back(y - z);
    std::sort(residuals.begin(), residuals.end());
    return {empirical_quantile(residuals, tau_l), empirical_quantile(residuals, tau_u)};
}

/// Specification of an ensemble fit for resampling estimators.
struct EnsembleSpec {
    SketchMode mode = SketchMode::FeatureSketch;
    SketchKind kind = SketchKind::Gaussian;
    Index q = 0;  // sketch dimension (feature: q <= p; observation: m <= n)
    int K = 1;
    std::uint64_t seed = 0;
    FitConfig cfg;

    EnsembleModel fit(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                      std::uint64_t stream = 0) const {
        const std::uint64_t s = derive_seed(seed, stream);
        switch (mode) {
            case SketchMode::FeatureSketch:
                return EnsembleModel::fit_feature(x, y, kind, q, K, s, cfg);
            case SketchMode::ObservationSketch:
                return EnsembleModel::fit_observation(x, y, kind, q, K, s, cfg);
            case SketchMode::Unsketched:
                return EnsembleModel::fit_unsketched(x, y, cfg);
        }
        throw std::logic_error("unreachable");
    }
};

/// Standard k-fold cross-validation with fresh sketches per fold; averages
/// the per-fold means of t on the held-out fold.
inline RiskReport kfold_cv(const Eigen::Ref<const Matrix>& x,
                           const Eigen::Ref<const Vector>& y, int k,
                           const EnsembleSpec& spec, const ErrorFunctional& t) {
    const Index n = x.rows();
    detail::require(k >= 2, "k-fold needs k >= 2");
    detail::require(n >= k, "k-fold needs n >= k");
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(spec.seed, 0x6b666f6cULL));
    for (Index i = n - 1; i > 0; --i)
        std::swap(perm[static_cast<std::size_t>(i)],
                  perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);

    double fold_mean_sum = 0.0;
    Index start = 0;
    for (int f = 0; f < k; ++f) {
        const Index fold_size = n / k + (f < static_cast<int>(n % k) ? 1 : 0);
        detail::require(fold_size >= 1, "fold smaller than 1");
        const Index end = start + fold_size;
        Matrix xtr(n - fold_size, x.cols());
        Vector ytr(n - fold_size);
        Matrix xte(fold_size, x.cols());
        Vector yte(fold_size);
        Index itr = 0, ite = 0;
        for (Index i = 0; i < n; ++i) {
            const Index row = perm[static_cast<std::size_t>(i)];
            if (i >= start && i < end) {
                xte.row(ite) = x.row(row);
                yte[ite++] = y[row];
            } else {
                xtr.row(itr) = x.row(row);
                ytr[itr++] = y[row];
            }
        }
        EnsembleModel model = spec.fit(xtr, ytr, static_cast<std::uint64_t>(f) + 1);
        const Vector pred = model.predict(xte);
        double acc = 0.0;
        for (Index i = 0; i < fold_size; ++i) acc += t.evaluate(yte[i], pred[i]);
        fold_mean_sum += acc / static_cast<double>(fold_size);
        start = end;
    }
    RiskReport r{RiskEstimatorKind::KFold, fold_mean_sum / static_cast<double>(k), t.name,
                 {{"k", k}, {"n", n}, {"p", x.cols()}, {"lambda", spec.cfg.lambda}}};
    return r;
}

/// Monte-Carlo oracle: (1/n0) sum_i t(y0_i, x0_i^T beta^ens).
inline RiskReport test_functional(const EnsembleModel& model,
                                  const Eigen::Ref<const Matrix>& x_test,
                                  const Eigen::Ref<const Vector>& y_test,
                                  const ErrorFunctional& t) {
    detail::require(x_test.rows() > 0, "test set must be nonempty");
    detail::require(x_test.rows() == y_test.size(), "test set shape mismatch");
    const Vector pred = model.predict(x_test);
    double acc = 0.0;
    for (Index i = 0; i < y_test.size(); ++i) acc += t.evaluate(y_test[i], pred[i]);
    RiskReport r{RiskEstimatorKind::TestOracle,
                 acc / static_cast<double>(y_test.size()), t.name,
                 detail::model_meta(model)};
    r.meta["n_test"] = x_test.rows();
    return r;
}

}  // namespace freesketch
