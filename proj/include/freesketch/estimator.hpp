#pragma once

#include "freesketch/common.hpp"
#include "freesketch/linalg.hpp"
#include "freesketch/rng.hpp"
#include "freesketch/sketch.hpp"

#include <json.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace freesketch {

enum class SketchMode { FeatureSketch, ObservationSketch, Unsketched };

inline std::string to_string(SketchMode mode) {
    switch (mode) {
        case SketchMode::FeatureSketch: return "feature";
        case SketchMode::ObservationSketch: return "observation";
        case SketchMode::Unsketched: return "unsketched";
    }
    return "unknown";
}

enum class SolverKind { Direct, ConjugateGradient };

struct FitConfig {
    double lambda = 0.0;
    SolverKind solver = SolverKind::Direct;
    double cg_tol = 1e-8;
    int cg_max_iter = 1000;

    void validate() const {
        detail::require(cg_tol > 0.0 && cg_tol <= 1e-2, "cg_tol must lie in (0, 1e-2]");
        detail::require(cg_max_iter >= 1, "cg_max_iter must be >= 1");
    }
};

namespace detail {

/// Spectral core shared by feature- and observation-sketched members: the
/// eigensystem of the (regularizable) Gram matrix plus the projections needed
/// for coefficients, in-sample predictions, traces, and leverage diagonals.
struct MemberCore {
    Vector evals;   // Gram eigenvalues, ascending
    Matrix evecs;   // U
    Vector proj;    // U^T rhs
    Matrix pred_u;  // (prediction basis) x U, n x dim
    double tol = 0.0;
    double lam_min_pos = 0.0;

    void finalize() {
        tol = rank_tol(evals);
        lam_min_pos = lambda_min_pos(evals);
    }

    Vector filtered(double lambda) const {
        if (lambda != 0.0 && lambda <= -lam_min_pos + 1e-6 * lam_min_pos)
            throw regularization_error(
                "ridge level at or below -lambda_min^+ of the sketched Gram matrix");
        Vector f(evals.size());
        for (Index j = 0; j < evals.size(); ++j) {
            if (evals[j] <= tol && lambda == 0.0)
                f[j] = 0.0;  // min-norm resolution of the ridgeless limit
            else
                f[j] = proj[j] / (evals[j] + lambda);
        }
        return f;
    }

    double shrink(double e, double lambda) const {
        if (e <= tol) return 0.0;
        return e / (e + lambda);
    }

    /// tr[(G + lambda I)^{-1} G]; equals tr[L] for the member smoother.
    double smoother_trace_sum(double lambda) const {
        double acc = 0.0;
        for (Index j = 0; j < evals.size(); ++j) acc += shrink(evals[j], lambda);
        return acc;
    }
};

}  // namespace detail

/// One feature-sketched ensemble member: caches X S and the eigensystem of
/// (1/n) S^T X^T X S so that any lambda costs O(q) after construction.
class FeatureMember {
public:
    FeatureMember(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                  SketchOperator sketch)
        : sketch_(std::move(sketch)), n_(x.rows()) {
        detail::require(x.cols() == sketch_.p(), "feature member: X columns != sketch p");
        detail::require(y.size() == n_, "feature member: y length != n");
        const double n = static_cast<double>(n_);
        Matrix xs = sketch_.apply_right(x);
        SymSpectrum s = sym_eig(xs.transpose() * xs / n);
        core_.evals = std::move(s.evals);
        core_.evecs = std::move(s.evecs);
        core_.proj = core_.evecs.transpose() * (xs.transpose() * y / n);
        core_.pred_u = xs * core_.evecs;
        core_.finalize();
    }

    const SketchOperator& sketch() const { return sketch_; }
    Index n() const { return n_; }
    Index q() const { return sketch_.q(); }

    /// beta^S in sketch space (length q).
    Vector coefficients(double lambda) const { return core_.evecs * core_.filtered(lambda); }

    /// Feature-space coefficients S beta^S (length p).
    Vector feature_coefficients(double lambda) const {
        return sketch_.apply_left(coefficients(lambda));
    }

    Vector insample(double lambda) const { return core_.pred_u * core_.filtered(lambda); }

    Vector predict(const Eigen::Ref<const Matrix>& x0, double lambda) const {
        return sketch_.apply_right(x0) * coefficients(lambda);
    }

    /// (1/n) tr[L^k] at the given lambda.
    double smoother_trace(double lambda) const {
        return core_.smoother_trace_sum(lambda) / static_cast<double>(n_);
    }

    /// Diagonal of the member smoother L^k (length n); entries in [0, 1) for
    /// lambda > 0.
    Vector smoother_diag(double lambda) const {
        Vector out(n_);
        const double n = static_cast<double>(n_);
        for (Index i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (Index j = 0; j < core_.evals.size(); ++j) {
                const double e = core_.evals[j];
                if (e <= core_.tol && lambda == 0.0) continue;
                const double u = core_.pred_u(i, j);
                acc += u * u / (e + lambda);
            }
            out[i] = acc / n;
        }
        return out;
    }

    double hutchinson_trace(double lambda, std::uint64_t seed, int probes) const {
        Rng rng(seed);
        const Index q = core_.evals.size();
        double acc = 0.0;
        for (int t = 0; t < probes; ++t) {
            Vector z(q);
            for (Index j = 0; j < q; ++j) z[j] = rng.sign();
            Vector uz = core_.evecs.transpose() * z;
            double est = 0.0;
            for (Index j = 0; j < q; ++j)
                est += uz[j] * uz[j] * core_.shrink(core_.evals[j], lambda);
            acc += est;
        }
        return acc / (static_cast<double>(probes) * static_cast<double>(n_));
    }

    double lambda_min_pos() const { return core_.lam_min_pos; }

private:
    SketchOperator sketch_;
    Index n_;
    detail::MemberCore core_;
};

/// One observation-sketched member (sketch T in R^{n x m} applied to rows).
/// Solves the p x p system directly when p <= m, otherwise through the
/// Woodbury dual m x m system.
class ObservationMember {
public:
    ObservationMember(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                      SketchOperator sketch)
        : sketch_(std::move(sketch)), n_(x.rows()), p_(x.cols()) {
        detail::require(n_ == sketch_.p(), "observation member: X rows != sketch n");
        detail::require(y.size() == n_, "observation member: y length != n");
        const double n = static_cast<double>(n_);
        const Index m = sketch_.q();
        Matrix mt = sketch_.apply_right(x.transpose()).transpose();  // T^T X, m x p
        Vector u = sketch_.apply_transpose(y);                       // T^T y
        dual_ = p_ > m;
        if (dual_) {
            SymSpectrum s = sym_eig(mt * mt.transpose() / n);  // (1/n) T^T X X^T T
            core_.evals = std::move(s.evals);
            core_.evecs = std::move(s.evecs);
            core_.proj = core_.evecs.transpose() * u;
            core_.pred_u = (x * mt.transpose() / n) * core_.evecs;  // (1/n) X M^T U
            beta_basis_ = mt.transpose() * core_.evecs / n;         // (1/n) M^T U
        } else {
            SymSpectrum s = sym_eig(mt.transpose() * mt / n);  // (1/n) X^T T T^T X
            core_.evals = std::move(s.evals);
            core_.evecs = std::move(s.evecs);
            core_.proj = core_.evecs.transpose() * (mt.transpose() * u / n);
            core_.pred_u = x * core_.evecs;
            beta_basis_ = core_.evecs;
        }
        core_.finalize();
    }

    const SketchOperator& sketch() const { return sketch_; }

    /// Feature-space coefficients (length p).
    Vector coefficients(double lambda) const { return beta_basis_ * core_.filtered(lambda); }

    Vector insample(double lambda) const { return core_.pred_u * core_.filtered(lambda); }

    Vector predict(const Eigen::Ref<const Matrix>& x0, double lambda) const {
        return x0 * coefficients(lambda);
    }

    /// (1/n) tr[L~^k]; the nonzero spectrum agrees on the primal and dual
    /// sides, so both paths sum the same shrinkage factors.
    double smoother_trace(double lambda) const {
        return core_.smoother_trace_sum(lambda) / static_cast<double>(n_);
    }

    double lambda_min_pos() const { return core_.lam_min_pos; }

private:
    SketchOperator sketch_;
    Index n_, p_;
    bool dual_ = false;
    detail::MemberCore core_;
    Matrix beta_basis_;
};

/// K fitted sketched ridge members plus metadata. Immutable after fitting;
/// members are shared, so sub-ensembles (with_members) are cheap views.
class EnsembleModel {
public:
    static EnsembleModel fit_feature(const Eigen::Ref<const Matrix>& x,
                                     const Eigen::Ref<const Vector>& y, SketchKind kind,
                                     Index q, int k, std::uint64_t seed,
                                     const FitConfig& cfg) {
        std::vector<SketchOperator> sketches;
        sketches.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            sketches.push_back(make_sketch(kind, x.cols(), q,
                                           derive_seed(seed, static_cast<std::uint64_t>(i))));
        return fit_feature_with(x, y, sketches, cfg);
    }

    static EnsembleModel fit_feature_with(const Eigen::Ref<const Matrix>& x,
                                          const Eigen::Ref<const Vector>& y,
                                          const std::vector<SketchOperator>& sketches,
                                          const FitConfig& cfg) {
        cfg.validate();
        detail::require(!sketches.empty(), "ensemble needs at least one member");
        EnsembleModel m;
        m.mode_ = SketchMode::FeatureSketch;
        m.lambda_ = cfg.lambda;
        m.p_ = x.cols();
        m.n_ = x.rows();
        for (std::size_t k = 0; k < sketches.size(); ++k) {
            try {
                m.fmembers_.push_back(std::make_shared<FeatureMember>(x, y, sketches[k]));
                m.fmembers_.back()->coefficients(cfg.lambda);  // surfaces bad lambda now
            } catch (const regularization_error& e) {
                throw regularization_error("member " + std::to_string(k) + ": " + e.what());
            }
        }
        return m;
    }

    static EnsembleModel fit_observation(const Eigen::Ref<const Matrix>& x,
                                         const Eigen::Ref<const Vector>& y, SketchKind kind,
                                         Index m_dim, int k, std::uint64_t seed,
                                         const FitConfig& cfg) {
        std::vector<SketchOperator> sketches;
        sketches.reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            sketches.push_back(make_sketch(kind, x.rows(), m_dim,
                                           derive_seed(seed, static_cast<std::uint64_t>(i))));
        return fit_observation_with(x, y, sketches, cfg);
    }

    static EnsembleModel fit_observation_with(const Eigen::Ref<const Matrix>& x,
                                              const Eigen::Ref<const Vector>& y,
                                              const std::vector<SketchOperator>& sketches,
                                              const FitConfig& cfg) {
        cfg.validate();
        detail::require(!sketches.empty(), "ensemble needs at least one member");
        EnsembleModel m;
        m.mode_ = SketchMode::ObservationSketch;
        m.lambda_ = cfg.lambda;
        m.p_ = x.cols();
        m.n_ = x.rows();
        for (std::size_t k = 0; k < sketches.size(); ++k) {
            try {
                m.omembers_.push_back(std::make_shared<ObservationMember>(x, y, sketches[k]));
                m.omembers_.back()->coefficients(cfg.lambda);
            } catch (const regularization_error& e) {
                throw regularization_error("member " + std::to_string(k) + ": " + e.what());
            }
        }
        return m;
    }

    static EnsembleModel fit_unsketched(const Eigen::Ref<const Matrix>& x,
                                        const Eigen::Ref<const Vector>& y,
                                        const FitConfig& cfg) {
        cfg.validate();
        EnsembleModel m;
        m.mode_ = SketchMode::Unsketched;
        m.lambda_ = cfg.lambda;
        m.p_ = x.cols();
        m.n_ = x.rows();
        m.ridge_ = std::make_shared<RidgeFactor>(x, y);
        m.ridge_->coefficients(cfg.lambda);
        return m;
    }

    /// Sub-ensemble view sharing the fitted members.
    EnsembleModel with_members(const std::vector<int>& idx) const {
        detail::require(!idx.empty(), "sub-ensemble needs at least one member");
        EnsembleModel m;
        m.mode_ = mode_;
        m.lambda_ = lambda_;
        m.p_ = p_;
        m.n_ = n_;
        m.ridge_ = ridge_;
        for (int i : idx) {
            detail::require(i >= 0 && i < members(), "member index out of range");
            if (mode_ == SketchMode::FeatureSketch)
                m.fmembers_.push_back(fmembers_[static_cast<std::size_t>(i)]);
            else if (mode_ == SketchMode::ObservationSketch)
                m.omembers_.push_back(omembers_[static_cast<std::size_t>(i)]);
        }
        return m;
    }

    SketchMode mode() const { return mode_; }
    double lambda() const { return lambda_; }
    Index p() const { return p_; }
    Index n_train() const { return n_; }
    int members() const {
        if (mode_ == SketchMode::FeatureSketch) return static_cast<int>(fmembers_.size());
        if (mode_ == SketchMode::ObservationSketch) return static_cast<int>(omembers_.size());
        return 1;
    }

    const FeatureMember& feature_member(int k) const {
        return *fmembers_.at(static_cast<std::size_t>(k));
    }
    const ObservationMember& observation_member(int k) const {
        return *omembers_.at(static_cast<std::size_t>(k));
    }
    const RidgeFactor& ridge() const { return *ridge_; }

    Vector predict(const Eigen::Ref<const Matrix>& x0) const {
        detail::require(x0.cols() == p_, "predict: column count must equal p");
        Vector acc = Vector::Zero(x0.rows());
        switch (mode_) {
            case SketchMode::FeatureSketch:
                for (const auto& m : fmembers_) acc += m->predict(x0, lambda_);
                return acc / static_cast<double>(fmembers_.size());
            case SketchMode::ObservationSketch:
                for (const auto& m : omembers_) acc += m->predict(x0, lambda_);
                return acc / static_cast<double>(omembers_.size());
            case SketchMode::Unsketched:
                return x0 * ridge_->coefficients(lambda_);
        }
        return acc;
    }

    /// (1/K) sum_k S_k beta^{S_k} materialized in feature space.
    Vector aggregated_beta() const {
        Vector acc = Vector::Zero(p_);
        switch (mode_) {
            case SketchMode::FeatureSketch:
                for (const auto& m : fmembers_) acc += m->feature_coefficients(lambda_);
                return acc / static_cast<double>(fmembers_.size());
            case SketchMode::ObservationSketch:
                for (const auto& m : omembers_) acc += m->coefficients(lambda_);
                return acc / static_cast<double>(omembers_.size());
            case SketchMode::Unsketched:
                return ridge_->coefficients(lambda_);
        }
        return acc;
    }

    /// Ensemble in-sample predictions on the training design.
    Vector insample() const {
        switch (mode_) {
            case SketchMode::FeatureSketch: {
                Vector acc = Vector::Zero(n_);
                for (const auto& m : fmembers_) acc += m->insample(lambda_);
                return acc / static_cast<double>(fmembers_.size());
            }
            case SketchMode::ObservationSketch: {
                Vector acc = Vector::Zero(n_);
                for (const auto& m : omembers_) acc += m->insample(lambda_);
                return acc / static_cast<double>(omembers_.size());
            }
            case SketchMode::Unsketched:
                return ridge_->insample(lambda_);
        }
        return {};
    }

    Vector member_insample(int k) const {
        if (mode_ == SketchMode::FeatureSketch)
            return fmembers_.at(static_cast<std::size_t>(k))->insample(lambda_);
        if (mode_ == SketchMode::ObservationSketch)
            return omembers_.at(static_cast<std::size_t>(k))->insample(lambda_);
        return ridge_->insample(lambda_);
    }

    /// Exact (1/n) tr[L^ens].
    double smoother_trace_exact() const {
        switch (mode_) {
            case SketchMode::FeatureSketch: {
                double acc = 0.0;
                for (const auto& m : fmembers_) acc += m->smoother_trace(lambda_);
                return acc / static_cast<double>(fmembers_.size());
            }
            case SketchMode::ObservationSketch: {
                double acc = 0.0;
                for (const auto& m : omembers_) acc += m->smoother_trace(lambda_);
                return acc / static_cast<double>(omembers_.size());
            }
            case SketchMode::Unsketched:
                return ridge_->smoother_trace(lambda_);
        }
        return 0.0;
    }

    /// Hutchinson estimate of (1/n) tr[L^ens] with Rademacher probes.
    double smoother_trace_hutchinson(std::uint64_t seed, int probes = 1) const {
        detail::require(probes >= 1, "hutchinson needs at least one probe");
        detail::require(mode_ == SketchMode::FeatureSketch,
                        "hutchinson trace implemented for feature-sketched models");
        double acc = 0.0;
        for (std::size_t k = 0; k < fmembers_.size(); ++k)
            acc += fmembers_[k]->hutchinson_trace(
                lambda_, derive_seed(seed, static_cast<std::uint64_t>(k)), probes);
        return acc / static_cast<double>(fmembers_.size());
    }

    /// Diagonal of one member's smoother (feature mode; used by the LOO shortcut).
    Vector member_smoother_diag(int k) const {
        detail::require(mode_ == SketchMode::FeatureSketch,
                        "member smoother diagonals are defined for feature sketching");
        return fmembers_.at(static_cast<std::size_t>(k))->smoother_diag(lambda_);
    }

    nlohmann::json summary() const {
        nlohmann::json members_json = nlohmann::json::array();
        if (mode_ == SketchMode::FeatureSketch)
            for (const auto& m : fmembers_) {
                auto d = m->sketch().descriptor();
                d["coef_norm"] = m->coefficients(lambda_).norm();
                members_json.push_back(d);
            }
        else if (mode_ == SketchMode::ObservationSketch)
            for (const auto& m : omembers_) {
                auto d = m->sketch().descriptor();
                d["coef_norm"] = m->coefficients(lambda_).norm();
                members_json.push_back(d);
            }
        return {{"mode", to_string(mode_)},
                {"lambda", lambda_},
                {"K", members()},
                {"p", p_},
                {"n_train", n_},
                {"members", members_json},
                {"aggregated_coef_norm", aggregated_beta().norm()}};
    }

private:
    EnsembleModel() = default;

    SketchMode mode_ = SketchMode::Unsketched;
    double lambda_ = 0.0;
    Index p_ = 0;
    Index n_ = 0;
    std::vector<std::shared_ptr<const FeatureMember>> fmembers_;
    std::vector<std::shared_ptr<const ObservationMember>> omembers_;
    std::shared_ptr<const RidgeFactor> ridge_;
};

namespace detail {

inline Vector solve_regularized(const Matrix& gram, const Vector& rhs, const FitConfig& cfg) {
    cfg.validate();
    const double lambda = cfg.lambda;
    if (cfg.solver == SolverKind::ConjugateGradient) {
        Vector x;
        const double res = cg_solve(
            [&](const Vector& v) { return (gram * v + lambda * v).eval(); }, rhs, x,
            cfg.cg_tol, cfg.cg_max_iter);
        if (res > cfg.cg_tol)
            throw cg_error("conjugate gradients did not reach the requested residual", res,
                           cfg.cg_max_iter);
        return x;
    }
    if (lambda > 0.0) {
        Matrix sys = gram;
        sys.diagonal().array() += lambda;
        Eigen::LLT<Matrix> llt(sys);
        if (llt.info() == Eigen::Success) return llt.solve(rhs);
    }
    // lambda <= 0 (or an indefinite corner): symmetric eigendecomposition.
    SymSpectrum s = sym_eig(gram);
    MemberCore core;
    core.evals = s.evals;
    core.proj = s.evecs.transpose() * rhs;
    core.finalize();
    return s.evecs * core.filtered(lambda);
}

}  // namespace detail

/// Single sketched-member fit: solves ((1/n) S^T X^T X S + lambda I_q) b =
/// (1/n) S^T X^T y. Returns the sketch-space coefficients.
inline Vector fit_sketched_member(const Eigen::Ref<const Matrix>& x,
                                  const Eigen::Ref<const Vector>& y,
                                  const SketchOperator& s, const FitConfig& cfg) {
    detail::require(x.cols() == s.p(), "fit_sketched_member: X columns != sketch p");
    detail::require(y.size() == x.rows(), "fit_sketched_member: y length != n");
    const double n = static_cast<double>(x.rows());
    Matrix xs = s.apply_right(x);
    Matrix gram = xs.transpose() * xs / n;
    Vector rhs = xs.transpose() * y / n;
    return detail::solve_regularized(gram, rhs, cfg);
}

/// Observation-sketched fit per the closed form
/// (1/n)((1/n) X^T T T^T X + lambda I_p)^{-1} X^T T T^T y; uses the dual
/// m x m system when p > m.
inline Vector fit_observation_sketched_member(const Eigen::Ref<const Matrix>& x,
                                              const Eigen::Ref<const Vector>& y,
                                              const SketchOperator& t,
                                              const FitConfig& cfg) {
    detail::require(x.rows() == t.p(), "fit_observation_sketched_member: X rows != sketch n");
    const double n = static_cast<double>(x.rows());
    Matrix mt = t.apply_right(x.transpose()).transpose();  // T^T X
    Vector u = t.apply_transpose(y);
    if (x.cols() > t.q()) {
        Matrix gram = mt * mt.transpose() / n;
        Vector c = detail::solve_regularized(gram, u, cfg);
        return mt.transpose() * c / n;
    }
    Matrix gram = mt.transpose() * mt / n;
    Vector rhs = mt.transpose() * u / n;
    return detail::solve_regularized(gram, rhs, cfg);
}

/// Unsketched ridge fit at level mu; min-norm at mu = 0 on rank-deficient
/// systems; dual n x n solve when p > n.
inline Vector fit_ridge(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& y,
                        double mu, const FitConfig& cfg = {}) {
    if (cfg.solver == SolverKind::ConjugateGradient) {
        const double n = static_cast<double>(x.rows());
        FitConfig c = cfg;
        c.lambda = mu;
        if (x.cols() <= x.rows()) {
            Matrix gram = x.transpose() * x / n;
            return detail::solve_regularized(gram, (x.transpose() * y / n).eval(), c);
        }
        Matrix gram = x * x.transpose() / n;
        Vector cvec = detail::solve_regularized(gram, y, c);
        return x.transpose() * cvec / n;
    }
    return RidgeFactor(x, y).coefficients(mu);
}

inline EnsembleModel fit_ensemble(const Eigen::Ref<const Matrix>& x,
                                  const Eigen::Ref<const Vector>& y, SketchKind kind, Index q,
                                  int k, std::uint64_t seed, const FitConfig& cfg) {
    return EnsembleModel::fit_feature(x, y, kind, q, k, seed, cfg);
}

inline Vector predict(const EnsembleModel& model, const Eigen::Ref<const Matrix>& x0) {
    return model.predict(x0);
}

struct Hutchinson {
    std::uint64_t seed = 0;
    int probes = 1;
};

inline double smoother_trace(const EnsembleModel& model) { return model.smoother_trace_exact(); }

inline double smoother_trace(const EnsembleModel& model, const Hutchinson& h) {
    return model.smoother_trace_hutchinson(h.seed, h.probes);
}

}  // namespace freesketch
