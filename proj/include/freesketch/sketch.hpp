#pragma once

#include "freesketch/common.hpp"
#include "freesketch/dct.hpp"
#include "freesketch/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace freesketch {

enum class SketchKind { Gaussian, Orthogonal, CountSketch, SRDCT, Identity };

inline std::string to_string(SketchKind kind) {
    switch (kind) {
        case SketchKind::Gaussian: return "Gaussian";
        case SketchKind::Orthogonal: return "Orthogonal";
        case SketchKind::CountSketch: return "CountSketch";
        case SketchKind::SRDCT: return "SRDCT";
        case SketchKind::Identity: return "Identity";
    }
    return "Unknown";
}

inline SketchKind sketch_kind_from_string(const std::string& name) {
    if (name == "Gaussian") return SketchKind::Gaussian;
    if (name == "Orthogonal") return SketchKind::Orthogonal;
    if (name == "CountSketch") return SketchKind::CountSketch;
    if (name == "SRDCT") return SketchKind::SRDCT;
    if (name == "Identity") return SketchKind::Identity;
    throw std::invalid_argument("unknown sketch kind: " + name);
}

/// A p x q sketching operator normalized so that S S^T ~ I_p, with a
/// structured representation giving fast application:
///   Gaussian    dense, entries iid N(0, 1/q)
///   Orthogonal  sqrt(p/q) Q for Q the thin Q-factor of a Gaussian matrix
///   CountSketch one +-1 per row, placed by a uniform hash into [q]
///   SRDCT       sqrt(p/q) x (row subsample of the orthonormal DCT-II
///               applied after random sign flips)
///   Identity    I_p (requires q = p)
/// Operators are immutable after construction and cheap to share across
/// threads; identical (kind, p, q, seed) rebuilds the identical operator.
class SketchOperator {
public:
    static SketchOperator make(SketchKind kind, Index p, Index q, std::uint64_t seed) {
        detail::require(q >= 1, "sketch dimension q must be >= 1");
        detail::require(p >= 1, "ambient dimension p must be >= 1");
        if (kind == SketchKind::Identity)
            detail::require(q == p, "Identity sketch requires q = p");
        if (kind == SketchKind::Orthogonal || kind == SketchKind::SRDCT ||
            kind == SketchKind::CountSketch)
            detail::require(q <= p, to_string(kind) + " sketch requires q <= p");

        SketchOperator s;
        s.kind_ = kind;
        s.p_ = p;
        s.q_ = q;
        s.seed_ = seed;
        Rng rng(seed);
        switch (kind) {
            case SketchKind::Identity:
                break;
            case SketchKind::Gaussian: {
                s.dense_.resize(p, q);
                const double scale = 1.0 / std::sqrt(static_cast<double>(q));
                for (Index j = 0; j < q; ++j)
                    for (Index i = 0; i < p; ++i) s.dense_(i, j) = scale * rng.normal();
                break;
            }
            case SketchKind::Orthogonal: {
                Matrix a(p, q);
                for (Index j = 0; j < q; ++j)
                    for (Index i = 0; i < p; ++i) a(i, j) = rng.normal();
                Eigen::HouseholderQR<Matrix> qr(a);
                s.dense_ = qr.householderQ() * Matrix::Identity(p, q);
                s.dense_ *= std::sqrt(static_cast<double>(p) / static_cast<double>(q));
                break;
            }
            case SketchKind::CountSketch: {
                s.hash_.resize(static_cast<std::size_t>(p));
                s.sign_.resize(static_cast<std::size_t>(p));
                for (Index i = 0; i < p; ++i) {
                    s.hash_[static_cast<std::size_t>(i)] =
                        static_cast<Index>(rng.below(static_cast<std::uint64_t>(q)));
                    s.sign_[static_cast<std::size_t>(i)] = rng.sign();
                }
                break;
            }
            case SketchKind::SRDCT: {
                s.sign_.resize(static_cast<std::size_t>(p));
                for (Index i = 0; i < p; ++i)
                    s.sign_[static_cast<std::size_t>(i)] = rng.sign();
                // Partial Fisher-Yates: q of p rows without replacement.
                std::vector<Index> idx(static_cast<std::size_t>(p));
                std::iota(idx.begin(), idx.end(), Index{0});
                for (Index j = 0; j < q; ++j) {
                    const auto pick = j + static_cast<Index>(rng.below(
                                              static_cast<std::uint64_t>(p - j)));
                    std::swap(idx[static_cast<std::size_t>(j)],
                              idx[static_cast<std::size_t>(pick)]);
                }
                s.rows_.assign(idx.begin(), idx.begin() + q);
                std::sort(s.rows_.begin(), s.rows_.end());
                s.scale_ = std::sqrt(static_cast<double>(p) / static_cast<double>(q));
                break;
            }
        }
        return s;
    }

    SketchKind kind() const { return kind_; }
    Index p() const { return p_; }
    Index q() const { return q_; }
    std::uint64_t seed() const { return seed_; }

    /// X S for X of shape n x p; returns n x q. Cost O(nnz(X)) for
    /// CountSketch, O(n p log p) for SRDCT, O(n p q) dense.
    Matrix apply_right(const Eigen::Ref<const Matrix>& x) const {
        detail::require(x.cols() == p_, "apply_right: X column count must equal sketch p");
        const Index n = x.rows();
        switch (kind_) {
            case SketchKind::Identity:
                return x;
            case SketchKind::Gaussian:
            case SketchKind::Orthogonal:
                return x * dense_;
            case SketchKind::CountSketch: {
                Matrix out = Matrix::Zero(n, q_);
                for (Index i = 0; i < p_; ++i)
                    out.col(hash_[static_cast<std::size_t>(i)]) +=
                        sign_[static_cast<std::size_t>(i)] * x.col(i);
                return out;
            }
            case SketchKind::SRDCT: {
                Matrix out(n, q_);
                std::vector<double> buf_in(static_cast<std::size_t>(p_));
                std::vector<double> buf_out(static_cast<std::size_t>(p_));
                for (Index r = 0; r < n; ++r) {
                    for (Index i = 0; i < p_; ++i)
                        buf_in[static_cast<std::size_t>(i)] =
                            sign_[static_cast<std::size_t>(i)] * x(r, i);
                    detail::dct2_orthonormal(buf_in.data(), buf_out.data(),
                                             static_cast<int>(p_));
                    for (Index j = 0; j < q_; ++j)
                        out(r, j) = scale_ *
                                    buf_out[static_cast<std::size_t>(rows_[static_cast<std::size_t>(j)])];
                }
                return out;
            }
        }
        return {};
    }

    /// S^T M for M of shape p x c; returns q x c.
    Matrix apply_transpose_mat(const Eigen::Ref<const Matrix>& m) const {
        detail::require(m.rows() == p_, "apply_transpose: row count must equal sketch p");
        const Index c = m.cols();
        switch (kind_) {
            case SketchKind::Identity:
                return m;
            case SketchKind::Gaussian:
            case SketchKind::Orthogonal:
                return dense_.transpose() * m;
            case SketchKind::CountSketch: {
                Matrix out = Matrix::Zero(q_, c);
                for (Index i = 0; i < p_; ++i)
                    out.row(hash_[static_cast<std::size_t>(i)]) +=
                        sign_[static_cast<std::size_t>(i)] * m.row(i);
                return out;
            }
            case SketchKind::SRDCT: {
                Matrix out(q_, c);
                std::vector<double> buf_in(static_cast<std::size_t>(p_));
                std::vector<double> buf_out(static_cast<std::size_t>(p_));
                for (Index col = 0; col < c; ++col) {
                    for (Index i = 0; i < p_; ++i)
                        buf_in[static_cast<std::size_t>(i)] =
                            sign_[static_cast<std::size_t>(i)] * m(i, col);
                    detail::dct2_orthonormal(buf_in.data(), buf_out.data(),
                                             static_cast<int>(p_));
                    for (Index j = 0; j < q_; ++j)
                        out(j, col) = scale_ *
                                      buf_out[static_cast<std::size_t>(rows_[static_cast<std::size_t>(j)])];
                }
                return out;
            }
        }
        return {};
    }

    /// S^T x for a p-vector; returns a q-vector.
    Vector apply_transpose(const Eigen::Ref<const Vector>& x) const {
        detail::require(x.size() == p_, "apply_transpose: vector length must equal sketch p");
        return apply_transpose_mat(x);
    }

    /// S Z for Z of shape q x c; returns p x c.
    Matrix apply_left(const Eigen::Ref<const Matrix>& z) const {
        detail::require(z.rows() == q_, "apply_left: row count must equal sketch q");
        const Index c = z.cols();
        switch (kind_) {
            case SketchKind::Identity:
                return z;
            case SketchKind::Gaussian:
            case SketchKind::Orthogonal:
                return dense_ * z;
            case SketchKind::CountSketch: {
                Matrix out(p_, c);
                for (Index i = 0; i < p_; ++i)
                    out.row(i) = sign_[static_cast<std::size_t>(i)] *
                                 z.row(hash_[static_cast<std::size_t>(i)]);
                return out;
            }
            case SketchKind::SRDCT: {
                Matrix out(p_, c);
                std::vector<double> buf_in(static_cast<std::size_t>(p_));
                std::vector<double> buf_out(static_cast<std::size_t>(p_));
                std::vector<double> scratch;
                for (Index col = 0; col < c; ++col) {
                    std::fill(buf_in.begin(), buf_in.end(), 0.0);
                    for (Index j = 0; j < q_; ++j)
                        buf_in[static_cast<std::size_t>(rows_[static_cast<std::size_t>(j)])] =
                            z(j, col);
                    detail::dct3_orthonormal(buf_in.data(), buf_out.data(),
                                             static_cast<int>(p_), scratch);
                    for (Index i = 0; i < p_; ++i)
                        out(i, col) = scale_ * sign_[static_cast<std::size_t>(i)] *
                                      buf_out[static_cast<std::size_t>(i)];
                }
                return out;
            }
        }
        return {};
    }

    /// S S^T M for M of shape p x c (structured, never forms S S^T).
    Matrix apply_gram(const Eigen::Ref<const Matrix>& m) const {
        return apply_left(apply_transpose_mat(m));
    }

    /// Dense p x q matrix consistent with the apply_* operations. Guarded at
    /// 1e8 entries; intended as a test oracle and for small-q workflows.
    Matrix materialize() const {
        if (static_cast<double>(p_) * static_cast<double>(q_) > 1e8)
            throw std::length_error("materialize: p*q exceeds the 1e8-entry guard");
        switch (kind_) {
            case SketchKind::Identity:
                return Matrix::Identity(p_, p_);
            case SketchKind::Gaussian:
            case SketchKind::Orthogonal:
                return dense_;
            case SketchKind::CountSketch: {
                Matrix out = Matrix::Zero(p_, q_);
                for (Index i = 0; i < p_; ++i)
                    out(i, hash_[static_cast<std::size_t>(i)]) =
                        sign_[static_cast<std::size_t>(i)];
                return out;
            }
            case SketchKind::SRDCT:
                return apply_left(Matrix::Identity(q_, q_));
        }
        return {};
    }

    nlohmann::json descriptor() const {
        return {{"kind", to_string(kind_)}, {"p", p_}, {"q", q_}, {"seed", seed_}};
    }

    static SketchOperator from_descriptor(const nlohmann::json& j) {
        return make(sketch_kind_from_string(j.at("kind").get<std::string>()),
                    j.at("p").get<Index>(), j.at("q").get<Index>(),
                    j.at("seed").get<std::uint64_t>());
    }

private:
    SketchOperator() = default;

    SketchKind kind_ = SketchKind::Identity;
    Index p_ = 0;
    Index q_ = 0;
    std::uint64_t seed_ = 0;
    Matrix dense_;               // Gaussian, Orthogonal
    std::vector<Index> hash_;    // CountSketch
    std::vector<double> sign_;   // CountSketch, SRDCT
    std::vector<Index> rows_;    // SRDCT subsample
    double scale_ = 1.0;         // SRDCT sqrt(p/q)
};

/// Shorthand matching the operation vocabulary: X S.
inline Matrix apply_right(const Eigen::Ref<const Matrix>& x, const SketchOperator& s) {
    return s.apply_right(x);
}

inline Vector apply_transpose(const SketchOperator& s, const Eigen::Ref<const Vector>& x) {
    return s.apply_transpose(x);
}

inline SketchOperator make_sketch(SketchKind kind, Index p, Index q, std::uint64_t seed) {
    return SketchOperator::make(kind, p, q, seed);
}

inline Matrix materialize(const SketchOperator& s) { return s.materialize(); }

}  // namespace freesketch
