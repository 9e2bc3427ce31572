#pragma once

#include "freesketch/common.hpp"
#include "freesketch/sketch.hpp"

namespace freesketch {

namespace detail {

inline void check_s_domain(SketchKind kind, double alpha, double w) {
    if (kind == SketchKind::Identity) return;
    require(alpha > 0.0 && alpha <= 1.0, "S-transform: alpha must lie in (0, 1]");
    require(w <= 1e-12, "S-transform: argument must be nonpositive");
    if (w <= -alpha + 1e-14)
        throw subordination_error("S-transform argument at or beyond the pole -alpha");
}

}  // namespace detail

/// Limiting S-transform of S S^T for the normalized sketch families,
/// parameterized by alpha = q/p:
///   iid (Gaussian)        alpha / (alpha + w)
///   Orthogonal, SRDCT     alpha (1 + w) / (alpha + w)
///   Identity              1
/// CountSketch has no known closed form; it empirically matches the iid
/// curve and is mapped onto it here (empirical_mu is the assumption-free
/// alternative).
inline double s_transform(SketchKind kind, double alpha, double w) {
    detail::check_s_domain(kind, alpha, w);
    switch (kind) {
        case SketchKind::Identity:
            return 1.0;
        case SketchKind::Gaussian:
        case SketchKind::CountSketch:
            return alpha / (alpha + w);
        case SketchKind::Orthogonal:
        case SketchKind::SRDCT:
            return alpha * (1.0 + w) / (alpha + w);
    }
    return 1.0;
}

/// d/dw of s_transform.
inline double s_transform_derivative(SketchKind kind, double alpha, double w) {
    detail::check_s_domain(kind, alpha, w);
    const double d = alpha + w;
    switch (kind) {
        case SketchKind::Identity:
            return 0.0;
        case SketchKind::Gaussian:
        case SketchKind::CountSketch:
            return -alpha / (d * d);
        case SketchKind::Orthogonal:
        case SketchKind::SRDCT:
            return alpha * (alpha - 1.0) / (d * d);
    }
    return 0.0;
}

}  // namespace freesketch
