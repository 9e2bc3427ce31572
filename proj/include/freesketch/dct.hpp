#pragma once

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace freesketch::detail {

/// Cache of FFTW r2r plans keyed by (length, transform kind). Plan creation
/// is serialized (FFTW planning is not thread safe); execution through the
/// new-array interface is reentrant. Plans are created with FFTW_UNALIGNED
/// so they can run on arbitrary caller buffers.
class DctPlans {
public:
    static DctPlans& instance() {
        static DctPlans plans;
        return plans;
    }

    fftw_plan get(int n, fftw_r2r_kind kind) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_pair(n, static_cast<int>(kind));
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<double> in(static_cast<std::size_t>(n));
        std::vector<double> out(static_cast<std::size_t>(n));
        fftw_plan plan = fftw_plan_r2r_1d(n, in.data(), out.data(), kind,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

    ~DctPlans() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    DctPlans(const DctPlans&) = delete;
    DctPlans& operator=(const DctPlans&) = delete;

private:
    DctPlans() = default;
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

/// Orthonormal DCT-II: out_k = s_k * sum_j in_j cos(pi (j + 1/2) k / n),
/// s_0 = sqrt(1/n), s_k = sqrt(2/n). An isometry of R^n. in != out.
inline void dct2_orthonormal(const double* in, double* out, int n) {
    fftw_plan plan = DctPlans::instance().get(n, FFTW_REDFT10);
    fftw_execute_r2r(plan, const_cast<double*>(in), out);
    const double s = 1.0 / std::sqrt(2.0 * n);
    out[0] *= 0.5 / std::sqrt(static_cast<double>(n));
    for (int k = 1; k < n; ++k) out[k] *= s;
}

/// Orthonormal DCT-III (inverse of dct2_orthonormal). Scales the input into
/// a scratch copy, so in may alias caller storage but not out.
inline void dct3_orthonormal(const double* in, double* out, int n,
                             std::vector<double>& scratch) {
    scratch.resize(static_cast<std::size_t>(n));
    const double s = 1.0 / std::sqrt(2.0 * n);
    scratch[0] = in[0] / std::sqrt(static_cast<double>(n));
    for (int k = 1; k < n; ++k) scratch[k] = in[k] * s;
    fftw_plan plan = DctPlans::instance().get(n, FFTW_REDFT01);
    fftw_execute_r2r(plan, scratch.data(), out);
}

}  // namespace freesketch::detail
