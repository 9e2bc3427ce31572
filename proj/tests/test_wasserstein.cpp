#include <catch2/catch_amalgamated.hpp>

#include "freesketch/rng.hpp"
#include "freesketch/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace freesketch;

namespace {

using Cloud = std::vector<std::pair<double, double>>;

// Quantile-coupling oracle for 1-D empirical W2 with arbitrary sizes:
// W2^2 = integral over t in (0,1) of (F_A^{-1}(t) - F_B^{-1}(t))^2.
double w2_1d_quantile(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double t = 0.0, acc = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double ta = static_cast<double>(i + 1) / na;
        const double tb = static_cast<double>(j + 1) / nb;
        const double tn = std::min(ta, tb);
        const double d = a[i] - b[j];
        acc += d * d * (tn - t);
        t = tn;
        if (ta <= tn + 1e-15) ++i;
        if (tb <= tn + 1e-15) ++j;
    }
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("identical clouds have zero distance") {
    Cloud a = {{0.0, 1.0}, {2.0, -1.0}, {0.5, 0.5}};
    REQUIRE(wasserstein2_joint(a, a) < 1e-12);
}

TEST_CASE("single-atom distance is the Euclidean distance") {
    Cloud a = {{0.0, 0.0}};
    Cloud b = {{3.0, 4.0}};
    REQUIRE(wasserstein2_joint(a, b) == Catch::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("equal-size 1-D case matches the sorted-quantile formula") {
    Rng rng(11);
    const int n = 40;
    Cloud a, b;
    std::vector<double> av, bv;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(), y = 2.0 + 0.5 * rng.normal();
        a.emplace_back(x, 0.0);
        b.emplace_back(y, 0.0);
        av.push_back(x);
        bv.push_back(y);
    }
    const double got = wasserstein2_joint(a, b);
    std::sort(av.begin(), av.end());
    std::sort(bv.begin(), bv.end());
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (av[static_cast<std::size_t>(i)] - bv[static_cast<std::size_t>(i)]) *
                                       (av[static_cast<std::size_t>(i)] - bv[static_cast<std::size_t>(i)]);
    REQUIRE(got == Catch::Approx(std::sqrt(acc / n)).epsilon(1e-10));
}

TEST_CASE("unequal sizes match the quantile-coupling oracle in 1-D") {
    Rng rng(13);
    Cloud a, b;
    std::vector<double> av, bv;
    for (int i = 0; i < 17; ++i) {
        const double x = rng.normal();
        a.emplace_back(x, 0.0);
        av.push_back(x);
    }
    for (int j = 0; j < 29; ++j) {
        const double y = 1.0 + rng.normal();
        b.emplace_back(y, 0.0);
        bv.push_back(y);
    }
    const double got = wasserstein2_joint(a, b);
    const double want = w2_1d_quantile(av, bv);
    REQUIRE(got == Catch::Approx(want).epsilon(1e-9));
}

TEST_CASE("distance is symmetric and respects the size guard") {
    Rng rng(17);
    Cloud a, b;
    for (int i = 0; i < 12; ++i) a.emplace_back(rng.normal(), rng.normal());
    for (int j = 0; j < 8; ++j) b.emplace_back(rng.normal(), rng.normal());
    REQUIRE(wasserstein2_joint(a, b) == Catch::Approx(wasserstein2_joint(b, a)).epsilon(1e-10));

    Cloud big_a(3000), big_b(3000);
    REQUIRE_THROWS_AS(wasserstein2_joint(big_a, big_b), std::length_error);
    REQUIRE_THROWS_AS(wasserstein2_joint(Cloud{}, a), std::invalid_argument);
}

TEST_CASE("transport beats any greedy coupling") {
    // Optimality sanity: the exact value is no larger than the diagonal
    // (index-matched) coupling on shuffled equal clouds.
    Rng rng(19);
    const int n = 25;
    Cloud a, b;
    for (int i = 0; i < n; ++i) {
        a.emplace_back(rng.normal(), rng.normal());
        b.emplace_back(rng.normal(), rng.normal());
    }
    double diag_cost = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = a[static_cast<std::size_t>(i)].first - b[static_cast<std::size_t>(i)].first;
        const double dy = a[static_cast<std::size_t>(i)].second - b[static_cast<std::size_t>(i)].second;
        diag_cost += dx * dx + dy * dy;
    }
    const double diag = std::sqrt(diag_cost / n);
    REQUIRE(wasserstein2_joint(a, b) <= diag + 1e-12);
}
