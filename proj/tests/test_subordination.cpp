#include <catch2/catch_amalgamated.hpp>

#include "freesketch/rng.hpp"
#include "freesketch/subordination.hpp"

#include <cmath>

using namespace freesketch;

namespace {

Matrix gaussian_design(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) x(i, j) = rng.normal();
    return x;
}

Vector linear_response(const Matrix& x, const Vector& beta0, double noise,
                       std::uint64_t seed) {
    Rng rng(seed);
    Vector y = x * beta0;
    for (Index i = 0; i < y.size(); ++i) y[i] += noise * rng.normal();
    return y;
}

Vector dense_beta(Index p, std::uint64_t seed) {
    Rng rng(seed);
    Vector b(p);
    const double s = 1.0 / std::sqrt(static_cast<double>(p));
    for (Index j = 0; j < p; ++j) b[j] = s * rng.normal();
    return b;
}

}  // namespace

TEST_CASE("identity sketch gives mu = lambda") {
    Matrix x = gaussian_design(30, 20, 1);
    for (double lambda : {0.01, 0.5, 4.0}) {
        auto sol = solve_mu(x, SketchKind::Identity, 1.0, lambda);
        REQUIRE(sol.mu == lambda);
        REQUIRE(solve_lambda_from_mu(sigma_hat_spectrum(x), SketchKind::Identity, 1.0,
                                     lambda) == lambda);
    }
}

TEST_CASE("mu solves the fixed point to the stated residual") {
    Matrix x = gaussian_design(80, 100, 3);
    Spectrum spec = sigma_hat_spectrum(x);
    for (auto kind : {SketchKind::Gaussian, SketchKind::Orthogonal}) {
        for (double lambda : {0.05, 0.3, 2.0, 25.0}) {
            auto sol = solve_mu(spec, kind, 0.85, lambda);
            const double res =
                sol.mu - lambda * s_transform(kind, 0.85, sol.trace_arg);
            REQUIRE(std::abs(res) <= 1e-10 * std::max(1.0, lambda));
            REQUIRE(sol.mu > 0.0);
        }
    }
}

TEST_CASE("mu is nondecreasing in lambda") {
    Matrix x = gaussian_design(70, 100, 5);
    Spectrum spec = sigma_hat_spectrum(x);
    for (auto kind : {SketchKind::Gaussian, SketchKind::Orthogonal}) {
        double prev = -1.0;
        for (double lambda : {0.01, 0.05, 0.2, 1.0, 5.0, 50.0}) {
            const double mu = solve_mu(spec, kind, 0.8, lambda).mu;
            REQUIRE(mu >= prev);
            prev = mu;
        }
    }
}

TEST_CASE("dmu/dlambda matches finite differences of the solver") {
    Matrix x = gaussian_design(60, 90, 7);
    Spectrum spec = sigma_hat_spectrum(x);
    const double lambda = 0.4, h = 1e-5;
    for (auto kind : {SketchKind::Gaussian, SketchKind::SRDCT}) {
        auto sol = solve_mu(spec, kind, 0.8, lambda);
        const double fd = (solve_mu(spec, kind, 0.8, lambda + h).mu -
                           solve_mu(spec, kind, 0.8, lambda - h).mu) /
                          (2.0 * h);
        REQUIRE(sol.dmu_dlambda == Catch::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("lambda-from-mu round trips") {
    Matrix x = gaussian_design(90, 70, 9);
    Spectrum spec = sigma_hat_spectrum(x);
    for (auto kind : {SketchKind::Gaussian, SketchKind::Orthogonal}) {
        for (double lambda : {0.02, 0.3, 3.0}) {
            const double mu = solve_mu(spec, kind, 0.75, lambda).mu;
            const double back = solve_lambda_from_mu(spec, kind, 0.75, mu);
            REQUIRE(back == Catch::Approx(lambda).epsilon(1e-8));
        }
    }
}

TEST_CASE("lambda-from-mu rejects mu below the attainable range") {
    // Full-rank tall design: w(0) = -1, so small mu is outside (-alpha, 0].
    Matrix x = gaussian_design(120, 40, 11);
    Spectrum spec = sigma_hat_spectrum(x);
    REQUIRE_THROWS_AS(solve_lambda_from_mu(spec, SketchKind::Gaussian, 0.6, 1e-8),
                      subordination_error);
}

TEST_CASE("ridgeless solve at lambda = 0 inverts alpha_for_mu") {
    Matrix x = gaussian_design(150, 60, 13);
    Spectrum spec = sigma_hat_spectrum(x);
    auto sol = solve_mu(spec, SketchKind::Gaussian, 0.5, 0.0);
    REQUIRE(sol.mu > 0.0);
    REQUIRE(alpha_for_mu(spec, sol.mu) == Catch::Approx(0.5).epsilon(1e-8));

    // Sketch above the data rank at lambda = 0: mu = 0.
    Matrix wide = gaussian_design(40, 80, 14);  // rank 40, p = 80
    auto sol0 = solve_mu(sigma_hat_spectrum(wide), SketchKind::Gaussian, 0.9, 0.0);
    REQUIRE(sol0.mu == 0.0);
}

TEST_CASE("alpha_for_mu basics") {
    // Sigma_hat = I (X = sqrt(n) I): alpha(1) = 1/2.
    const Index n = 12;
    Matrix x = std::sqrt(static_cast<double>(n)) * Matrix::Identity(n, n);
    Spectrum spec = sigma_hat_spectrum(x);
    REQUIRE(alpha_for_mu(spec, 1.0) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(alpha_for_mu(spec, 1e9) < 1e-8);
    REQUIRE(alpha_for_mu(spec, 0.5) > alpha_for_mu(spec, 1.0));
    REQUIRE_THROWS_AS(alpha_for_mu(spec, 0.0), std::invalid_argument);
}

TEST_CASE("empirical mu equals lambda for the identity sketch") {
    Matrix x = gaussian_design(40, 25, 15);
    auto s = make_sketch(SketchKind::Identity, 25, 25, 0);
    for (double lambda : {0.05, 0.8}) {
        REQUIRE(empirical_mu(x, s, lambda) == Catch::Approx(lambda).epsilon(1e-9));
    }
}

TEST_CASE("empirical mu agrees with the theoretical curve for gaussian sketches") {
    const Index n = 280, p = 400, q = 312;  // alpha = 0.78
    Matrix x = gaussian_design(n, p, 17);
    auto s = make_sketch(SketchKind::Gaussian, p, q, 18);
    const double lambda = 0.2;
    const double emp = empirical_mu(x, s, lambda);
    const double theo = solve_mu(x, SketchKind::Gaussian,
                                 static_cast<double>(q) / static_cast<double>(p), lambda).mu;
    REQUIRE(std::abs(emp - theo) < 0.02);
}

TEST_CASE("ensemble trick algebra") {
    REQUIRE(ensemble_trick(3.0, 3.0) == 3.0);
    // R1 = b + v, R2 = b + v/2 -> b.
    const double b = 1.7, v = 0.6;
    REQUIRE(ensemble_trick(b + v, b + 0.5 * v) == Catch::Approx(b).epsilon(1e-12));
}

TEST_CASE("identity sketch has zero inflation factors") {
    Matrix x = gaussian_design(30, 20, 21);
    Vector y = linear_response(x, dense_beta(20, 22), 0.5, 23);
    Matrix sigma = Matrix::Identity(20, 20);
    auto infl = inflation_factors(x, &sigma, y, SketchKind::Identity, 1.0, 0.5);
    REQUIRE(infl.mu_prime == 0.0);
    REQUIRE(infl.mu_dprime == 0.0);
    REQUIRE(infl.delta > 0.0);

    Vector zero = Vector::Zero(30);
    auto infl0 = inflation_factors(x, &sigma, zero, SketchKind::Identity, 1.0, 0.5);
    REQUIRE(infl0.delta == 0.0);
}

TEST_CASE("inflation factors are nonnegative across kinds") {
    Matrix x = gaussian_design(50, 70, 25);
    Vector y = linear_response(x, dense_beta(70, 26), 1.0, 27);
    Matrix sigma = Matrix::Identity(70, 70);
    for (auto kind : {SketchKind::Gaussian, SketchKind::Orthogonal, SketchKind::SRDCT,
                      SketchKind::CountSketch}) {
        auto infl = inflation_factors(x, &sigma, y, kind, 0.8, 0.3);
        REQUIRE(infl.mu_prime >= 0.0);
        REQUIRE(infl.mu_dprime >= 0.0);
        REQUIRE(infl.delta >= 0.0);
    }
}

TEST_CASE("mu' and mu'' nearly coincide at desk scale (GCV consistency)") {
    // n = 500, p = 600, Sigma = I, Gaussian sketch at alpha = 0.735.
    const Index n = 500, p = 600;
    Matrix x = gaussian_design(n, p, 31);
    Vector y = linear_response(x, dense_beta(p, 32), 1.0, 33);
    Matrix sigma = Matrix::Identity(p, p);
    auto infl = inflation_factors(x, &sigma, y, SketchKind::Gaussian, 0.735, 0.2);
    REQUIRE(std::abs(infl.mu_prime - infl.mu_dprime) <
            0.05 * std::max(infl.mu_prime, 1e-6));
}

TEST_CASE("risk decomposition prediction matches measured feature-sketch risk") {
    // The 1/K variance term with the mu'' inflation should predict the gap
    // between the ensemble GCV and the equivalent ridge GCV. gamma = p/n = 2
    // so a wrong trace prefactor (1/p vs 1/n) would miss by 2x.
    const Index n = 240, p = 480, q = 336;  // alpha = 0.7
    const double lambda = 0.3;
    const int trials = 6;
    double measured = 0.0, predicted = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto seed = static_cast<std::uint64_t>(100 + t);
        Matrix x = gaussian_design(n, p, seed);
        Vector beta0 = dense_beta(p, seed + 50);
        Vector y = linear_response(x, beta0, 1.0, seed + 99);

        FitConfig cfg;
        cfg.lambda = lambda;
        auto model = EnsembleModel::fit_feature(x, y, SketchKind::Gaussian, q, 1,
                                                seed + 7, cfg);
        const double r1 = gcv_squared_risk(model, x, y).value;

        auto sol = solve_mu(x, SketchKind::Gaussian, 0.7, lambda);
        RidgeFactor ridge(x, y);
        const double r_ridge = ridge.gcv(sol.mu, y);

        auto infl = inflation_factors(x, nullptr, y, SketchKind::Gaussian, 0.7, lambda);
        measured += r1 - r_ridge;
        predicted += infl.mu_dprime * infl.delta;
    }
    measured /= trials;
    predicted /= trials;
    REQUIRE(std::abs(measured - predicted) < 0.25 * std::abs(predicted));
}

TEST_CASE("observation decomposition prediction validates the nu'' prefactor") {
    const Index n = 240, p = 480, m = 168;  // eta = 0.7
    const double lambda = 0.3;
    const int trials = 6;
    double measured = 0.0, predicted = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto seed = static_cast<std::uint64_t>(300 + t);
        Matrix x = gaussian_design(n, p, seed);
        Vector beta0 = dense_beta(p, seed + 50);
        Vector y = linear_response(x, beta0, 1.0, seed + 99);

        FitConfig cfg;
        cfg.lambda = lambda;
        auto model = EnsembleModel::fit_observation(x, y, SketchKind::Gaussian, m, 1,
                                                    seed + 7, cfg);
        const double r1 = gcv_squared_risk(model, x, y).value;

        auto sol = solve_nu(x, SketchKind::Gaussian, 0.7, lambda);
        const double r_ridge = RidgeFactor(x, y).gcv(sol.mu, y);

        auto infl = observation_inflation(x, nullptr, y, SketchKind::Gaussian, 0.7, lambda);
        measured += r1 - r_ridge;
        predicted += infl.mu_dprime * infl.delta;
    }
    measured /= trials;
    predicted /= trials;
    REQUIRE(std::abs(measured - predicted) < 0.25 * std::abs(predicted));
}

TEST_CASE("solve_nu basics: identity, monotonicity, empirical cross-check") {
    const Index n = 200, p = 260;
    Matrix x = gaussian_design(n, p, 41);

    auto idsol = solve_nu(x, SketchKind::Identity, 1.0, 0.7);
    REQUIRE(idsol.mu == 0.7);
    REQUIRE(idsol.mode == SubordinationMode::Observation);

    double prev = -1.0;
    for (double lambda : {0.05, 0.2, 1.0, 5.0}) {
        const double nu = solve_nu(x, SketchKind::Gaussian, 0.7, lambda).mu;
        REQUIRE(nu >= prev);
        prev = nu;
    }

    // Observation analogue of the empirical trace-matching root.
    const Index m = 140;
    auto t_op = make_sketch(SketchKind::Gaussian, n, m, 42);
    Matrix mt = t_op.apply_right(x.transpose()).transpose();  // T^T X
    Vector sketched = sym_eigenvalues(mt * mt.transpose() / static_cast<double>(n));
    Vector ambient = dual_gram_eigenvalues(x);
    const double emp = empirical_mu_from_spectra(ambient, sketched, 0.3, n);
    const double theo = solve_nu(x, SketchKind::Gaussian,
                                 static_cast<double>(m) / static_cast<double>(n), 0.3).mu;
    REQUIRE(std::abs(emp - theo) < 0.02);
}

TEST_CASE("observation inflation: identity is zero, gaussian has a real gap") {
    const Index n = 150, p = 200;
    Matrix x = gaussian_design(n, p, 51);
    Vector y = linear_response(x, dense_beta(p, 52), 1.0, 53);

    auto id = observation_inflation(x, nullptr, y, SketchKind::Identity, 1.0, 0.4);
    REQUIRE(id.mu_dprime == 0.0);

    // nu' != nu'' for observation sketching (Sigma = I).
    Matrix sigma = Matrix::Identity(p, p);
    auto infl = observation_inflation(x, &sigma, y, SketchKind::Gaussian, 0.7, 0.4);
    REQUIRE(infl.mu_prime >= 0.0);
    REQUIRE(infl.mu_dprime >= 0.0);
    const double gap = std::abs(infl.mu_prime - infl.mu_dprime);
    REQUIRE(gap > 0.1 * std::max(infl.mu_prime, infl.mu_dprime));
}

TEST_CASE("mismatch identity: scalar algebra and the asymptotic form") {
    // Exact scalar identity behind the correction's step 5:
    // 1/(1-t) - 1 - t/(1-t)^2 == -(t/(1-t))^2.
    for (double t : {0.1, 0.35, 0.6, 0.89}) {
        const double lhs = 1.0 / (1.0 - t) - 1.0 - t / ((1.0 - t) * (1.0 - t));
        const double rhs = -(t / (1.0 - t)) * (t / (1.0 - t));
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
    }

    // Asymptotic form at desk scale, Sigma = I: the corrected trace
    // C1 - (s/(1-s))^2 approximates the direct population-side trace.
    const Index n = 300, p = 400;
    Matrix x = gaussian_design(n, p, 61);
    const double nu = solve_nu(x, SketchKind::Gaussian, 0.7, 0.3).mu;
    Vector w = dual_gram_eigenvalues(x);
    double s_tr = 0.0, tr_pop = 0.0, tr_emp = 0.0;
    for (Index j = 0; j < n; ++j) {
        const double d = w[j] + nu;
        s_tr += w[j] / d;
        tr_pop += w[j] / (d * d);
        tr_emp += w[j] * w[j] / (d * d);
    }
    s_tr /= static_cast<double>(n);
    tr_pop /= static_cast<double>(n);
    tr_emp /= static_cast<double>(n);
    const double c1 = tr_emp / ((1.0 - s_tr) * (1.0 - s_tr));
    const double ratio = s_tr / (1.0 - s_tr);
    const double c1_prime_recipe = c1 - ratio * ratio;
    REQUIRE(std::abs(c1_prime_recipe - tr_pop) < 0.1 * tr_pop);
}

TEST_CASE("corrected observation GCV with identity sketches returns ridge GCV") {
    const Index n = 60, p = 40;
    Matrix x = gaussian_design(n, p, 71);
    Vector y = linear_response(x, dense_beta(p, 72), 0.8, 73);
    std::vector<SketchOperator> ts = {make_sketch(SketchKind::Identity, n, n, 0),
                                      make_sketch(SketchKind::Identity, n, n, 1)};
    const double lambda = 0.5;
    auto report = corrected_observation_gcv(x, y, ts, lambda);
    const double ridge_gcv = RidgeFactor(x, y).gcv(lambda, y);
    REQUIRE(report.value == Catch::Approx(ridge_gcv).epsilon(1e-8));
}

TEST_CASE("corrected observation GCV recovers the closed-form inflation lead") {
    const Index n = 300, p = 400, m = 210;  // eta = 0.7
    const double lambda = 0.3;
    Matrix x = gaussian_design(n, p, 81);
    Vector y = linear_response(x, dense_beta(p, 82), 1.0, 83);
    std::vector<SketchOperator> ts;
    for (int k = 0; k < 8; ++k)
        ts.push_back(make_sketch(SketchKind::Gaussian, n, m, derive_seed(84, k)));
    auto report = corrected_observation_gcv(x, y, ts, lambda);

    auto sol = solve_nu(x, SketchKind::Gaussian, 0.7, lambda);
    const double lead_direct = -sol.dmu_dlambda * lambda * lambda *
                               s_transform_derivative(SketchKind::Gaussian, 0.7,
                                                      sol.trace_arg);
    const double c2 = report.meta.at("C2").get<double>();
    REQUIRE(std::abs(c2 - lead_direct) < 0.05 * lead_direct);
}

TEST_CASE("subordination solver errors below lambda_0") {
    Matrix x = gaussian_design(50, 60, 91);
    auto s = make_sketch(SketchKind::Gaussian, 60, 45, 92);
    Matrix xs = s.apply_right(x);
    Vector evals = sym_eigenvalues(xs.transpose() * xs / 50.0);
    const double lambda0 = lambda0_estimate(x, {s});
    REQUIRE(lambda0 < 0.0);
    REQUIRE_THROWS_AS(empirical_mu(x, s, 2.0 * lambda0), subordination_error);
}
