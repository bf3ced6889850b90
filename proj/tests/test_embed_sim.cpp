#include "stegpool/embed_sim.hpp"

#include "oracle.hpp"
#include "stegpool/errors.hpp"
#include "stegpool/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace stegpool;

namespace {

ImageModel random_image(std::uint64_t seed, int n) {
    CoverParams params;
    params.n_coeffs = n;
    return gen_image(seed, 0, params);
}

ImageModel tiny_image(const std::vector<double>& costs, const std::vector<double>& variances) {
    ImageModel img;
    img.id = 0;
    img.n_coeffs = static_cast<int>(costs.size());
    img.costs.assign(costs.begin(), costs.end());
    img.variances.assign(variances.begin(), variances.end());
    return img;
}

constexpr double kLog2Of3 = 1.5849625007211562;

}  // namespace

TEST_CASE("change_rate basics") {
    CHECK(change_rate(0.0, 123.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(change_rate(0.0, 0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const double expected = std::exp(-1.0) / (1.0 + 2.0 * std::exp(-1.0));
    CHECK(change_rate(1.0, 1.0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(change_rate(1.0, 1.0) == doctest::Approx(0.21194).epsilon(1e-4));

    // monotone to zero for growing lambda
    double prev = change_rate(0.0, 1.0);
    for (double lambda : {0.5, 1.0, 2.0, 8.0, 32.0, 128.0, 1024.0}) {
        const double beta = change_rate(lambda, 1.0);
        CHECK(beta < prev);
        prev = beta;
    }
    CHECK(prev < 1e-300);

    CHECK_THROWS_AS(change_rate(-1.0, 1.0), ParamError);
    CHECK_THROWS_AS(change_rate(1.0, -1.0), ParamError);
}

TEST_CASE("ternary_entropy values") {
    CHECK(ternary_entropy(0.0) == 0.0);
    CHECK(ternary_entropy(1.0 / 3.0) == doctest::Approx(kLog2Of3).epsilon(1e-15));
    CHECK(ternary_entropy(0.1) == doctest::Approx(0.9219280948873623).epsilon(1e-15));
    CHECK_THROWS_AS(ternary_entropy(-0.01), ParamError);
    CHECK_THROWS_AS(ternary_entropy(0.34), ParamError);
}

TEST_CASE("evaluate on single-coefficient images") {
    const ImageModel img = tiny_image({1.0}, {1.0});

    // lambda -> 0 limit: uniform ternary
    const EmbedSolution sat = evaluate(img, 1e-12);
    CHECK(sat.payload_bits == doctest::Approx(kLog2Of3).epsilon(1e-9));
    CHECK(sat.distortion == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(sat.deflection == doctest::Approx(2.0 / 9.0).epsilon(1e-9));

    // beta = 0.1 at lambda = ln 8
    const EmbedSolution sol = evaluate(img, std::log(8.0));
    CHECK(sol.change_rates[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(sol.deflection == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("evaluate matches the scalar oracle and equal-cost scaling") {
    ImageModel img = tiny_image(std::vector<double>(16, 1.0), std::vector<double>(16, 1.0));
    const double lambda = 0.7;
    const EmbedSolution sol = evaluate(img, lambda);
    const double beta = change_rate(lambda, 1.0);
    CHECK(sol.payload_bits == doctest::Approx(16.0 * ternary_entropy(beta)).epsilon(1e-12));
    CHECK(sol.distortion == doctest::Approx(16.0 * 2.0 * beta).epsilon(1e-12));

    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const ImageModel rnd = random_image(seed, 32);
        for (double lam : {1e-6, 0.01, 0.3, 2.0, 50.0}) {
            const EmbedSolution s = evaluate(rnd, lam);
            const oracle::Functionals f = oracle::functionals(rnd, lam);
            CHECK(s.payload_bits == doctest::Approx(f.payload).epsilon(1e-12));
            CHECK(s.distortion == doctest::Approx(f.distortion).epsilon(1e-12));
            CHECK(s.deflection == doctest::Approx(f.deflection).epsilon(1e-12));
        }
    }
}

TEST_CASE("functionals are strictly decreasing in lambda") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const ImageModel img = random_image(1000 + static_cast<std::uint64_t>(trial), 24);
        for (int k = 0; k < 10; ++k) {
            const double l1 = std::exp(-6.0 + 10.0 * rng.uniform01());
            const double l2 = l1 * (1.0 + 0.5 * rng.uniform01());
            const EmbedSolution a = evaluate(img, l1);
            const EmbedSolution b = evaluate(img, l2);
            CHECK(a.payload_bits > b.payload_bits);
            CHECK(a.distortion > b.distortion);
            CHECK(a.deflection > b.deflection);
        }
    }
}

TEST_CASE("solve_lambda hits the requested value for all three targets") {
    const ImageModel img = random_image(17, 32);
    for (SolveTarget target :
         {SolveTarget::Payload, SolveTarget::Distortion, SolveTarget::Deflection}) {
        const double sup = functional_sup(img, target);
        for (double frac : {0.9, 0.5, 0.1, 0.01, 1e-4}) {
            const double value = frac * sup;
            const EmbedSolution sol = solve_lambda(img, target, value);
            const double got = target == SolveTarget::Payload    ? sol.payload_bits
                               : target == SolveTarget::Distortion ? sol.distortion
                                                                   : sol.deflection;
            CHECK(got == doctest::Approx(value).epsilon(1e-9));
        }
    }
}

TEST_CASE("solve_lambda saturation and zero edge cases") {
    const ImageModel img = random_image(21, 16);

    const EmbedSolution zero = solve_lambda(img, SolveTarget::Payload, 0.0);
    CHECK(zero.payload_bits <= 1e-12);

    const double sup = functional_sup(img, SolveTarget::Payload);
    const EmbedSolution full = solve_lambda(img, SolveTarget::Payload, sup);
    CHECK(full.lambda == doctest::Approx(1e-12));
    for (double beta : full.change_rates) CHECK(beta == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    CHECK_THROWS_AS(solve_lambda(img, SolveTarget::Payload, sup * 1.001), InfeasibleError);
    CHECK_THROWS_AS(solve_lambda(img, SolveTarget::Payload, -1.0), ParamError);
}

TEST_CASE("solve_lambda agrees with an exhaustive log-grid oracle") {
    const ImageModel img = random_image(5, 16);
    const double value = 8.0;  // bits
    const EmbedSolution sol = solve_lambda(img, SolveTarget::Payload, value);
    CHECK(std::abs(sol.payload_bits - value) < 1e-8);

    const oracle::GridSolution grid =
        oracle::grid_solve(img, SolveTarget::Payload, value, 1'000'000, 1e-10, 1e8);
    CHECK(sol.lambda == doctest::Approx(grid.lambda).epsilon(1e-4));
}

TEST_CASE("solve_lambda result is self-consistent under evaluate") {
    const ImageModel img = random_image(33, 24);
    const EmbedSolution sol = solve_lambda(img, SolveTarget::Distortion, 3.0);
    const EmbedSolution re = evaluate(img, sol.lambda);
    CHECK(re.payload_bits == sol.payload_bits);
    CHECK(re.distortion == sol.distortion);
    CHECK(re.deflection == sol.deflection);
    CHECK(re.change_rates == sol.change_rates);
}

TEST_CASE("EmbedProblem warm start reproduces the cold solution") {
    const ImageModel img = random_image(55, 64);
    EmbedProblem prob(img.costs, img.variances);
    const double value = 0.4 * prob.sup(SolveTarget::Deflection);
    const double cold = prob.solve(SolveTarget::Deflection, value);
    const double warm = prob.solve(SolveTarget::Deflection, value, cold * 1.7);
    CHECK(prob.eval(SolveTarget::Deflection, warm) == doctest::Approx(value).epsilon(1e-9));
    CHECK(warm == doctest::Approx(cold).epsilon(1e-6));
}
