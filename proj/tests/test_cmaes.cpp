#include "finsim/cmaes.hpp"

#include <doctest.h>

#include <cmath>

using namespace finsim;

namespace {

ObjectiveSpec box_spec(int n, double lo, double hi, int budget, std::uint64_t seed = 1) {
    ObjectiveSpec spec;
    spec.dimension = n;
    spec.lower = Eigen::VectorXd::Constant(n, lo);
    spec.upper = Eigen::VectorXd::Constant(n, hi);
    spec.budget = budget;
    spec.seed = seed;
    return spec;
}

double sphere(const Eigen::VectorXd& x) { return x.squaredNorm(); }

double rosenbrock(const Eigen::VectorXd& x) {
    double f = 0.0;
    for (int i = 0; i + 1 < x.size(); ++i) {
        const double a = x(i + 1) - x(i) * x(i);
        const double b = 1.0 - x(i);
        f += 100.0 * a * a + b * b;
    }
    return f;
}

} // namespace

TEST_CASE("cmaes on the sphere reaches 1e-10") {
    ObjectiveSpec spec = box_spec(5, -5.0, 5.0, 5000);
    spec.target_tolerance = 1e-12;
    const FitResult fit = cmaes_minimize(sphere, spec);
    CHECK(fit.best_value < 1e-10);
    CHECK(fit.evaluations <= 5000);
}

TEST_CASE("cmaes finds the Rosenbrock minimizer") {
    ObjectiveSpec spec = box_spec(2, -5.0, 5.0, 20000);
    spec.target_tolerance = 1e-14;
    const FitResult fit = cmaes_minimize(rosenbrock, spec);
    CHECK(std::abs(fit.best_params(0) - 1.0) < 1e-4);
    CHECK(std::abs(fit.best_params(1) - 1.0) < 1e-4);
}

TEST_CASE("cmaes is deterministic for a fixed seed") {
    ObjectiveSpec spec = box_spec(3, -2.0, 2.0, 600, 99);
    const FitResult a = cmaes_minimize(rosenbrock, spec);
    const FitResult b = cmaes_minimize(rosenbrock, spec);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].objective == b.history[i].objective);
        CHECK(a.history[i].params == b.history[i].params);
    }
    CHECK(a.best_value == b.best_value);
}

TEST_CASE("cmaes keeps parameters inside the box") {
    // Minimum outside the box: the result must sit on the boundary.
    auto shifted = [](const Eigen::VectorXd& x) { return (x.array() - 3.0).matrix().squaredNorm(); };
    ObjectiveSpec spec = box_spec(2, -1.0, 1.0, 2000);
    const FitResult fit = cmaes_minimize(shifted, spec);
    for (const EvalRecord& rec : fit.history) {
        CHECK(rec.params.maxCoeff() <= 1.0 + 1e-12);
        CHECK(rec.params.minCoeff() >= -1.0 - 1e-12);
    }
    CHECK(fit.best_params(0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.best_params(1) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("cmaes incumbent is non-increasing") {
    ObjectiveSpec spec = box_spec(4, -3.0, 3.0, 3000, 7);
    const FitResult fit = cmaes_minimize(rosenbrock, spec);
    double best = std::numeric_limits<double>::infinity();
    for (const EvalRecord& rec : fit.history) {
        best = std::min(best, rec.objective);
        CHECK(best <= rec.objective);
    }
    CHECK(best == fit.best_value);
}

TEST_CASE("cmaes flags budget exhaustion") {
    ObjectiveSpec spec = box_spec(2, -5.0, 5.0, 40);
    spec.target_tolerance = 0.0; // unreachable for Rosenbrock in 40 evals
    const FitResult fit = cmaes_minimize(rosenbrock, spec);
    CHECK(fit.budget_exhausted);
    CHECK_FALSE(fit.converged);
    CHECK(fit.evaluations == 40);
}

TEST_CASE("cmaes degenerate box returns the single point") {
    ObjectiveSpec spec = box_spec(2, 0.7, 0.7, 100);
    const FitResult fit = cmaes_minimize(sphere, spec);
    CHECK(fit.evaluations == 1);
    CHECK(fit.best_params(0) == 0.7);
    CHECK(fit.best_value == doctest::Approx(0.98));
}

TEST_CASE("cmaes validates its inputs") {
    ObjectiveSpec spec = box_spec(2, -1.0, 1.0, 5);
    CHECK_THROWS_AS(cmaes_minimize(sphere, spec), std::invalid_argument); // budget < 10n
    spec.budget = 100;
    spec.upper(0) = -2.0;
    CHECK_THROWS_AS(cmaes_minimize(sphere, spec), std::invalid_argument);
}
