#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace finsim {

/// Box-constrained minimization problem for the evolution strategy. The
/// search runs in box-normalized coordinates; sigma0 is in box units.
struct ObjectiveSpec {
    int dimension = 0;
    Eigen::VectorXd lower;       ///< finite, size = dimension
    Eigen::VectorXd upper;       ///< finite, upper >= lower (equal pins a coordinate)
    Eigen::VectorXd initial_mean; ///< inside the box; empty = box center
    double sigma0 = 0.3;         ///< initial step size, box units
    int budget = 0;              ///< max objective evaluations (>= 10 * dimension)
    double target_tolerance = -std::numeric_limits<double>::infinity(); ///< stop when best <= this
    std::uint64_t seed = 1;
    int lambda = 0;              ///< population size; 0 = 4 + floor(3 ln n)
    double penalty_weight = 1e6; ///< out-of-box quadratic penalty scale
};

struct EvalRecord {
    int iteration = 0;
    int eval_id = 0;
    Eigen::VectorXd params; ///< clamped to the box (the evaluated point)
    double objective = 0.0;
};

struct FitResult {
    Eigen::VectorXd best_params;
    double best_value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int iterations = 0;
    bool converged = false;        ///< target tolerance reached
    bool budget_exhausted = false; ///< stopped on budget without meeting tolerance
    bool reduced_identifiability = false; ///< set by fitting front-ends
    std::map<double, Eigen::VectorXd> per_speed_mse; ///< damping fits: speed -> per-joint MSE
    std::vector<EvalRecord> history;
    std::string message;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using EvalSink = std::function<void(const EvalRecord&)>;

/// Standard (mu/mu_w, lambda) covariance-matrix-adaptation evolution strategy
/// with rank-based recombination weights, cumulative step-size control and
/// clamp-plus-penalty bound handling. Deterministic for a fixed seed.
FitResult cmaes_minimize(const Objective& objective, const ObjectiveSpec& spec,
                         const EvalSink& sink = nullptr);

} // namespace finsim
