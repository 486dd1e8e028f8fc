#pragma once

#include "finsim/cmaes.hpp"
#include "finsim/logs.hpp"
#include "finsim/scenarios.hpp"

#include <vector>

namespace finsim {

struct FitDampingOptions {
    double damping_max = 5e-4;  ///< N*m*s/rad, search box is [0, damping_max]
    int budget = 200;
    std::uint64_t seed = 1;
    ScenarioOptions run;
    double attack_deg = 90.0;   ///< recovery stroke orientation
};

/// Identify the joint damping from recovery-stroke twist trajectories: each
/// log is replayed as a single outbound drag from flat at its own speed, and
/// the summed per-speed mean squared twist error (normalized by the
/// five-speed protocol size) is minimized over the damping coefficient.
FitResult fit_damping(const FinSpec& fin, const MediumModel& medium,
                      const std::vector<ExperimentalLog>& logs,
                      const FitDampingOptions& opts = {}, const EvalSink& sink = nullptr);

/// The error functional evaluated by the fit, exposed for diagnostics.
double damping_objective(const FinSpec& fin, const MediumModel& medium,
                         const std::vector<ExperimentalLog>& logs, double damping,
                         const FitDampingOptions& opts = {},
                         std::map<double, Eigen::VectorXd>* per_speed = nullptr);

struct GaitBounds {
    double theta1_min_deg = 0.0, theta1_max_deg = 90.0;
    double theta2_min_deg = -90.0, theta2_max_deg = 0.0;
    double arm_min = 0.060, arm_max = 0.085;
};

struct OptimizeGaitOptions {
    GaitBounds bounds;
    int budget = 420;
    std::uint64_t seed = 1;
    int cycles = 5;
    double omega_deg_s = 60.0;
    ScenarioOptions run;
};

struct GaitFitResult {
    FitResult fit;            ///< objective is 1 - eta
    GaitParams best_gait;
    double eta_best = 0.0;
    int undefined_evals = 0;  ///< swims with no forward travel
};

/// Maximize swimming efficiency over (theta1, theta2, arm length) by
/// minimizing 1 - eta with the evolution strategy.
GaitFitResult optimize_gait(const RobotSpec& robot, const MediumModel& medium,
                            const OptimizeGaitOptions& opts = {},
                            const EvalSink& sink = nullptr);

} // namespace finsim
