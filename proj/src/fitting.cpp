#include "finsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

namespace finsim {

namespace {

constexpr double kPi = std::numbers::pi;

// The error sum is normalized by the five-speed protocol size regardless of
// how many logs are supplied; a constant factor cannot move the minimizer.
constexpr double kSpeedProtocolSize = 5.0;

Eigen::MatrixXd simulate_recovery_twists(const FinSpec& fin, const MediumModel& medium,
                                         const ExperimentalLog& log, double damping,
                                         double attack_deg, const ScenarioOptions& opts) {
    FinSpec trial = fin;
    if (trial.per_joint) {
        for (JointLaw& law : *trial.per_joint) law.damping = damping;
    }
    trial.joint_damping = damping;

    const double theta0 = kPi / 2.0 + attack_deg * kPi / 180.0;
    const ChainSpec spec = build_fin_chain(
        trial, BaseMotion::prescribed_translation(BaseDriver::constant(0.0),
                                                  BaseDriver::linear(0.0, log.speed), theta0));
    const ChainModel model(spec);

    const double t_end = log.t(log.t.size() - 1);
    const double dt = opts.integrator.dt;
    // Record densely enough to interpolate onto the log grid.
    const double grid_dt = log.samples() > 1 ? log.t(1) - log.t(0) : t_end;
    const int stride = std::max(1, static_cast<int>(std::floor(grid_dt / dt / 2.0)));
    const TrajectoryRecord rec =
        model.run_trajectory(rft_force_fn(medium), t_end, opts.integrator, {stride, true});

    Eigen::MatrixXd sim(log.samples(), log.joints());
    size_t j = 0;
    for (int i = 0; i < log.samples(); ++i) {
        const double tau = log.t(i);
        while (j + 2 < rec.t.size() && rec.t[j + 1] <= tau) ++j;
        const double w = std::clamp((tau - rec.t[j]) / (rec.t[j + 1] - rec.t[j]), 0.0, 1.0);
        sim.row(i) = (1.0 - w) * rec.gamma.row(static_cast<Eigen::Index>(j)) +
                     w * rec.gamma.row(static_cast<Eigen::Index>(j + 1));
    }
    return sim;
}

} // namespace

double damping_objective(const FinSpec& fin, const MediumModel& medium,
                         const std::vector<ExperimentalLog>& logs, double damping,
                         const FitDampingOptions& opts,
                         std::map<double, Eigen::VectorXd>* per_speed) {
    double total = 0.0;
    for (const ExperimentalLog& log : logs) {
        const Eigen::MatrixXd sim =
            simulate_recovery_twists(fin, medium, log, damping, opts.attack_deg, opts.run);
        const Eigen::MatrixXd err = sim - log.gamma;
        const Eigen::VectorXd per_joint =
            err.array().square().colwise().mean().transpose();
        if (per_speed) (*per_speed)[log.speed] = per_joint;
        total += per_joint.sum() / static_cast<double>(per_joint.size());
    }
    return total / kSpeedProtocolSize;
}

FitResult fit_damping(const FinSpec& fin, const MediumModel& medium,
                      const std::vector<ExperimentalLog>& logs,
                      const FitDampingOptions& opts, const EvalSink& sink) {
    if (logs.empty()) throw std::invalid_argument("fit_damping: empty trajectory set");
    std::set<double> speeds;
    for (const ExperimentalLog& log : logs) {
        if (!(log.speed > 0.0)) {
            throw std::invalid_argument("fit_damping: logs must carry positive speed labels");
        }
        if (log.joints() != fin.segments) {
            throw std::invalid_argument("fit_damping: log joint count does not match the fin");
        }
        speeds.insert(log.speed);
    }

    ObjectiveSpec spec;
    spec.dimension = 1;
    spec.lower = Eigen::VectorXd::Constant(1, 0.0);
    spec.upper = Eigen::VectorXd::Constant(1, opts.damping_max);
    spec.budget = opts.budget;
    spec.seed = opts.seed;
    spec.sigma0 = 0.3;

    const Objective objective = [&](const Eigen::VectorXd& x) {
        return damping_objective(fin, medium, logs, x(0), opts);
    };

    FitResult result = cmaes_minimize(objective, spec, sink);
    result.reduced_identifiability = speeds.size() < 2;
    damping_objective(fin, medium, logs, result.best_params(0), opts, &result.per_speed_mse);
    return result;
}

GaitFitResult optimize_gait(const RobotSpec& robot, const MediumModel& medium,
                            const OptimizeGaitOptions& opts, const EvalSink& sink) {
    robot.validate();

    GaitFitResult out;

    ObjectiveSpec spec;
    spec.dimension = 3;
    spec.lower.resize(3);
    spec.upper.resize(3);
    spec.lower << opts.bounds.theta1_min_deg, opts.bounds.theta2_min_deg, opts.bounds.arm_min;
    spec.upper << opts.bounds.theta1_max_deg, opts.bounds.theta2_max_deg, opts.bounds.arm_max;
    spec.budget = opts.budget;
    spec.seed = opts.seed;

    const Objective objective = [&](const Eigen::VectorXd& x) {
        GaitParams gait;
        gait.theta1_deg = x(0);
        gait.theta2_deg = x(1);
        gait.arm_length = x(2);
        gait.omega_deg_s = opts.omega_deg_s;
        gait.cycles = opts.cycles;
        const SwimResult swim = run_swim(robot, medium, gait, opts.run);
        if (!swim.eta) {
            ++out.undefined_evals;
            return 2.0; // worse than any realizable 1 - eta
        }
        return 1.0 - *swim.eta;
    };

    out.fit = cmaes_minimize(objective, spec, sink);
    if (out.undefined_evals == out.fit.evaluations) {
        throw std::runtime_error("optimize_gait: no gait produced forward travel");
    }
    out.best_gait.theta1_deg = out.fit.best_params(0);
    out.best_gait.theta2_deg = out.fit.best_params(1);
    out.best_gait.arm_length = out.fit.best_params(2);
    out.best_gait.omega_deg_s = opts.omega_deg_s;
    out.best_gait.cycles = opts.cycles;
    out.eta_best = 1.0 - out.fit.best_value;
    return out;
}

} // namespace finsim
