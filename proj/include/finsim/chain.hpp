#pragma once

#include "finsim/joint.hpp"
#include "finsim/medium.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <vector>

namespace finsim {

/// One rigid link of a planar serial chain.
struct LinkSpec {
    double length = 0.0;  ///< m
    double height = 0.0;  ///< m, into-page extent
    double mass = 0.0;    ///< kg
    double inertia = 0.0; ///< kg*m^2 about the link center
    bool drag_active = true; ///< false for extension rods / arms (no medium forces)
};

/// Drive for one base coordinate: either free (a generalized coordinate) or
/// prescribed at the position level as an exact function of time.
class BaseDriver {
public:
    static BaseDriver free();
    static BaseDriver constant(double value);
    /// u(t) = value + rate * t
    static BaseDriver linear(double value, double rate);
    /// Continuous piecewise-linear u(t) through (knot_times, knot_values);
    /// held constant outside the knot range. Knot times are integration
    /// breakpoints.
    static BaseDriver piecewise_linear(std::vector<double> knot_times,
                                       std::vector<double> knot_values);
    /// Arbitrary smooth-by-parts drive. `fn(t, u, du, ddu)` fills position,
    /// velocity and acceleration; `breakpoints` lists the non-smooth times.
    static BaseDriver custom(std::function<void(double, double&, double&, double&)> fn,
                             std::vector<double> breakpoints = {});

    bool is_free() const { return free_; }
    void eval(double t, double& u, double& du, double& ddu) const;
    /// Evaluation with a segment hint: piecewise drives pick the segment
    /// containing `hint` so that RK4 stages landing exactly on a knot stay on
    /// the branch of the substep being integrated.
    void eval_hinted(double t, double hint, double& u, double& du, double& ddu) const;
    const std::vector<double>& breakpoints() const { return breakpoints_; }

private:
    BaseDriver() = default;
    bool free_ = true;
    std::function<void(double, double&, double&, double&)> fn_;
    std::function<void(double, double, double&, double&, double&)> hinted_fn_;
    std::vector<double> breakpoints_;
};

/// Base motion of the chain root: one driver per base coordinate (x, y, angle).
struct BaseMotion {
    BaseDriver x = BaseDriver::free();
    BaseDriver y = BaseDriver::free();
    BaseDriver angle = BaseDriver::free();

    /// Base position and orientation both prescribed (dragging rigs).
    static BaseMotion prescribed_translation(BaseDriver x, BaseDriver y, double fixed_angle);
    /// Base pinned at the pivot with a prescribed sweep angle. An arm offset
    /// between pivot and plate is modelled as a drag-inactive first link.
    static BaseMotion prescribed_rotation(const Vec2& pivot, BaseDriver sweep_angle);
    /// All three base coordinates free.
    static BaseMotion free_body();
    /// Base point pinned in place, rotation free.
    static BaseMotion pinned_rotation(const Vec2& pivot);
};

/// Planar open serial chain: links, one torsional law per pin joint, and the
/// base drive. `base_joint_law` may only be set when the base angle is free
/// (it acts between the first link and the world frame).
struct ChainSpec {
    std::vector<LinkSpec> links;
    std::vector<JointLaw> joint_laws; ///< size links-1
    BaseMotion base;
    std::optional<JointLaw> base_joint_law;
    double base_point_mass = 0.0; ///< kg, translating mass carried at the root
};

/// Full kinematic state. Prescribed coordinates always match their drivers.
struct ChainState {
    double t = 0.0;
    double x0 = 0.0, y0 = 0.0, theta0 = 0.0;
    double dx0 = 0.0, dy0 = 0.0, dtheta0 = 0.0;
    Eigen::VectorXd gamma;     ///< joint twists, size links-1
    Eigen::VectorXd gamma_dot; ///< rad/s
};

/// External loads for one dynamics evaluation. Vectors may be empty (treated
/// as zero) or sized to the link/joint count.
struct ForceSet {
    std::vector<Vec2> link_forces;     ///< N, world frame, at link centers
    std::vector<double> link_torques;  ///< N*m about link centers
    std::vector<double> joint_torques; ///< N*m applied on each joint twist
    Vec2 base_force = Vec2::Zero();    ///< N on the base point
    double base_torque = 0.0;          ///< N*m on the base angle coordinate
};

/// Derived per-state geometry shared by force models and the solver.
struct ChainKinematics {
    std::vector<Vec2> joints;       ///< size links+1; joints[0] is the base point
    std::vector<Vec2> centers;      ///< link centers
    std::vector<Vec2> tangents;     ///< unit vectors along each link
    std::vector<double> angles;     ///< absolute link angles
    std::vector<Vec2> center_vel;   ///< m/s
    std::vector<double> angle_rate; ///< rad/s
};

class ChainModel;

/// External force model evaluated at every integrator stage.
using ForceFn =
    std::function<ForceSet(const ChainModel&, const ChainState&, const ChainKinematics&)>;

struct IntegratorConfig {
    double dt = 1.5e-4;                 ///< s, fixed RK4 step
    double constraint_tolerance = 1e-12; ///< relative link-length residual allowed
};

struct RecordOptions {
    int stride = 1;          ///< record every stride-th grid step
    bool record_forces = true;
};

struct EnergyAudit {
    double work_prescribed = 0.0;    ///< J fed in by the base drive
    double work_external = 0.0;      ///< J done by ForceSet loads (drag is negative)
    double damper_dissipation = 0.0; ///< J >= 0
    double kinetic_initial = 0.0, kinetic_final = 0.0;
    double spring_initial = 0.0, spring_final = 0.0;

    /// Residual of the work-energy balance; ~0 for a converged integration.
    double residual() const {
        return work_prescribed + work_external - damper_dissipation -
               (kinetic_final - kinetic_initial) - (spring_final - spring_initial);
    }
    double dissipated_total() const {
        return damper_dissipation + std::abs(work_external);
    }
};

/// Time series of a chain run. Base load columns hold the force/torque the
/// chain exerts on its mount (the force-sensor reading).
struct TrajectoryRecord {
    int joint_count = 0;
    std::vector<double> t;
    std::vector<double> x0, y0, theta0;
    std::vector<double> dx0, dy0, dtheta0;
    Eigen::MatrixXd gamma;        ///< samples x joints
    Eigen::MatrixXd gamma_dot;    ///< samples x joints
    Eigen::MatrixXd joint_torque; ///< samples x joints, spring+damper law torque
    std::vector<double> fx, fy, tz;
    EnergyAudit energy;
    double max_length_residual = 0.0; ///< relative, across recorded samples
    double dt = 0.0;

    size_t samples() const { return t.size(); }
};

struct AccelResult {
    Eigen::VectorXd free_accel;        ///< accelerations of the free coordinates
    Eigen::VectorXd full_accel;        ///< accelerations of (x0, y0, theta0, gamma...)
    Vec2 base_force = Vec2::Zero();    ///< chain-on-mount force
    double base_torque = 0.0;          ///< chain-on-mount torque about the base point
    Eigen::VectorXd prescribed_load;   ///< generalized drive force per coordinate (0 on free)
};

/// Immutable assembled chain. Shareable across concurrent runs; all per-run
/// state lives in ChainState.
class ChainModel {
public:
    explicit ChainModel(ChainSpec spec);

    const ChainSpec& spec() const { return spec_; }
    int link_count() const { return static_cast<int>(spec_.links.size()); }
    int joint_count() const { return static_cast<int>(spec_.links.size()) - 1; }
    /// Number of free generalized coordinates.
    int dof() const { return static_cast<int>(free_index_.size()); }
    bool base_coordinate_free(int axis) const; ///< axis 0=x, 1=y, 2=angle

    /// State at time t with prescribed coordinates filled from the drivers and
    /// joint twists/rates as given (zero by default).
    ChainState initial_state(double t = 0.0, const Eigen::VectorXd& gamma = {},
                             const Eigen::VectorXd& gamma_dot = {}) const;

    ChainKinematics kinematics(const ChainState& state) const;

    /// Largest relative deviation of |p_i - p_{i-1}| from the link lengths.
    double length_residual(const ChainState& state) const;

    double kinetic_energy(const ChainState& state) const;
    double spring_energy(const ChainState& state) const;
    /// Joint-law torques (spring + damper) at the given state.
    Eigen::VectorXd joint_law_torques(const ChainState& state) const;

    /// Full mass matrix over (x0, y0, theta0, gamma...).
    Eigen::MatrixXd mass_matrix(const ChainState& state, const ChainKinematics& kin) const;

    /// Solve M(q) qdd = Q(q, qd, applied) for the free coordinates.
    AccelResult accelerations(const ChainState& state, const ForceSet& applied) const;

    /// One fixed RK4 step of size dt; prescribed coordinates follow their
    /// drivers exactly at every stage.
    ChainState step(const ChainState& state, const ForceFn& forces, double dt) const;

    /// Integrate for `duration` (snapped up to a whole number of steps),
    /// splitting steps at driver breakpoints so every RK4 stage sees a smooth
    /// drive. Records states, joint torques, base loads and the energy audit.
    TrajectoryRecord run_trajectory(const ForceFn& forces, double duration,
                                    const IntegratorConfig& integrator,
                                    const RecordOptions& rec = {}) const;

    /// Driver breakpoints in (0, duration).
    std::vector<double> breakpoints(double duration) const;

private:
    struct DynamicsEval;
    DynamicsEval evaluate(const ChainState& state, const ForceSet& applied) const;
    ChainState state_from_free(double t, const Eigen::VectorXd& qf,
                               const Eigen::VectorXd& vf, double hint) const;
    /// Switch a state onto the outgoing drive branch at a breakpoint. A jump
    /// in prescribed velocity transmits an impulse, M_FF dv_F = -M_FP du_P;
    /// `impulse_work` receives the kinetic-energy change booked to the drive.
    ChainState cross_breakpoint(const ChainState& pre, double hint_out,
                                double& impulse_work) const;
    void check_step_size(double dt) const;

    ChainSpec spec_;
    std::vector<int> free_index_; ///< free slots in (x0, y0, theta0, gamma...)
};

/// Convenience wrapper for the spec-facing operation names.
ChainModel assemble_chain(const ChainSpec& spec);
Eigen::VectorXd compute_accelerations(const ChainModel& model, const ChainState& state,
                                      const ForceSet& applied);

} // namespace finsim
