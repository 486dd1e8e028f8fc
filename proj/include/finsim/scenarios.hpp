#pragma once

#include "finsim/chain.hpp"
#include "finsim/fin.hpp"
#include "finsim/medium.hpp"

#include <optional>
#include <string>
#include <vector>

namespace finsim {

/// Back-and-forth dragging at a fixed attack angle. The base follows a
/// triangle wave along +y; the outbound half bends the fin in its soft
/// direction (recovery stroke), the return half loads the stop (power
/// stroke). Angles live in degrees here (the config unit).
struct DragProtocol {
    double amplitude = 0.2;   ///< m
    double speed = 0.03;      ///< m/s
    double attack_deg = 90.0; ///< angle between plate tangent and drag axis
    int cycles = 5;
    bool discard_first = true;

    double attack_rad() const;
    double half_period() const { return amplitude / speed; }
    double period() const { return 2.0 * amplitude / speed; }
    void validate() const;
};

/// Back-and-forth sweep about a fixed pivot. The plate extends radially;
/// the outbound sweep is the recovery stroke.
struct RotateProtocol {
    double sweep_deg = 120.0;
    double omega_deg_s = 60.0;
    int cycles = 5;
    double arm_offset = 0.0; ///< m, added to the rod between pivot and plate
    bool discard_first = true;

    double sweep_rad() const;
    double omega_rad() const;
    double half_period() const;
    double period() const { return 2.0 * half_period(); }
    void validate() const;
};

/// Servo gait for the swimming robot: triangle wave between theta1 (power
/// stroke start, fin swept forward) and theta2 (power stroke end).
struct GaitParams {
    double theta1_deg = 60.0;  ///< in [0, 90]
    double theta2_deg = -90.0; ///< in [-90, 0]
    double omega_deg_s = 60.0; ///< servo angular speed
    double arm_length = 0.065; ///< m, in [0.060, 0.085]
    int cycles = 6;

    double theta1_rad() const;
    double theta2_rad() const;
    double omega_rad() const;
    double sweep_rad() const { return theta1_rad() - theta2_rad(); }
    double half_period() const;
    double period() const { return 2.0 * half_period(); }
    void validate() const;
};

/// Two-fin swimming robot constrained by its cart to translate along one
/// horizontal axis. Bilateral symmetry lets the right half stand in for the
/// whole: half the body/cart mass and frontal area carry one fin.
struct RobotSpec {
    double body_mass = 0.220; ///< kg
    double cart_mass = 0.160; ///< kg, translates with the robot
    double body_height = 0.045; ///< m
    double body_width = 0.055;  ///< m
    double body_length = 0.075; ///< m
    /// Velocity regularization for the body drag. The body moves at mm/s
    /// scales, far below the plate protocols the medium's v_eps is sized
    /// for; without a tighter scale the body creeps under sub-yield loads.
    double body_v_eps = 1e-4; ///< m/s
    /// Drag coefficient of the body relative to the plate's normal stress:
    /// F_r = body_drag_scale * sigma_perp * frontal_area * s(v). A blunt box
    /// resists harder than a thin plate of equal frontal area.
    double body_drag_scale = 1.3;
    FinSpec fin;

    double frontal_area() const { return body_height * body_width; }
    void validate() const;
};

struct ScenarioOptions {
    IntegratorConfig integrator;
    int record_stride = 10;
};

/// One branch of a force/torque-versus-position loop.
struct StrokeCurve {
    int cycle = 0;       ///< 1-based
    bool power = false;  ///< false = recovery (outbound) branch
    std::vector<double> position; ///< m (drag) or rad (rotate)
    std::vector<double> load;     ///< N (drag) or N*m (rotate)
};

struct DragResult {
    TrajectoryRecord record;
    std::vector<StrokeCurve> histogram; ///< first cycle dropped when discard_first
    std::vector<double> steady_force_recovery; ///< per kept cycle, N
    std::vector<double> steady_force_power;
    double mean_steady_recovery = 0.0;
    double mean_steady_power = 0.0;
};

struct RotateResult {
    TrajectoryRecord record;
    std::vector<StrokeCurve> histogram;
    std::vector<double> steady_torque_recovery;
    std::vector<double> steady_torque_power;
    double mean_steady_recovery = 0.0;
    double mean_steady_power = 0.0;
};

DragResult run_drag(const FinSpec& fin, const MediumModel& medium, const DragProtocol& protocol,
                    const ScenarioOptions& opts = {});

RotateResult run_rotate(const FinSpec& fin, const MediumModel& medium,
                        const RotateProtocol& protocol, const ScenarioOptions& opts = {});

struct ClassifyOptions {
    ScenarioOptions run;
    double speed = 0.03;
    double attack_deg = 90.0;
    int cycles = 3;
    double plateau_rel_per_mm = 0.005; ///< steady when |d|F|/dx| < this * F per mm
    double flat_tol_deg = 0.5;         ///< "flat" when every |gamma| is below this
};

struct FlappingEntry {
    double amplitude = 0.0;
    std::string regime;             ///< "small" or "large"
    double net_impulse = 0.0;       ///< N*s per steady cycle, + = net thrust
    double per_stroke_impulse = 0.0;
    double peak_twist = 0.0;        ///< rad, steady cycle
};

struct FlappingReport {
    double d_f1 = 0.0;   ///< displacement at which deflection saturates
    double d_f1_r = 0.0; ///< return distance to recover flat
    std::vector<FlappingEntry> entries;
};

/// Amplitude sweep: detects the saturation thresholds on the largest
/// amplitude, then labels each amplitude and integrates its steady-cycle
/// impulse.
FlappingReport classify_flapping(const FinSpec& fin, const MediumModel& medium,
                                 const std::vector<double>& amplitudes,
                                 const ClassifyOptions& opts = {});

struct SwimResult {
    std::vector<double> d1; ///< m, forward travel per power stroke, each cycle
    std::vector<double> d2; ///< m, backward travel per recovery stroke
    double d1_steady = 0.0;
    double d2_steady = 0.0;
    std::optional<double> eta; ///< (d1-d2)/d1 on the steady cycle; empty if d1 <= 0
    double net_speed = 0.0;    ///< m/s over the steady cycle
    bool converged = false;    ///< last two cycles agree within 1 percent
    TrajectoryRecord record;   ///< x0 is the body position
};

SwimResult run_swim(const RobotSpec& robot, const MediumModel& medium, const GaitParams& gait,
                    const ScenarioOptions& opts = {});

/// Resistive forces on the drag-active links of a fin chain.
ForceFn rft_force_fn(const MediumModel& medium);

} // namespace finsim
