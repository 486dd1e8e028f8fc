#include "finsim/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace finsim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

/// Triangle wave through (0, lo), (half, hi), (2*half, lo), ... with enough
/// knots to cover `duration` plus a margin.
BaseDriver triangle_driver(double lo, double hi, double half, double duration) {
    std::vector<double> kt, kv;
    const int strokes = static_cast<int>(std::ceil(duration / half)) + 2;
    for (int k = 0; k <= strokes; ++k) {
        kt.push_back(k * half);
        kv.push_back(k % 2 ? hi : lo);
    }
    return BaseDriver::piecewise_linear(std::move(kt), std::move(kv));
}

double interp_at(const std::vector<double>& t, const std::vector<double>& y, double tau) {
    if (tau <= t.front()) return y.front();
    if (tau >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), tau);
    const size_t j = static_cast<size_t>(it - t.begin()) - 1;
    const double w = (tau - t[j]) / (t[j + 1] - t[j]);
    return (1.0 - w) * y[j] + w * y[j + 1];
}

/// Mean |load| over the part of a stroke where the travelled fraction lies
/// in [0.70, 0.95]: past the post-reversal reconfiguration, clear of the
/// next reversal.
double steady_stroke_load(const std::vector<double>& t, const std::vector<double>& frac,
                          const std::vector<double>& load, double t0, double t1) {
    double sum = 0.0;
    int count = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 || t[i] > t1) continue;
        if (frac[i] < 0.70 || frac[i] > 0.95) continue;
        sum += std::abs(load[i]);
        ++count;
    }
    if (count == 0) throw std::runtime_error("steady window is empty; record stride too coarse");
    return sum / count;
}

struct StrokeMetrics {
    std::vector<StrokeCurve> histogram;
    std::vector<double> steady_recovery;
    std::vector<double> steady_power;
};

/// Split a record into per-stroke branches. `position` maps a sample to the
/// stroke coordinate (0 at start of outbound), `load` is the plotted column.
StrokeMetrics stroke_metrics(const TrajectoryRecord& rec, const std::vector<double>& position,
                             const std::vector<double>& load, double amplitude, double half,
                             int cycles, bool discard_first) {
    StrokeMetrics out;
    std::vector<double> frac(position.size());
    const int strokes = 2 * cycles;
    for (int s = 0; s < strokes; ++s) {
        const double t0 = s * half;
        const double t1 = (s + 1) * half;
        const bool power = (s % 2) == 1;
        const int cycle = s / 2 + 1;

        StrokeCurve curve;
        curve.cycle = cycle;
        curve.power = power;
        for (size_t i = 0; i < rec.t.size(); ++i) {
            if (rec.t[i] < t0 - 1e-12 || rec.t[i] > t1 + 1e-12) continue;
            const double travelled = power ? amplitude - position[i] : position[i];
            frac[i] = travelled / amplitude;
            curve.position.push_back(position[i]);
            curve.load.push_back(load[i]);
        }
        const double steady = steady_stroke_load(rec.t, frac, load, t0, t1);
        if (!(discard_first && cycle == 1)) {
            out.histogram.push_back(std::move(curve));
            (power ? out.steady_power : out.steady_recovery).push_back(steady);
        }
    }
    return out;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace

double DragProtocol::attack_rad() const { return attack_deg * kDeg; }

void DragProtocol::validate() const {
    if (!(amplitude > 0.0)) throw std::invalid_argument("drag.amplitude must be > 0");
    if (!(speed > 0.0)) throw std::invalid_argument("drag.speed must be > 0");
    if (cycles < 1) throw std::invalid_argument("drag.cycles must be >= 1");
    if (attack_deg < 0.0 || attack_deg > 180.0) {
        throw std::invalid_argument("drag.attack_deg must lie in [0, 180]");
    }
}

double RotateProtocol::sweep_rad() const { return sweep_deg * kDeg; }
double RotateProtocol::omega_rad() const { return omega_deg_s * kDeg; }
double RotateProtocol::half_period() const { return sweep_rad() / omega_rad(); }

void RotateProtocol::validate() const {
    if (!(sweep_deg > 0.0)) throw std::invalid_argument("rotate.sweep_deg must be > 0");
    if (!(omega_deg_s > 0.0)) throw std::invalid_argument("rotate.omega_deg_s must be > 0");
    if (cycles < 1) throw std::invalid_argument("rotate.cycles must be >= 1");
    if (arm_offset < 0.0) throw std::invalid_argument("rotate.arm_offset must be >= 0");
}

double GaitParams::theta1_rad() const { return theta1_deg * kDeg; }
double GaitParams::theta2_rad() const { return theta2_deg * kDeg; }
double GaitParams::omega_rad() const { return omega_deg_s * kDeg; }
double GaitParams::half_period() const { return sweep_rad() / omega_rad(); }

void GaitParams::validate() const {
    if (theta1_deg < 0.0 || theta1_deg > 90.0) {
        throw std::invalid_argument("gait.theta1_deg must lie in [0, 90]");
    }
    if (theta2_deg < -90.0 || theta2_deg > 0.0) {
        throw std::invalid_argument("gait.theta2_deg must lie in [-90, 0]");
    }
    if (arm_length < 0.060 || arm_length > 0.085) {
        throw std::invalid_argument("gait.arm_length must lie in [0.060, 0.085]");
    }
    if (!(omega_deg_s > 0.0)) throw std::invalid_argument("gait.omega_deg_s must be > 0");
    if (cycles < 1) throw std::invalid_argument("gait.cycles must be >= 1");
}

void RobotSpec::validate() const {
    if (!(body_mass > 0.0) || cart_mass < 0.0 || !(body_height > 0.0) ||
        !(body_width > 0.0) || !(body_length > 0.0) || !(body_v_eps > 0.0) ||
        !(body_drag_scale > 0.0)) {
        throw std::invalid_argument("robot: masses and dimensions must be positive");
    }
    fin.validate();
}

ForceFn rft_force_fn(const MediumModel& medium) {
    medium.validate();
    return [medium](const ChainModel& model, const ChainState&, const ChainKinematics& kin) {
        ForceSet f;
        f.link_forces.assign(static_cast<size_t>(model.link_count()), Vec2::Zero());
        for (int i = 0; i < model.link_count(); ++i) {
            const LinkSpec& link = model.spec().links[i];
            if (!link.drag_active) continue;
            const SegmentKinematics sk = make_segment_kinematics(
                kin.centers[i], kin.tangents[i], kin.center_vel[i],
                link.length * link.height);
            f.link_forces[i] = segment_force(medium, sk).force;
        }
        return f;
    };
}

DragResult run_drag(const FinSpec& fin, const MediumModel& medium, const DragProtocol& protocol,
                    const ScenarioOptions& opts) {
    protocol.validate();
    const double half = protocol.half_period();
    const double duration = protocol.cycles * protocol.period();

    // Base tangent at pi/2 + attack keeps the outbound (+y) stroke on the
    // fin's soft side, matching the recovery-first stroke convention.
    const double theta0 = kPi / 2.0 + protocol.attack_rad();
    const ChainSpec spec = build_fin_chain(
        fin, BaseMotion::prescribed_translation(
                 BaseDriver::constant(0.0),
                 triangle_driver(0.0, protocol.amplitude, half, duration), theta0));
    const ChainModel model(spec);

    DragResult out;
    out.record = model.run_trajectory(rft_force_fn(medium), duration, opts.integrator,
                                      {opts.record_stride, true});

    StrokeMetrics metrics =
        stroke_metrics(out.record, out.record.y0, out.record.fy, protocol.amplitude, half,
                       protocol.cycles, protocol.discard_first);
    out.histogram = std::move(metrics.histogram);
    out.steady_force_recovery = std::move(metrics.steady_recovery);
    out.steady_force_power = std::move(metrics.steady_power);
    out.mean_steady_recovery = mean(out.steady_force_recovery);
    out.mean_steady_power = mean(out.steady_force_power);
    return out;
}

RotateResult run_rotate(const FinSpec& fin, const MediumModel& medium,
                        const RotateProtocol& protocol, const ScenarioOptions& opts) {
    protocol.validate();
    const double half = protocol.half_period();
    const double duration = protocol.cycles * protocol.period();

    // Start pointing +y and sweep clockwise first, which bends the fin in
    // its soft direction on the outbound stroke.
    const double phi0 = kPi / 2.0;
    FinSpec rig = fin;
    rig.rod_length = fin.rod_length + protocol.arm_offset;
    const ChainSpec spec = build_fin_chain(
        rig, BaseMotion::prescribed_rotation(
                 Vec2::Zero(), triangle_driver(phi0, phi0 - protocol.sweep_rad(), half, duration)));
    const ChainModel model(spec);

    RotateResult out;
    out.record = model.run_trajectory(rft_force_fn(medium), duration, opts.integrator,
                                      {opts.record_stride, true});

    // Sweep coordinate: angle travelled from the stroke origin.
    std::vector<double> sweep(out.record.t.size());
    for (size_t i = 0; i < sweep.size(); ++i) sweep[i] = phi0 - out.record.theta0[i];

    StrokeMetrics metrics = stroke_metrics(out.record, sweep, out.record.tz,
                                           protocol.sweep_rad(), half, protocol.cycles,
                                           protocol.discard_first);
    out.histogram = std::move(metrics.histogram);
    out.steady_torque_recovery = std::move(metrics.steady_recovery);
    out.steady_torque_power = std::move(metrics.steady_power);
    out.mean_steady_recovery = mean(out.steady_torque_recovery);
    out.mean_steady_power = mean(out.steady_torque_power);
    return out;
}

FlappingReport classify_flapping(const FinSpec& fin, const MediumModel& medium,
                                 const std::vector<double>& amplitudes,
                                 const ClassifyOptions& opts) {
    if (amplitudes.empty()) throw std::invalid_argument("classify: empty amplitude sweep");
    for (size_t i = 0; i < amplitudes.size(); ++i) {
        if (amplitudes[i] < 0.0) throw std::invalid_argument("classify: amplitudes must be >= 0");
        if (i > 0 && amplitudes[i] <= amplitudes[i - 1]) {
            throw std::invalid_argument("classify: amplitudes must increase");
        }
    }
    const double a_max = amplitudes.back();
    if (!(a_max > 0.0)) throw std::invalid_argument("classify: need a positive amplitude");

    FlappingReport report;

    // Threshold detection on the largest amplitude.
    DragProtocol probe;
    probe.amplitude = a_max;
    probe.speed = opts.speed;
    probe.attack_deg = opts.attack_deg;
    probe.cycles = std::max(opts.cycles, 2);
    probe.discard_first = false;
    const DragResult probe_run = run_drag(fin, medium, probe, opts.run);
    const TrajectoryRecord& rec = probe_run.record;
    const double half = probe.half_period();

    {
        // First outbound stroke, from flat: |Fy| versus displacement.
        std::vector<double> ys, fs;
        for (size_t i = 0; i < rec.t.size(); ++i) {
            if (rec.t[i] > half + 1e-12) break;
            ys.push_back(rec.y0[i]);
            fs.push_back(std::abs(rec.fy[i]));
        }
        if (ys.size() < 10) throw std::runtime_error("classify: record too coarse");

        double f_end = 0.0;
        int n_end = 0;
        for (size_t i = 0; i < ys.size(); ++i) {
            if (ys[i] >= 0.90 * a_max && ys[i] <= 0.98 * a_max) {
                f_end += fs[i];
                ++n_end;
            }
        }
        f_end /= std::max(n_end, 1);
        const double slope_limit = opts.plateau_rel_per_mm * f_end / 1e-3; // per meter

        // Smallest displacement from which the force slope stays below the
        // plateau limit for the rest of the stroke.
        const double window = 1e-3;
        int last_violation = -1;
        for (size_t i = 0; i < ys.size(); ++i) {
            if (ys[i] > 0.98 * a_max) break;
            const double y_lo = ys[i] - window, y_hi = ys[i] + window;
            const double f_lo = interp_at(ys, fs, y_lo);
            const double f_hi = interp_at(ys, fs, y_hi);
            const double slope = std::abs(f_hi - f_lo) / (y_hi - y_lo);
            if (slope > slope_limit) last_violation = static_cast<int>(i);
        }
        if (last_violation + 1 >= static_cast<int>(ys.size())) {
            throw std::runtime_error(
                "classify: amplitude sweep is below the deflection-saturation resolution");
        }
        report.d_f1 = ys[static_cast<size_t>(last_violation + 1)];
    }

    {
        // Return distance to recover flat after the first reversal.
        const double flat_tol = opts.flat_tol_deg * kDeg;
        bool found = false;
        for (size_t i = 0; i < rec.t.size(); ++i) {
            if (rec.t[i] <= half + 1e-12) continue;
            if (rec.t[i] > 2.0 * half) break;
            const double max_twist = rec.gamma.row(static_cast<Eigen::Index>(i))
                                         .cwiseAbs()
                                         .maxCoeff();
            if (max_twist < flat_tol) {
                report.d_f1_r = a_max - rec.y0[i];
                found = true;
                break;
            }
        }
        if (!found) {
            throw std::runtime_error("classify: fin never recovers flat on the return stroke");
        }
    }

    for (double amplitude : amplitudes) {
        FlappingEntry entry;
        entry.amplitude = amplitude;
        if (amplitude <= 0.0) {
            entry.regime = "small";
            report.entries.push_back(entry);
            continue;
        }
        entry.regime = amplitude > report.d_f1 ? "large" : "small";

        DragProtocol p;
        p.amplitude = amplitude;
        p.speed = opts.speed;
        p.attack_deg = opts.attack_deg;
        p.cycles = opts.cycles;
        p.discard_first = false;
        const DragResult run = run_drag(fin, medium, p, opts.run);
        const TrajectoryRecord& r = run.record;

        const double T = p.period();
        const double c0 = (opts.cycles - 1) * T;
        const double cm = c0 + 0.5 * T;
        const double c1 = opts.cycles * T;
        double net = 0.0, stroke = 0.0, peak = 0.0;
        for (size_t i = 0; i + 1 < r.t.size(); ++i) {
            if (r.t[i] < c0 - 1e-12 || r.t[i + 1] > c1 + 1e-12) continue;
            const double dt = r.t[i + 1] - r.t[i];
            net += 0.5 * dt * (r.fy[i] + r.fy[i + 1]);
            if (r.t[i] >= cm - 1e-12) {
                stroke += 0.5 * dt * (std::abs(r.fy[i]) + std::abs(r.fy[i + 1]));
            }
            peak = std::max(peak, r.gamma.row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff());
        }
        entry.net_impulse = net;
        entry.per_stroke_impulse = stroke;
        entry.peak_twist = peak;
        report.entries.push_back(entry);
    }
    return report;
}

SwimResult run_swim(const RobotSpec& robot, const MediumModel& medium, const GaitParams& gait,
                    const ScenarioOptions& opts) {
    gait.validate();
    robot.validate();
    medium.validate();

    // Right-half model: one fin drives half the translating mass against
    // half the frontal drag area. The efficiency is invariant under this
    // halving; reported displacements are the robot's.
    const double half_mass = 0.5 * (robot.body_mass + robot.cart_mass);
    const double half_area = 0.5 * robot.frontal_area();

    FinSpec fin = robot.fin;
    fin.rod_length = gait.arm_length;

    const double sweep = gait.sweep_rad();
    BaseDriver servo = sweep > 1e-12
                           ? triangle_driver(kPi / 2.0 - gait.theta1_rad(),
                                             kPi / 2.0 - gait.theta2_rad(), gait.half_period(),
                                             gait.cycles * gait.period())
                           : BaseDriver::constant(kPi / 2.0 - gait.theta1_rad());

    ChainSpec spec = build_fin_chain(fin, BaseMotion{});
    spec.base.x = BaseDriver::free();
    spec.base.y = BaseDriver::constant(0.0);
    spec.base.angle = std::move(servo);
    spec.base_point_mass = half_mass;
    const ChainModel model(spec);

    const ForceFn fin_forces = rft_force_fn(medium);
    const double body_v_eps = robot.body_v_eps;
    const double body_scale = robot.body_drag_scale;
    const ForceFn forces = [&, fin_forces, body_v_eps, body_scale](const ChainModel& m, const ChainState& s,
                                                       const ChainKinematics& kin) {
        ForceSet f = fin_forces(m, s, kin);
        f.base_force.x() -= body_scale * medium.sigma_perp * half_area * std::tanh(s.dx0 / body_v_eps);
        return f;
    };

    SwimResult out;
    const double T = sweep > 1e-12 ? gait.period() : 1.0;
    const double duration = gait.cycles * T;
    out.record = model.run_trajectory(forces, duration, opts.integrator,
                                      {opts.record_stride, true});

    const TrajectoryRecord& rec = out.record;
    for (int c = 0; c < gait.cycles; ++c) {
        const double x_start = interp_at(rec.t, rec.x0, c * T);
        const double x_mid = interp_at(rec.t, rec.x0, c * T + 0.5 * T);
        const double x_end = interp_at(rec.t, rec.x0, (c + 1) * T);
        out.d1.push_back(x_mid - x_start);
        out.d2.push_back(x_mid - x_end);
    }
    out.d1_steady = out.d1.back();
    out.d2_steady = out.d2.back();

    if (gait.cycles >= 2) {
        const double scale =
            std::max({std::abs(out.d1_steady), std::abs(out.d2_steady), 1e-9});
        const size_t n = out.d1.size();
        out.converged = std::abs(out.d1[n - 1] - out.d1[n - 2]) <= 0.01 * scale &&
                        std::abs(out.d2[n - 1] - out.d2[n - 2]) <= 0.01 * scale;
    }

    if (out.d1_steady > 1e-12) {
        out.eta = (out.d1_steady - out.d2_steady) / out.d1_steady;
    }
    out.net_speed = (out.d1_steady - out.d2_steady) / T;
    return out;
}

} // namespace finsim
