#include "finsim/medium.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace finsim {

SegmentKinematics make_segment_kinematics(const Vec2& center, const Vec2& tangent,
                                          const Vec2& velocity, double area) {
    SegmentKinematics kin;
    kin.center = center;
    const double tn = tangent.norm();
    if (!(tn > 0.0) || !std::isfinite(tn)) {
        throw std::invalid_argument("segment kinematics: zero-length tangent");
    }
    kin.tangent = tangent / tn;
    kin.normal = perp(kin.tangent);
    kin.velocity = velocity;
    kin.area = area;
    const double vn = velocity.norm();
    if (vn > 0.0) {
        const double c = std::clamp(kin.tangent.dot(velocity) / vn, -1.0, 1.0);
        kin.attack_angle = std::acos(c);
    } else {
        kin.attack_angle = 0.0;
    }
    return kin;
}

SegmentLoad segment_force(const MediumModel& medium, const SegmentKinematics& kin) {
    medium.validate();
    if (!kin.velocity.allFinite()) {
        throw std::invalid_argument("segment_force: non-finite velocity");
    }
    if (std::abs(kin.tangent.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("segment_force: tangent is not a unit vector");
    }

    const double v_n = kin.velocity.dot(kin.normal);
    const double v_t = kin.velocity.dot(kin.tangent);

    double scale_n = 1.0;
    double scale_t = 1.0;
    if (medium.mode == CoefficientMode::SineScaled) {
        scale_n = std::abs(std::sin(kin.attack_angle));
        scale_t = std::abs(std::cos(kin.attack_angle));
    }

    SegmentLoad load;
    load.force = -medium.sigma_perp * kin.area * scale_n * medium.smoothed_sign(v_n) * kin.normal
                 - medium.sigma_par * kin.area * scale_t * medium.smoothed_sign(v_t) * kin.tangent;
    load.torque = 0.0;
    return load;
}

PlateLoad plate_integral_force(const MediumModel& medium, const PlateGeometry& plate,
                               const PlateMotion& motion, int strips) {
    medium.validate();
    if (!(plate.length > 0.0) || !(plate.height > 0.0)) {
        throw std::invalid_argument("plate_integral_force: degenerate plate geometry");
    }
    if (strips < 20) {
        throw std::invalid_argument("plate_integral_force: quadrature resolution must be >= 20");
    }

    const Vec2 tangent(std::cos(motion.plate_angle), std::sin(motion.plate_angle));
    const double dl = plate.length / strips;
    const double area = dl * plate.height;

    PlateLoad total;
    for (int k = 0; k < strips; ++k) {
        const double s = (k + 0.5) * dl;
        const Vec2 pos = motion.origin + s * tangent;
        const Vec2 r = pos - motion.origin;
        const Vec2 vel = motion.origin_velocity + motion.angular_velocity * perp(r);
        const SegmentKinematics kin = make_segment_kinematics(pos, tangent, vel, area);
        const SegmentLoad load = segment_force(medium, kin);
        total.force += load.force;
        total.torque += cross2(r, load.force);
    }
    return total;
}

CalibrationResult calibrate_coefficients(const std::vector<DragSample>& samples,
                                         double v_eps, CoefficientMode mode) {
    if (samples.size() < 2) {
        throw std::invalid_argument("calibrate_coefficients: need at least two samples");
    }
    MediumModel probe;
    probe.v_eps = v_eps;
    probe.mode = mode;

    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const DragSample& s = samples[static_cast<size_t>(i)];
        if (!(s.speed > 0.0) || !(s.area > 0.0)) {
            throw std::invalid_argument("calibrate_coefficients: samples need speed > 0 and area > 0");
        }
        const double sn = std::sin(s.attack_angle);
        const double ct = std::cos(s.attack_angle);
        double scale_n = 1.0;
        double scale_t = 1.0;
        if (mode == CoefficientMode::SineScaled) {
            scale_n = std::abs(sn);
            scale_t = std::abs(ct);
        }
        // Drag component along -v of the element force, per unit stress.
        A(i, 0) = s.area * scale_n * probe.smoothed_sign(s.speed * sn) * sn;
        A(i, 1) = s.area * scale_t * probe.smoothed_sign(s.speed * ct) * ct;
        b(i) = s.drag_force;
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv(1) < 1e-10 * std::max(sv(0), 1e-300)) {
        throw std::invalid_argument(
            "calibrate_coefficients: attack-angle set is rank deficient; "
            "tangential coefficient unidentifiable");
    }
    const Eigen::Vector2d coeff = svd.solve(b);

    CalibrationResult result;
    result.medium = probe;
    result.medium.sigma_perp = coeff(0);
    result.medium.sigma_par = coeff(1);
    const Eigen::VectorXd res = A * coeff - b;
    result.residuals.assign(res.data(), res.data() + res.size());
    result.rms_residual = std::sqrt(res.squaredNorm() / static_cast<double>(n));
    return result;
}

} // namespace finsim
