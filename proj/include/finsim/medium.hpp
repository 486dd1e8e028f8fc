#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace finsim {

using Vec2 = Eigen::Vector2d;

/// Rotate a vector by +90 degrees.
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

/// 2D scalar cross product a x b.
inline double cross2(const Vec2& a, const Vec2& b) {
    return a.x() * b.y() - a.y() * b.x();
}

enum class CoefficientMode {
    Constant,  ///< stresses applied as-is; projection comes from the smoothed signs
    SineScaled ///< normal stress scaled by |sin(attack)|, tangential by |cos(attack)|
};

/// Granular resistive-stress model for plate elements.
///
/// Forces per element are stress * area with a tanh-regularized sign of the
/// velocity component, which makes the force speed-insensitive once the
/// element moves faster than a few v_eps and continuous through rest.
struct MediumModel {
    double sigma_perp = 2.0;        ///< N/m^2, normal resistive stress
    double sigma_par = 0.4;         ///< N/m^2, tangential resistive stress
    double v_eps = 1e-3;            ///< m/s, velocity regularization scale
    CoefficientMode mode = CoefficientMode::Constant;
    double particle_diameter = 0.004; ///< m, metadata only
    double depth = 0.05;              ///< m, metadata only

    /// Smoothed sign s(u) = tanh(u / v_eps).
    double smoothed_sign(double u) const { return std::tanh(u / v_eps); }

    bool valid() const { return sigma_perp > 0.0 && sigma_par >= 0.0 && v_eps > 0.0; }

    void validate() const {
        if (!valid()) {
            throw std::invalid_argument(
                "medium: requires sigma_perp > 0, sigma_par >= 0, v_eps > 0");
        }
    }
};

/// Instantaneous state of one plate element.
struct SegmentKinematics {
    Vec2 center = Vec2::Zero();   ///< m
    Vec2 tangent = Vec2::UnitX(); ///< unit vector along the plate
    Vec2 normal = Vec2::UnitY();  ///< unit vector, perp(tangent)
    Vec2 velocity = Vec2::Zero(); ///< m/s of the element center
    double area = 0.0;            ///< m^2, element area (length * height)
    double attack_angle = 0.0;    ///< rad in [0, pi], angle between tangent and velocity
};

/// Build kinematics from center/tangent/velocity; normal and attack angle derived.
SegmentKinematics make_segment_kinematics(const Vec2& center, const Vec2& tangent,
                                          const Vec2& velocity, double area);

struct SegmentLoad {
    Vec2 force = Vec2::Zero(); ///< N, acting at the element center
    double torque = 0.0;       ///< N*m about the element center (zero by model)
};

/// Resistive force on a single plate element.
SegmentLoad segment_force(const MediumModel& medium, const SegmentKinematics& kin);

struct PlateGeometry {
    double length = 0.0; ///< m, in-plane extent
    double height = 0.0; ///< m, into-page extent
};

/// Rigid-body motion of a plate: the proximal edge sits at `origin`, the plate
/// extends along angle `plate_angle`, translates with `origin_velocity` and
/// spins at `angular_velocity` about the origin.
struct PlateMotion {
    Vec2 origin = Vec2::Zero();
    double plate_angle = 0.0;        ///< rad from +x
    Vec2 origin_velocity = Vec2::Zero();
    double angular_velocity = 0.0;   ///< rad/s
};

struct PlateLoad {
    Vec2 force = Vec2::Zero();
    double torque = 0.0; ///< N*m about the plate origin
};

/// Net resistive load on a rigid plate, integrated with `strips` midpoint
/// elements along the length (strips >= 20).
PlateLoad plate_integral_force(const MediumModel& medium, const PlateGeometry& plate,
                               const PlateMotion& motion, int strips = 40);

/// One steady-state rigid-plate drag measurement.
struct DragSample {
    double attack_angle = 0.0; ///< rad in [0, pi]
    double speed = 0.0;        ///< m/s
    double area = 0.0;         ///< m^2, full plate area
    double drag_force = 0.0;   ///< N, steady force component opposing motion
};

struct CalibrationResult {
    MediumModel medium;
    std::vector<double> residuals; ///< per-sample fit residual, N
    double rms_residual = 0.0;
};

/// Least-squares fit of sigma_perp / sigma_par from steady drag measurements
/// at multiple attack angles. The angle set must make both coefficients
/// identifiable (e.g. one near-face-on and one near-edge-on sample).
CalibrationResult calibrate_coefficients(const std::vector<DragSample>& samples,
                                         double v_eps = 1e-3,
                                         CoefficientMode mode = CoefficientMode::Constant);

} // namespace finsim
