#pragma once

#include <cmath>

namespace finsim {

/// Asymmetric torsional spring-damper law with a one-sided stop.
///
/// Positive twist is the permitted ("soft") bending direction. Below
/// `stop_angle` the stop branch engages with stiffness `k_stop`. The torque
/// is continuous at the breakpoint and piecewise linear elsewhere:
///
///   tau = -k_soft*g - b*gd                                   for g >= stop_angle
///   tau = -k_soft*stop_angle - k_stop*(g - stop_angle) - b*gd  otherwise
///
/// A symmetric joint is expressed as k_soft == k_stop (single linear branch).
struct JointLaw {
    double k_soft = 0.0;     ///< N*m/rad, stiffness in the permitted direction
    double k_stop = 10000.0; ///< N*m/rad, stop stiffness
    double damping = 0.0;    ///< N*m*s/rad
    double stop_angle = 0.0; ///< rad, twist at which the stop engages
    int orientation = +1;    ///< -1 flips the permitted bending direction

    /// Spring part of the torque (no damping).
    double spring_torque(double gamma) const {
        const double g = orientation * gamma;
        double tau;
        if (g >= stop_angle) {
            tau = -k_soft * g;
        } else {
            tau = -k_soft * stop_angle - k_stop * (g - stop_angle);
        }
        return orientation * tau;
    }

    /// Total joint torque for twist gamma [rad] and rate gamma_dot [rad/s].
    double torque(double gamma, double gamma_dot) const {
        return spring_torque(gamma) - damping * gamma_dot;
    }

    /// Elastic energy stored in the spring branch.
    double spring_energy(double gamma) const {
        const double g = orientation * gamma;
        if (g >= stop_angle) {
            return 0.5 * k_soft * g * g;
        }
        const double d = g - stop_angle;
        return 0.5 * k_soft * stop_angle * stop_angle + k_soft * stop_angle * d +
               0.5 * k_stop * d * d;
    }

    /// Law for the physically mirrored joint (stop on the opposite side).
    JointLaw mirrored() const {
        JointLaw m = *this;
        m.orientation = -orientation;
        return m;
    }

    bool valid() const {
        return k_soft >= 0.0 && k_stop >= k_soft && damping >= 0.0 &&
               std::isfinite(stop_angle) && (orientation == 1 || orientation == -1);
    }
};

} // namespace finsim
