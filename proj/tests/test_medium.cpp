#include "finsim/medium.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace finsim;

namespace {
constexpr double kPi = std::numbers::pi;

SegmentKinematics kin_at(double tangent_angle, const Vec2& vel, double area) {
    return make_segment_kinematics(Vec2::Zero(), Vec2(std::cos(tangent_angle), std::sin(tangent_angle)),
                                   vel, area);
}
} // namespace

TEST_CASE("segment_force examples") {
    MediumModel medium;
    medium.sigma_perp = 1000.0;
    medium.sigma_par = 300.0;
    medium.v_eps = 1e-3;

    SUBCASE("face-on incidence gives the full normal stress opposing motion") {
        // Tangent along +x, motion along +y at 30 mm/s: attack angle 90 deg.
        const SegmentKinematics kin = kin_at(0.0, Vec2(0.0, 0.03), 0.0011);
        CHECK(kin.attack_angle == doctest::Approx(kPi / 2));
        const SegmentLoad load = segment_force(medium, kin);
        CHECK(load.force.y() == doctest::Approx(-1.1).epsilon(1e-9));
        CHECK(load.force.x() == doctest::Approx(0.0));
        CHECK(load.torque == 0.0);
    }
    SUBCASE("zero velocity gives zero force") {
        const SegmentKinematics kin = kin_at(0.3, Vec2::Zero(), 0.0011);
        const SegmentLoad load = segment_force(medium, kin);
        CHECK(load.force.norm() == 0.0);
    }
    SUBCASE("edge-on motion sees only the tangential stress") {
        const SegmentKinematics kin = kin_at(kPi / 2, Vec2(0.0, 0.03), 0.0011);
        CHECK(kin.attack_angle == doctest::Approx(0.0));
        const SegmentLoad load = segment_force(medium, kin);
        CHECK(load.force.x() == doctest::Approx(0.0));
        CHECK(load.force.y() == doctest::Approx(-300.0 * 0.0011).epsilon(1e-9));
    }
    SUBCASE("zero-length tangent rejected") {
        CHECK_THROWS_AS(make_segment_kinematics(Vec2::Zero(), Vec2::Zero(), Vec2(0, 1), 1.0),
                        std::invalid_argument);
    }
    SUBCASE("non-finite velocity rejected") {
        SegmentKinematics kin = kin_at(0.0, Vec2(0, 0.03), 1.0);
        kin.velocity.x() = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(segment_force(medium, kin), std::invalid_argument);
    }
}

TEST_CASE("plate_integral_force closed forms") {
    MediumModel medium;
    medium.sigma_perp = 1000.0;
    medium.sigma_par = 300.0;
    medium.v_eps = 1e-6; // keep regularization negligible for the identities

    const PlateGeometry plate{0.060, 0.055};

    SUBCASE("face-on drag equals sigma_perp * L * H") {
        PlateMotion motion;
        motion.plate_angle = 0.0;
        motion.origin_velocity = Vec2(0.0, 0.03);
        const PlateLoad load = plate_integral_force(medium, plate, motion, 64);
        CHECK(load.force.y() == doctest::Approx(-1000.0 * 0.060 * 0.055).epsilon(1e-10));
        CHECK(std::abs(load.force.x()) < 1e-12);
    }

    SUBCASE("uniform translation equals one segment scaled by total area") {
        PlateMotion motion;
        motion.plate_angle = 0.4;
        motion.origin_velocity = Vec2(0.011, 0.027);
        const PlateLoad whole = plate_integral_force(medium, plate, motion, 64);
        const SegmentKinematics kin = kin_at(0.4, motion.origin_velocity, plate.length * plate.height);
        const SegmentLoad one = segment_force(medium, kin);
        CHECK((whole.force - one.force).norm() < 1e-10 * one.force.norm());
    }

    SUBCASE("rotation about the proximal edge: torque sigma_perp * H * L^2 / 2") {
        PlateMotion motion;
        motion.plate_angle = 0.0;
        motion.angular_velocity = 60.0 * kPi / 180.0;
        const PlateLoad load = plate_integral_force(medium, plate, motion, 64);
        const double expected = -1000.0 * 0.055 * 0.060 * 0.060 / 2.0;
        CHECK(load.torque == doctest::Approx(expected).epsilon(1e-8));

        // Independent quadrature of the same integral on a fine midpoint grid.
        const int m = 4000;
        const double dl = plate.length / m;
        double torque = 0.0;
        for (int k = 0; k < m; ++k) {
            const double x = (k + 0.5) * dl;
            const double f = 1000.0 * 0.055 * dl * std::tanh(motion.angular_velocity * x / medium.v_eps);
            torque -= f * x;
        }
        CHECK(load.torque == doctest::Approx(torque).epsilon(1e-6));
    }

    SUBCASE("45-degree attack: drag component carries both stresses") {
        MediumModel m45 = medium;
        m45.v_eps = 1e-3;
        PlateMotion motion;
        motion.plate_angle = kPi / 4.0; // velocity +y, tangent at 45 deg from it
        motion.origin_velocity = Vec2(0.0, 0.03);
        const PlateLoad load = plate_integral_force(m45, plate, motion, 64);
        const double a = plate.length * plate.height;
        const double s = std::sin(kPi / 4.0);
        const double expected = a * (1000.0 * s + 300.0 * s); // both opposing motion
        CHECK(-load.force.y() == doctest::Approx(expected).epsilon(1e-6));
    }

    SUBCASE("degenerate geometry and too-coarse quadrature rejected") {
        CHECK_THROWS_AS(plate_integral_force(medium, PlateGeometry{0.0, 0.05}, PlateMotion{}, 64),
                        std::invalid_argument);
        CHECK_THROWS_AS(plate_integral_force(medium, plate, PlateMotion{}, 10),
                        std::invalid_argument);
    }
}

TEST_CASE("medium properties") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> spd(-0.08, 0.08);

    SUBCASE("drag never feeds power into the segment") {
        for (int trial = 0; trial < 200; ++trial) {
            MediumModel medium;
            medium.sigma_perp = 1500.0;
            medium.sigma_par = 400.0;
            medium.mode = (trial % 2) ? CoefficientMode::SineScaled : CoefficientMode::Constant;
            const SegmentKinematics kin = kin_at(ang(rng), Vec2(spd(rng), spd(rng)), 0.002);
            const SegmentLoad load = segment_force(medium, kin);
            CHECK(load.force.dot(kin.velocity) <= 1e-15);
        }
    }

    SUBCASE("speed insensitivity across the tested speeds") {
        MediumModel medium;
        medium.sigma_perp = 1000.0;
        medium.sigma_par = 300.0;
        medium.v_eps = 1e-3;
        double fmin = 1e300, fmax = 0.0;
        for (double mm : {10.0, 20.0, 30.0, 40.0, 50.0}) {
            const SegmentKinematics kin = kin_at(kPi / 4.0, Vec2(0.0, mm * 1e-3), 0.0011);
            const double f = segment_force(medium, kin).force.norm();
            fmin = std::min(fmin, f);
            fmax = std::max(fmax, f);
        }
        CHECK((fmax - fmin) / fmax < 1e-3);
    }

    SUBCASE("force is continuous through rest and bounded by the stress scale") {
        MediumModel medium;
        medium.sigma_perp = 1000.0;
        medium.sigma_par = 300.0;
        Vec2 prev = Vec2::Zero();
        bool first = true;
        for (double v = -3e-3; v <= 3e-3; v += 1e-5) {
            const SegmentKinematics kin = kin_at(0.4, Vec2(0.6 * v, v), 0.0011);
            const Vec2 f = segment_force(medium, kin).force;
            CHECK(std::abs(f.dot(kin.normal)) <= 1000.0 * 0.0011 + 1e-12);
            CHECK(std::abs(f.dot(kin.tangent)) <= 300.0 * 0.0011 + 1e-12);
            if (!first) CHECK((f - prev).norm() < 0.08); // Lipschitz in v through 0
            prev = f;
            first = false;
        }
    }

    SUBCASE("frame equivariance under common rotations") {
        MediumModel medium;
        medium.sigma_perp = 1200.0;
        medium.sigma_par = 250.0;
        for (int trial = 0; trial < 100; ++trial) {
            const double t0 = ang(rng);
            const Vec2 vel(spd(rng), spd(rng));
            const double rot = ang(rng);
            const Eigen::Rotation2D<double> R(rot);

            const SegmentKinematics kin = kin_at(t0, vel, 0.0011);
            const SegmentKinematics kin_rot = kin_at(t0 + rot, R * vel, 0.0011);
            const Vec2 f = segment_force(medium, kin).force;
            const Vec2 f_rot = segment_force(medium, kin_rot).force;
            CHECK((R * f - f_rot).norm() < 1e-12 * std::max(1.0, f.norm()));
        }
    }
}

TEST_CASE("calibrate_coefficients") {
    const double area = 0.060 * 0.055;
    const double speed = 0.03;

    auto steady_force = [&](double sp, double st, double theta) {
        MediumModel m;
        m.sigma_perp = sp;
        m.sigma_par = st;
        const double sn = std::sin(theta), ct = std::cos(theta);
        return sp * area * m.smoothed_sign(speed * sn) * sn +
               st * area * m.smoothed_sign(speed * ct) * ct;
    };

    SUBCASE("round trip on clean synthetic samples") {
        std::vector<DragSample> samples;
        for (double deg : {0.0, 45.0, 90.0}) {
            const double th = deg * kPi / 180.0;
            samples.push_back({th, speed, area, steady_force(1400.0, 300.0, th)});
        }
        const CalibrationResult fit = calibrate_coefficients(samples);
        CHECK(fit.medium.sigma_perp == doctest::Approx(1400.0).epsilon(1e-3));
        CHECK(fit.medium.sigma_par == doctest::Approx(300.0).epsilon(1e-3));
        CHECK(fit.rms_residual < 1e-9);
    }

    SUBCASE("single attack angle is rank deficient") {
        std::vector<DragSample> samples(3);
        for (auto& s : samples) {
            s.attack_angle = kPi / 2;
            s.speed = speed;
            s.area = area;
            s.drag_force = 1400.0 * area;
        }
        CHECK_THROWS_WITH_AS(calibrate_coefficients(samples),
                             doctest::Contains("unidentifiable"), std::invalid_argument);
    }

    SUBCASE("1 percent measurement noise keeps coefficients within 5 percent") {
        for (int seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(static_cast<uint64_t>(seed));
            std::normal_distribution<double> noise(0.0, 0.01);
            std::vector<DragSample> samples;
            for (double deg : {0.0, 30.0, 45.0, 60.0, 90.0}) {
                const double th = deg * kPi / 180.0;
                const double f = steady_force(1400.0, 300.0, th);
                for (int rep = 0; rep < 3; ++rep) { // one sample per steady cycle
                    samples.push_back({th, speed, area, f * (1.0 + noise(rng))});
                }
            }
            const CalibrationResult fit = calibrate_coefficients(samples);
            CHECK(std::abs(fit.medium.sigma_perp - 1400.0) / 1400.0 < 0.05);
            CHECK(std::abs(fit.medium.sigma_par - 300.0) / 300.0 < 0.05);
        }
    }
}
