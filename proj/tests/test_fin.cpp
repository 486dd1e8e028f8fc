#include "finsim/fin.hpp"
#include "finsim/medium.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace finsim;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("joint_torque") {
    SUBCASE("linear spring on the soft side") {
        JointLaw law;
        law.k_soft = 0.05;
        law.k_stop = 10000.0;
        CHECK(law.torque(0.1, 0.0) == doctest::Approx(-0.005).epsilon(1e-12));
    }
    SUBCASE("undeformed joint carries no torque") {
        JointLaw law;
        law.k_soft = 0.05;
        CHECK(law.torque(0.0, 0.0) == 0.0);
    }
    SUBCASE("stop branch repels with k_stop") {
        JointLaw law;
        law.k_soft = 0.05;
        law.k_stop = 10000.0;
        CHECK(law.torque(-0.01, 0.0) == doctest::Approx(100.0).epsilon(1e-9));
    }
    SUBCASE("damping adds -b * rate") {
        JointLaw law;
        law.k_soft = 0.05;
        law.damping = 0.02;
        CHECK(law.torque(0.0, 2.0) == doctest::Approx(-0.04).epsilon(1e-12));
    }

    SUBCASE("torque is continuous with exactly one slope breakpoint") {
        JointLaw law;
        law.k_soft = 0.03;
        law.k_stop = 4.0;
        law.stop_angle = -0.05;
        const double eps = 1e-9;
        CHECK(law.torque(law.stop_angle + eps, 0.0) ==
              doctest::Approx(law.torque(law.stop_angle - eps, 0.0)).epsilon(1e-4));
        // Slopes on the two sides are k_soft and k_stop.
        auto slope = [&](double g) {
            return (law.torque(g + eps, 0.0) - law.torque(g - eps, 0.0)) / (2 * eps);
        };
        CHECK(slope(0.2) == doctest::Approx(-law.k_soft).epsilon(1e-4));
        CHECK(slope(-0.2) == doctest::Approx(-law.k_stop).epsilon(1e-4));
    }

    SUBCASE("spring energy is nonnegative and zero only when undeformed") {
        JointLaw law;
        law.k_soft = 0.03;
        law.k_stop = 5.0;
        CHECK(law.spring_energy(0.0) == 0.0);
        for (double g = -0.4; g <= 0.4; g += 0.01) {
            if (g != 0.0) CHECK(law.spring_energy(g) > 0.0);
            // Energy is the integral of -torque.
            const double h = 1e-6;
            const double dU = (law.spring_energy(g + h) - law.spring_energy(g - h)) / (2 * h);
            CHECK(dU == doctest::Approx(-law.spring_torque(g)).epsilon(1e-5));
        }
    }

    SUBCASE("mirrored law reflects the torque") {
        JointLaw law;
        law.k_soft = 0.03;
        law.k_stop = 5.0;
        law.stop_angle = -0.02;
        const JointLaw m = law.mirrored();
        for (double g = -0.3; g <= 0.3; g += 0.037) {
            CHECK(m.torque(g, 0.4) == doctest::Approx(-law.torque(-g, -0.4)).epsilon(1e-12));
            CHECK(m.spring_energy(g) == doctest::Approx(law.spring_energy(-g)).epsilon(1e-12));
        }
    }
}

TEST_CASE("build_fin_chain") {
    SUBCASE("default origami fin is a 4-link chain with 3 compliant joints") {
        FinSpec fin;
        const ChainSpec spec = build_fin_chain(fin, BaseMotion::free_body());
        CHECK(spec.links.size() == 4);
        CHECK(spec.joint_laws.size() == 3);
        CHECK_FALSE(spec.links[0].drag_active);
        for (int i = 1; i <= 3; ++i) {
            CHECK(spec.links[i].drag_active);
            CHECK(spec.links[i].length == doctest::Approx(0.020));
            CHECK(spec.links[i].mass ==
                  doctest::Approx(1200.0 * 0.020 * 0.055 * 0.002).epsilon(1e-12));
        }
    }
    SUBCASE("rigid preset uses one symmetric stiffness on every joint") {
        const FinSpec fin = fin_preset("rigid");
        const ChainSpec spec = build_fin_chain(fin, BaseMotion::free_body());
        for (const JointLaw& law : spec.joint_laws) {
            CHECK(law.k_soft == law.k_stop);
        }
    }
    SUBCASE("single-segment soft fin is a 2-link chain") {
        FinSpec fin = fin_preset("soft-2.0mm");
        fin.segments = 1;
        const ChainSpec spec = build_fin_chain(fin, BaseMotion::free_body());
        CHECK(spec.links.size() == 2);
        CHECK(spec.joint_laws.size() == 1);
    }
    SUBCASE("zero segments rejected") {
        FinSpec fin;
        fin.segments = 0;
        CHECK_THROWS_AS(build_fin_chain(fin, BaseMotion::free_body()), std::invalid_argument);
    }
    SUBCASE("origami kind requires an actual stop") {
        FinSpec fin;
        fin.k_stop = fin.k_soft;
        CHECK_THROWS_AS(build_fin_chain(fin, BaseMotion::free_body()), std::invalid_argument);
    }
    SUBCASE("presets cover the four test articles") {
        for (const char* name : kFinPresetNames) {
            const FinSpec fin = fin_preset(name);
            CHECK_NOTHROW(fin.validate());
        }
        CHECK_THROWS_AS(fin_preset("bogus"), std::invalid_argument);
    }
}

TEST_CASE("rigid stiffness limit matches the rigid-plate integral") {
    // Symmetric k = 1e4 joints make the fin a rigid plate; its steady drag
    // force must match the closed-form plate value. The stiff stop bounds the
    // step size, so this runs a short burst at a very small dt.
    FinSpec fin;
    fin.kind = FinKind::Rigid;
    fin.k_soft = 1e4;
    fin.k_stop = 1e4;
    fin.joint_damping = 1e-4;

    MediumModel medium;
    medium.sigma_perp = 1400.0;
    medium.sigma_par = 300.0;

    const double v = 0.03;
    const ChainSpec spec = build_fin_chain(
        fin, BaseMotion::prescribed_translation(BaseDriver::constant(0.0),
                                                BaseDriver::linear(0.0, v), kPi));
    const ChainModel model(spec);

    const ForceFn forces = [&](const ChainModel& m, const ChainState&, const ChainKinematics& kin) {
        ForceSet f;
        f.link_forces.assign(m.link_count(), Vec2::Zero());
        for (int i = 0; i < m.link_count(); ++i) {
            if (!m.spec().links[i].drag_active) continue;
            const double area = m.spec().links[i].length * m.spec().links[i].height;
            const SegmentKinematics sk = make_segment_kinematics(
                kin.centers[i], kin.tangents[i], kin.center_vel[i], area);
            f.link_forces[i] = segment_force(medium, sk).force;
        }
        return f;
    };

    IntegratorConfig integ;
    integ.dt = 2.5e-7;
    const TrajectoryRecord rec = model.run_trajectory(forces, 0.02, integ, {100});

    double mean = 0.0;
    int count = 0;
    for (size_t i = rec.samples() / 2; i < rec.samples(); ++i) {
        mean += std::abs(rec.fy[i]);
        ++count;
    }
    mean /= count;

    const double rigid = medium.sigma_perp * 0.060 * 0.055;
    CHECK(std::abs(mean - rigid) / rigid < 0.01);
}

TEST_CASE("segment attack angle complements the twist in the drag frame") {
    // Base tangent along +x, motion along +y: a single positive twist gamma
    // leaves the segment at attack angle 90 deg - gamma.
    FinSpec fin;
    fin.segments = 1;
    const ChainSpec spec = build_fin_chain(
        fin, BaseMotion::prescribed_translation(BaseDriver::constant(0.0),
                                                BaseDriver::linear(0.0, 0.03), 0.0));
    const ChainModel model(spec);
    Eigen::VectorXd gamma(1), gamma_dot(1);
    gamma << 0.25;
    gamma_dot << 0.0;
    const ChainState state = model.initial_state(0.0, gamma, gamma_dot);
    const ChainKinematics kin = model.kinematics(state);
    const SegmentKinematics sk = make_segment_kinematics(
        kin.centers[1], kin.tangents[1], Vec2(0.0, 0.03), 1.0);
    CHECK(sk.attack_angle + gamma(0) == doctest::Approx(kPi / 2).epsilon(1e-12));
}
