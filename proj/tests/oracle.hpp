#pragma once

// Test-only Lagrangian-energy oracle for planar serial chains.
//
// Accelerations are derived from the kinetic energy alone via automatic
// differentiation:
//
//   M qdd = Q + dT/dq - (d2T/dv dq) v - d2T/dv dt,   M = d2T/dv dv
//
// The scalar type carries three nilpotent directions (two perturbations a, b
// plus the motion direction tau), so T and the position Jacobians come out of
// plain forward kinematics with no hand-derived velocity recursions. This is
// deliberately a different route than the library's Jacobian assembly.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace oracle {

// Truncated polynomial over nilpotents e_a, e_b, e_tau (squares vanish).
// Component index is a 3-bit subset: bit0 = a, bit1 = b, bit2 = tau.
struct HD3 {
    std::array<double, 8> c{};

    HD3() = default;
    explicit HD3(double v) { c[0] = v; }

    static HD3 from(double value, double da, double db, double dtau, double dab = 0.0,
                    double datau = 0.0, double dbtau = 0.0, double dabtau = 0.0) {
        HD3 x;
        x.c = {value, da, db, dab, dtau, datau, dbtau, dabtau};
        return x;
    }

    double value() const { return c[0]; }
    double d_a() const { return c[1]; }
    double d_ab() const { return c[3]; }
    double d_a_tau() const { return c[5]; }
    double d_ab_tau() const { return c[7]; }

    HD3 operator+(const HD3& o) const {
        HD3 r;
        for (int i = 0; i < 8; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    HD3 operator-(const HD3& o) const {
        HD3 r;
        for (int i = 0; i < 8; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }
    HD3 operator*(const HD3& o) const {
        HD3 r;
        for (int s = 0; s < 8; ++s) {
            // Subset convolution: disjoint unions only.
            for (int t = s;; t = (t - 1) & s) {
                r.c[s] += c[t] * o.c[s ^ t];
                if (t == 0) break;
            }
        }
        return r;
    }
    HD3 operator*(double k) const {
        HD3 r;
        for (int i = 0; i < 8; ++i) r.c[i] = c[i] * k;
        return r;
    }
    HD3& operator+=(const HD3& o) {
        for (int i = 0; i < 8; ++i) c[i] += o.c[i];
        return *this;
    }
};

inline HD3 operator*(double k, const HD3& x) { return x * k; }

// f applied to a truncated polynomial, given f and its first three
// derivatives at the value part.
inline HD3 apply_taylor(const HD3& x, double f0, double f1, double f2, double f3) {
    HD3 n = x;
    n.c[0] = 0.0;
    const HD3 n2 = n * n;
    const HD3 n3 = n2 * n;
    HD3 r = n3 * (f3 / 6.0);
    r += n2 * (f2 / 2.0);
    r += n * f1;
    r.c[0] += f0;
    return r;
}

inline HD3 sin(const HD3& x) {
    const double s = std::sin(x.c[0]), c = std::cos(x.c[0]);
    return apply_taylor(x, s, c, -s, -c);
}
inline HD3 cos(const HD3& x) {
    const double s = std::sin(x.c[0]), c = std::cos(x.c[0]);
    return apply_taylor(x, c, -s, -c, s);
}

// ---------------------------------------------------------------------------

struct OracleLink {
    double length = 0.0;
    double mass = 0.0;
    double inertia = 0.0;
};

// Base coordinate: either the index of a free generalized coordinate or a
// local Taylor expansion (u, du, ddu) of the prescribed drive at the current
// time (third derivative assumed zero, as for piecewise-linear drives).
struct OracleCoord {
    bool free = true;
    int index = -1;
    double u = 0.0, du = 0.0, ddu = 0.0;
};

struct OracleChain {
    std::vector<OracleLink> links;
    OracleCoord base_x, base_y, base_angle;
    double base_point_mass = 0.0;
    int free_count = 0; // free base coordinates + (links-1) joint twists
};

struct OraclePoints {
    std::vector<std::array<HD3, 2>> joints;  // links+1
    std::vector<std::array<HD3, 2>> centers; // links
    std::vector<HD3> angles;                 // links
};

enum class Pert { None, Position, Velocity, Time };

struct PertDir {
    Pert kind = Pert::None;
    int coord = -1;
};

// Forward kinematics over HD3. q/v hold the free coordinates, base frees
// first, then the joint twists. Direction tau carries the motion (q + v*tau),
// directions a/b carry the requested perturbations.
inline OraclePoints fk(const OracleChain& chain, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& v, PertDir da, PertDir db) {
    const int L = static_cast<int>(chain.links.size());

    auto free_coord = [&](int idx) {
        const double dqa = (da.kind == Pert::Position && da.coord == idx) ? 1.0 : 0.0;
        const double dqb = (db.kind == Pert::Position && db.coord == idx) ? 1.0 : 0.0;
        const double dva = (da.kind == Pert::Velocity && da.coord == idx) ? 1.0 : 0.0;
        const double dvb = (db.kind == Pert::Velocity && db.coord == idx) ? 1.0 : 0.0;
        // value + dq e + v tau; the tau coefficient depends on the velocity
        // perturbations, giving the e*tau cross terms.
        return HD3::from(q(idx), dqa, dqb, v(idx), 0.0, dva, dvb, 0.0);
    };
    auto prescribed_coord = [&](const OracleCoord& c) {
        const double ta = (da.kind == Pert::Time) ? 1.0 : 0.0;
        const double tb = (db.kind == Pert::Time) ? 1.0 : 0.0;
        const HD3 t_local = HD3::from(0.0, ta, tb, 1.0, 0, 0, 0, 0);
        return apply_taylor(t_local, c.u, c.du, c.ddu, 0.0);
    };
    auto coord = [&](const OracleCoord& c) {
        return c.free ? free_coord(c.index) : prescribed_coord(c);
    };

    OraclePoints pts;
    pts.joints.resize(L + 1);
    pts.centers.resize(L);
    pts.angles.resize(L);

    pts.joints[0] = {coord(chain.base_x), coord(chain.base_y)};
    HD3 phi = coord(chain.base_angle);
    int joint_free_base = 0;
    for (const OracleCoord* c : {&chain.base_x, &chain.base_y, &chain.base_angle}) {
        if (c->free) ++joint_free_base;
    }
    for (int i = 0; i < L; ++i) {
        if (i > 0) phi += free_coord(joint_free_base + i - 1);
        pts.angles[i] = phi;
        const HD3 cs = cos(phi), sn = sin(phi);
        const double l = chain.links[i].length;
        pts.centers[i] = {pts.joints[i][0] + cs * (0.5 * l), pts.joints[i][1] + sn * (0.5 * l)};
        pts.joints[i + 1] = {pts.joints[i][0] + cs * l, pts.joints[i][1] + sn * l};
    }
    return pts;
}

// Kinetic energy as an HD3 scalar. The tau direction of a position is its
// velocity along the motion.
inline HD3 kinetic_energy(const OracleChain& chain, const OraclePoints& pts) {
    auto tau_part = [](const HD3& x) {
        // Velocity of x: shift the tau components down one level.
        HD3 v;
        v.c[0] = x.c[4];
        v.c[1] = x.c[5];
        v.c[2] = x.c[6];
        v.c[3] = x.c[7];
        return v;
    };
    HD3 T(0.0);
    const HD3 vbx = tau_part(pts.joints[0][0]);
    const HD3 vby = tau_part(pts.joints[0][1]);
    T += (vbx * vbx + vby * vby) * (0.5 * chain.base_point_mass);
    for (size_t i = 0; i < chain.links.size(); ++i) {
        const HD3 vx = tau_part(pts.centers[i][0]);
        const HD3 vy = tau_part(pts.centers[i][1]);
        const HD3 w = tau_part(pts.angles[i]);
        T += (vx * vx + vy * vy) * (0.5 * chain.links[i].mass);
        T += (w * w) * (0.5 * chain.links[i].inertia);
    }
    return T;
}

// External world-frame point forces plus per-coordinate generalized torques.
struct OracleLoads {
    std::vector<std::array<double, 2>> center_forces; // one per link, may be empty
    std::vector<double> link_torques;                 // about centers, may be empty
    Eigen::VectorXd generalized;                      // size = free_count (joint/base torques)
};

inline Eigen::VectorXd accelerations(const OracleChain& chain, const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& v, const OracleLoads& loads) {
    const int n = chain.free_count;
    Eigen::MatrixXd M(n, n);
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd G(n), S(n);

    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            const auto pts = fk(chain, q, v, {Pert::Velocity, j}, {Pert::Position, k});
            const HD3 T = kinetic_energy(chain, pts);
            H(j, k) = T.d_ab();
        }
        for (int k = j; k < n; ++k) {
            const auto pts = fk(chain, q, v, {Pert::Velocity, j}, {Pert::Velocity, k});
            const HD3 T = kinetic_energy(chain, pts);
            M(j, k) = T.d_ab();
            M(k, j) = M(j, k);
        }
        {
            const auto pts = fk(chain, q, v, {Pert::Position, j}, {Pert::None, -1});
            G(j) = kinetic_energy(chain, pts).d_a();
        }
        {
            const auto pts = fk(chain, q, v, {Pert::Velocity, j}, {Pert::Time, -1});
            S(j) = kinetic_energy(chain, pts).d_ab();
        }
    }

    Eigen::VectorXd Q = loads.generalized.size() ? loads.generalized : Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        if (!loads.center_forces.empty() || !loads.link_torques.empty()) {
            const auto pts = fk(chain, q, v, {Pert::Position, j}, {Pert::None, -1});
            for (size_t i = 0; i < chain.links.size(); ++i) {
                if (!loads.center_forces.empty()) {
                    Q(j) += loads.center_forces[i][0] * pts.centers[i][0].d_a() +
                            loads.center_forces[i][1] * pts.centers[i][1].d_a();
                }
                if (!loads.link_torques.empty()) {
                    Q(j) += loads.link_torques[i] * pts.angles[i].d_a();
                }
            }
        }
    }

    return M.ldlt().solve(Q + G - H * v - S);
}

} // namespace oracle
