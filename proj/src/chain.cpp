#include "finsim/chain.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finsim {

namespace {

Vec2 unit_dir(double angle) { return Vec2(std::cos(angle), std::sin(angle)); }

bool force_set_finite(const ForceSet& f) {
    for (const auto& v : f.link_forces) {
        if (!v.allFinite()) return false;
    }
    for (double v : f.link_torques) {
        if (!std::isfinite(v)) return false;
    }
    for (double v : f.joint_torques) {
        if (!std::isfinite(v)) return false;
    }
    return f.base_force.allFinite() && std::isfinite(f.base_torque);
}

} // namespace

// ---------------------------------------------------------------------------
// BaseDriver
// ---------------------------------------------------------------------------

namespace {

struct PiecewiseLinear {
    std::vector<double> t;
    std::vector<double> v;

    void eval(double time, double hint, double& u, double& du, double& ddu) const {
        ddu = 0.0;
        const size_t m = t.size();
        if (m == 1) {
            u = v[0];
            du = 0.0;
            return;
        }
        if (hint >= t.back()) {
            u = v.back();
            du = 0.0;
            return;
        }
        // Segment containing the hint time; stage times at a knot then use the
        // segment of the surrounding substep, keeping every RK4 stage smooth.
        size_t j = static_cast<size_t>(
            std::upper_bound(t.begin(), t.end(), hint) - t.begin());
        j = (j == 0) ? 0 : j - 1;
        j = std::min(j, m - 2);
        const double slope = (v[j + 1] - v[j]) / (t[j + 1] - t[j]);
        u = v[j] + slope * (time - t[j]);
        du = slope;
    }
};

} // namespace

BaseDriver BaseDriver::free() { return BaseDriver(); }

BaseDriver BaseDriver::constant(double value) { return linear(value, 0.0); }

BaseDriver BaseDriver::linear(double value, double rate) {
    BaseDriver d;
    d.free_ = false;
    d.fn_ = [value, rate](double t, double& u, double& du, double& ddu) {
        u = value + rate * t;
        du = rate;
        ddu = 0.0;
    };
    return d;
}

BaseDriver BaseDriver::piecewise_linear(std::vector<double> knot_times,
                                        std::vector<double> knot_values) {
    if (knot_times.empty() || knot_times.size() != knot_values.size()) {
        throw std::invalid_argument("piecewise_linear driver: knot arrays empty or mismatched");
    }
    for (size_t i = 1; i < knot_times.size(); ++i) {
        if (!(knot_times[i] > knot_times[i - 1])) {
            throw std::invalid_argument("piecewise_linear driver: knot times must increase");
        }
    }
    BaseDriver d;
    d.free_ = false;
    d.breakpoints_.assign(knot_times.begin(), knot_times.end());
    PiecewiseLinear pl{std::move(knot_times), std::move(knot_values)};
    d.hinted_fn_ = [pl = std::move(pl)](double t, double hint, double& u, double& du,
                                        double& ddu) { pl.eval(t, hint, u, du, ddu); };
    return d;
}

BaseDriver BaseDriver::custom(std::function<void(double, double&, double&, double&)> fn,
                              std::vector<double> breakpoints) {
    BaseDriver d;
    d.free_ = false;
    d.fn_ = std::move(fn);
    d.breakpoints_ = std::move(breakpoints);
    return d;
}

void BaseDriver::eval(double t, double& u, double& du, double& ddu) const {
    eval_hinted(t, t, u, du, ddu);
}

void BaseDriver::eval_hinted(double t, double hint, double& u, double& du, double& ddu) const {
    if (free_) {
        throw std::logic_error("BaseDriver::eval on a free coordinate");
    }
    if (hinted_fn_) {
        hinted_fn_(t, hint, u, du, ddu);
    } else {
        fn_(t, u, du, ddu);
    }
}

// ---------------------------------------------------------------------------
// BaseMotion presets
// ---------------------------------------------------------------------------

BaseMotion BaseMotion::prescribed_translation(BaseDriver x, BaseDriver y, double fixed_angle) {
    BaseMotion b;
    b.x = std::move(x);
    b.y = std::move(y);
    b.angle = BaseDriver::constant(fixed_angle);
    return b;
}

BaseMotion BaseMotion::prescribed_rotation(const Vec2& pivot, BaseDriver sweep_angle) {
    BaseMotion b;
    b.x = BaseDriver::constant(pivot.x());
    b.y = BaseDriver::constant(pivot.y());
    b.angle = std::move(sweep_angle);
    return b;
}

BaseMotion BaseMotion::free_body() { return BaseMotion(); }

BaseMotion BaseMotion::pinned_rotation(const Vec2& pivot) {
    BaseMotion b;
    b.x = BaseDriver::constant(pivot.x());
    b.y = BaseDriver::constant(pivot.y());
    b.angle = BaseDriver::free();
    return b;
}

// ---------------------------------------------------------------------------
// ChainModel
// ---------------------------------------------------------------------------

ChainModel::ChainModel(ChainSpec spec) : spec_(std::move(spec)) {
    if (spec_.links.empty()) {
        throw std::invalid_argument("assemble_chain: empty link list");
    }
    for (size_t i = 0; i < spec_.links.size(); ++i) {
        const LinkSpec& l = spec_.links[i];
        if (!(l.length > 0.0) || !(l.height > 0.0) || l.mass < 0.0 || l.inertia < 0.0) {
            throw std::invalid_argument("assemble_chain: link " + std::to_string(i) +
                                        " violates l > 0, h > 0, m >= 0, I >= 0");
        }
    }
    if (spec_.joint_laws.size() + 1 != spec_.links.size()) {
        throw std::invalid_argument("assemble_chain: joint law count mismatch (need links-1 = " +
                                    std::to_string(spec_.links.size() - 1) + ", got " +
                                    std::to_string(spec_.joint_laws.size()) + ")");
    }
    for (const JointLaw& law : spec_.joint_laws) {
        if (!law.valid()) {
            throw std::invalid_argument("assemble_chain: joint law violates k_stop >= k_soft >= 0, b >= 0");
        }
    }
    if (spec_.base_joint_law) {
        if (!spec_.base.angle.is_free()) {
            throw std::invalid_argument("assemble_chain: base joint law requires a free base angle");
        }
        if (!spec_.base_joint_law->valid()) {
            throw std::invalid_argument("assemble_chain: base joint law invalid");
        }
    }
    if (spec_.base_point_mass < 0.0) {
        throw std::invalid_argument("assemble_chain: negative base point mass");
    }
    if (spec_.base.x.is_free()) free_index_.push_back(0);
    if (spec_.base.y.is_free()) free_index_.push_back(1);
    if (spec_.base.angle.is_free()) free_index_.push_back(2);
    for (int k = 0; k < joint_count(); ++k) free_index_.push_back(3 + k);
}

ChainModel assemble_chain(const ChainSpec& spec) { return ChainModel(spec); }

bool ChainModel::base_coordinate_free(int axis) const {
    switch (axis) {
        case 0: return spec_.base.x.is_free();
        case 1: return spec_.base.y.is_free();
        case 2: return spec_.base.angle.is_free();
        default: throw std::out_of_range("base axis");
    }
}

ChainState ChainModel::initial_state(double t, const Eigen::VectorXd& gamma,
                                     const Eigen::VectorXd& gamma_dot) const {
    const int J = joint_count();
    ChainState s;
    s.t = t;
    s.gamma = gamma.size() ? gamma : Eigen::VectorXd::Zero(J);
    s.gamma_dot = gamma_dot.size() ? gamma_dot : Eigen::VectorXd::Zero(J);
    if (s.gamma.size() != J || s.gamma_dot.size() != J) {
        throw std::invalid_argument("initial_state: gamma size mismatch");
    }
    double u, du, ddu;
    if (!spec_.base.x.is_free()) {
        spec_.base.x.eval(t, u, du, ddu);
        s.x0 = u;
        s.dx0 = du;
    }
    if (!spec_.base.y.is_free()) {
        spec_.base.y.eval(t, u, du, ddu);
        s.y0 = u;
        s.dy0 = du;
    }
    if (!spec_.base.angle.is_free()) {
        spec_.base.angle.eval(t, u, du, ddu);
        s.theta0 = u;
        s.dtheta0 = du;
    }
    return s;
}

ChainKinematics ChainModel::kinematics(const ChainState& state) const {
    const int L = link_count();
    ChainKinematics kin;
    kin.joints.resize(L + 1);
    kin.centers.resize(L);
    kin.tangents.resize(L);
    kin.angles.resize(L);
    kin.center_vel.resize(L);
    kin.angle_rate.resize(L);

    kin.joints[0] = Vec2(state.x0, state.y0);
    Vec2 vj(state.dx0, state.dy0);
    double phi = state.theta0;
    double w = state.dtheta0;
    for (int i = 0; i < L; ++i) {
        if (i > 0) {
            phi += state.gamma(i - 1);
            w += state.gamma_dot(i - 1);
        }
        const double l = spec_.links[i].length;
        const Vec2 e = unit_dir(phi);
        const Vec2 ep = perp(e);
        kin.angles[i] = phi;
        kin.angle_rate[i] = w;
        kin.tangents[i] = e;
        kin.centers[i] = kin.joints[i] + 0.5 * l * e;
        kin.center_vel[i] = vj + 0.5 * l * w * ep;
        kin.joints[i + 1] = kin.joints[i] + l * e;
        vj += l * w * ep;
    }
    return kin;
}

double ChainModel::length_residual(const ChainState& state) const {
    const ChainKinematics kin = kinematics(state);
    double worst = 0.0;
    for (int i = 0; i < link_count(); ++i) {
        const double l = spec_.links[i].length;
        const double d = (kin.joints[i + 1] - kin.joints[i]).norm();
        worst = std::max(worst, std::abs(d - l) / l);
    }
    return worst;
}

double ChainModel::kinetic_energy(const ChainState& state) const {
    const ChainKinematics kin = kinematics(state);
    double ke = 0.5 * spec_.base_point_mass * Vec2(state.dx0, state.dy0).squaredNorm();
    for (int i = 0; i < link_count(); ++i) {
        ke += 0.5 * spec_.links[i].mass * kin.center_vel[i].squaredNorm();
        ke += 0.5 * spec_.links[i].inertia * kin.angle_rate[i] * kin.angle_rate[i];
    }
    return ke;
}

double ChainModel::spring_energy(const ChainState& state) const {
    double pe = 0.0;
    for (int k = 0; k < joint_count(); ++k) {
        pe += spec_.joint_laws[k].spring_energy(state.gamma(k));
    }
    if (spec_.base_joint_law) {
        pe += spec_.base_joint_law->spring_energy(state.theta0);
    }
    return pe;
}

Eigen::VectorXd ChainModel::joint_law_torques(const ChainState& state) const {
    Eigen::VectorXd tau(joint_count());
    for (int k = 0; k < joint_count(); ++k) {
        tau(k) = spec_.joint_laws[k].torque(state.gamma(k), state.gamma_dot(k));
    }
    return tau;
}

struct ChainModel::DynamicsEval {
    ChainKinematics kin;
    Eigen::VectorXd full_accel;
    Eigen::VectorXd free_accel;
    Eigen::VectorXd prescribed_load;
    Vec2 mount_force = Vec2::Zero();
    double mount_torque = 0.0;
    Eigen::VectorXd law_torques;
    double power_prescribed = 0.0;
    double power_external = 0.0;
    double power_damper = 0.0;
};

Eigen::MatrixXd ChainModel::mass_matrix(const ChainState& state,
                                        const ChainKinematics& kin) const {
    const int L = link_count();
    const int n = 3 + joint_count();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    M(0, 0) += spec_.base_point_mass;
    M(1, 1) += spec_.base_point_mass;
    Eigen::Matrix<double, 2, Eigen::Dynamic> jc(2, n);
    for (int i = 0; i < L; ++i) {
        jc.setZero();
        jc.col(0) = Vec2(1.0, 0.0);
        jc.col(1) = Vec2(0.0, 1.0);
        jc.col(2) = perp(kin.centers[i] - kin.joints[0]);
        for (int k = 1; k <= i; ++k) {
            jc.col(2 + k) = perp(kin.centers[i] - kin.joints[k]);
        }
        M.noalias() += spec_.links[i].mass * jc.transpose() * jc;
        for (int a = 2; a <= 2 + i; ++a) {
            for (int b = 2; b <= 2 + i; ++b) {
                M(a, b) += spec_.links[i].inertia;
            }
        }
    }
    (void)state;
    return M;
}

ChainModel::DynamicsEval ChainModel::evaluate(const ChainState& state,
                                              const ForceSet& applied) const {
    const int L = link_count();
    const int J = joint_count();
    const int n = 3 + J;

    if (!applied.link_forces.empty() && static_cast<int>(applied.link_forces.size()) != L) {
        throw std::invalid_argument("ForceSet: link_forces size mismatch");
    }
    if (!applied.link_torques.empty() && static_cast<int>(applied.link_torques.size()) != L) {
        throw std::invalid_argument("ForceSet: link_torques size mismatch");
    }
    if (!applied.joint_torques.empty() && static_cast<int>(applied.joint_torques.size()) != J) {
        throw std::invalid_argument("ForceSet: joint_torques size mismatch");
    }
    if (!force_set_finite(applied)) {
        throw std::runtime_error("chain dynamics: NaN in applied forces");
    }

    DynamicsEval ev;
    ev.kin = kinematics(state);
    const ChainKinematics& kin = ev.kin;

    // Center Jacobians: columns are d(center)/d(x0, y0, theta0, gamma_1..J).
    // d(phi_i)/d(theta0) = 1 and d(phi_i)/d(gamma_k) = 1 for k <= i.
    std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> jc(L);
    for (int i = 0; i < L; ++i) {
        jc[i].setZero(2, n);
        jc[i].col(0) = Vec2(1.0, 0.0);
        jc[i].col(1) = Vec2(0.0, 1.0);
        jc[i].col(2) = perp(kin.centers[i] - kin.joints[0]);
        for (int k = 1; k <= i; ++k) {
            jc[i].col(2 + k) = perp(kin.centers[i] - kin.joints[k]);
        }
    }

    // Velocity-product (centripetal) accelerations of the centers.
    std::vector<Vec2> avel(L);
    {
        Vec2 aj = Vec2::Zero();
        for (int i = 0; i < L; ++i) {
            const double l = spec_.links[i].length;
            const double w2 = kin.angle_rate[i] * kin.angle_rate[i];
            avel[i] = aj - 0.5 * l * w2 * kin.tangents[i];
            aj -= l * w2 * kin.tangents[i];
        }
    }

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd bias = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd Q = Eigen::VectorXd::Zero(n);

    M(0, 0) += spec_.base_point_mass;
    M(1, 1) += spec_.base_point_mass;

    for (int i = 0; i < L; ++i) {
        const double m = spec_.links[i].mass;
        const double I = spec_.links[i].inertia;
        M.noalias() += m * jc[i].transpose() * jc[i];
        // d(phi_i)/dz is 1 on theta0 and on gamma_k for k <= i.
        for (int a = 2; a <= 2 + i; ++a) {
            for (int b = 2; b <= 2 + i; ++b) {
                M(a, b) += I;
            }
        }
        bias.noalias() += m * jc[i].transpose() * avel[i];

        if (!applied.link_forces.empty()) {
            Q.noalias() += jc[i].transpose() * applied.link_forces[i];
        }
        if (!applied.link_torques.empty()) {
            const double T = applied.link_torques[i];
            Q(2) += T;
            for (int k = 1; k <= i; ++k) Q(2 + k) += T;
        }
    }

    ev.law_torques = joint_law_torques(state);
    for (int k = 0; k < J; ++k) {
        Q(3 + k) += ev.law_torques(k);
        if (!applied.joint_torques.empty()) Q(3 + k) += applied.joint_torques[k];
    }
    Q(0) += applied.base_force.x();
    Q(1) += applied.base_force.y();
    Q(2) += applied.base_torque;
    if (spec_.base_joint_law) {
        Q(2) += spec_.base_joint_law->torque(state.theta0, state.dtheta0);
    }

    // Prescribed accelerations from the drivers.
    Eigen::VectorXd zdd = Eigen::VectorXd::Zero(n);
    {
        double u, du, ddu;
        if (!spec_.base.x.is_free()) {
            spec_.base.x.eval_hinted(state.t, state.t, u, du, ddu);
            zdd(0) = ddu;
        }
        if (!spec_.base.y.is_free()) {
            spec_.base.y.eval_hinted(state.t, state.t, u, du, ddu);
            zdd(1) = ddu;
        }
        if (!spec_.base.angle.is_free()) {
            spec_.base.angle.eval_hinted(state.t, state.t, u, du, ddu);
            zdd(2) = ddu;
        }
    }

    const int nf = dof();
    ev.free_accel.resize(nf);
    if (nf > 0) {
        Eigen::MatrixXd Mff(nf, nf);
        Eigen::VectorXd rhs(nf);
        for (int a = 0; a < nf; ++a) {
            const int za = free_index_[a];
            double r = Q(za) - bias(za);
            for (int zb = 0; zb < n; ++zb) {
                // Subtract coupling to prescribed accelerations.
                r -= M(za, zb) * zdd(zb);
            }
            rhs(a) = r;
            for (int b = 0; b < nf; ++b) {
                Mff(a, b) = M(za, free_index_[b]);
            }
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(Mff);
        const Eigen::VectorXd d = ldlt.vectorD();
        const double dmax = d.maxCoeff();
        const double dmin = d.minCoeff();
        if (!(dmin > 0.0) || dmax / dmin > 1e14) {
            throw std::runtime_error(
                "chain dynamics: singular mass matrix (condition estimate " +
                std::to_string(dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity()) +
                ")");
        }
        ev.free_accel = ldlt.solve(rhs);
        if (!ev.free_accel.allFinite()) {
            throw std::runtime_error("chain dynamics: non-finite accelerations");
        }
        for (int a = 0; a < nf; ++a) zdd(free_index_[a]) += ev.free_accel(a);
    }
    ev.full_accel = zdd;

    // Generalized drive load on prescribed coordinates: R = M zdd + bias - Q.
    ev.prescribed_load = Eigen::VectorXd::Zero(n);
    {
        const Eigen::VectorXd R = M * zdd + bias - Q;
        if (!spec_.base.x.is_free()) ev.prescribed_load(0) = R(0);
        if (!spec_.base.y.is_free()) ev.prescribed_load(1) = R(1);
        if (!spec_.base.angle.is_free()) ev.prescribed_load(2) = R(2);
    }

    // Load transmitted at the base connection, reported as chain-on-mount
    // (the force-sensor reading). Momentum balance over the links only.
    {
        Vec2 f_on_chain = Vec2::Zero();
        double t_on_chain = 0.0;
        for (int i = 0; i < L; ++i) {
            const Vec2 ci_dd = jc[i] * zdd + avel[i];
            double phi_dd = zdd(2);
            for (int k = 1; k <= i; ++k) phi_dd += zdd(2 + k);
            const Vec2 r = kin.centers[i] - kin.joints[0];
            f_on_chain += spec_.links[i].mass * ci_dd;
            t_on_chain += spec_.links[i].inertia * phi_dd +
                          spec_.links[i].mass * cross2(r, ci_dd);
            if (!applied.link_forces.empty()) {
                f_on_chain -= applied.link_forces[i];
                t_on_chain -= cross2(r, applied.link_forces[i]);
            }
            if (!applied.link_torques.empty()) {
                t_on_chain -= applied.link_torques[i];
            }
        }
        ev.mount_force = -f_on_chain;
        ev.mount_torque = -t_on_chain;
    }

    // Instantaneous power terms for the energy audit.
    {
        Eigen::VectorXd zdot(n);
        zdot(0) = state.dx0;
        zdot(1) = state.dy0;
        zdot(2) = state.dtheta0;
        zdot.tail(J) = state.gamma_dot;
        ev.power_prescribed = ev.prescribed_load.dot(zdot);
        double pext = applied.base_force.dot(Vec2(state.dx0, state.dy0)) +
                      applied.base_torque * state.dtheta0;
        for (int i = 0; i < L; ++i) {
            if (!applied.link_forces.empty()) pext += applied.link_forces[i].dot(kin.center_vel[i]);
            if (!applied.link_torques.empty()) pext += applied.link_torques[i] * kin.angle_rate[i];
        }
        for (int k = 0; k < J; ++k) {
            if (!applied.joint_torques.empty()) pext += applied.joint_torques[k] * state.gamma_dot(k);
            ev.power_damper += spec_.joint_laws[k].damping * state.gamma_dot(k) * state.gamma_dot(k);
        }
        if (spec_.base_joint_law) {
            ev.power_damper += spec_.base_joint_law->damping * state.dtheta0 * state.dtheta0;
        }
        ev.power_external = pext;
    }
    return ev;
}

AccelResult ChainModel::accelerations(const ChainState& state, const ForceSet& applied) const {
    DynamicsEval ev = evaluate(state, applied);
    AccelResult out;
    out.free_accel = std::move(ev.free_accel);
    out.full_accel = std::move(ev.full_accel);
    out.base_force = ev.mount_force;
    out.base_torque = ev.mount_torque;
    out.prescribed_load = std::move(ev.prescribed_load);
    return out;
}

Eigen::VectorXd compute_accelerations(const ChainModel& model, const ChainState& state,
                                      const ForceSet& applied) {
    return model.accelerations(state, applied).free_accel;
}

ChainState ChainModel::state_from_free(double t, const Eigen::VectorXd& qf,
                                       const Eigen::VectorXd& vf, double hint) const {
    const int J = joint_count();
    ChainState s;
    s.t = t;
    s.gamma.resize(J);
    s.gamma_dot.resize(J);
    int a = 0;
    double* pos[3] = {&s.x0, &s.y0, &s.theta0};
    double* vel[3] = {&s.dx0, &s.dy0, &s.dtheta0};
    const BaseDriver* drv[3] = {&spec_.base.x, &spec_.base.y, &spec_.base.angle};
    for (int axis = 0; axis < 3; ++axis) {
        if (drv[axis]->is_free()) {
            *pos[axis] = qf(a);
            *vel[axis] = vf(a);
            ++a;
        } else {
            double u, du, ddu;
            drv[axis]->eval_hinted(t, hint, u, du, ddu);
            *pos[axis] = u;
            *vel[axis] = du;
        }
    }
    for (int k = 0; k < J; ++k) {
        s.gamma(k) = qf(a);
        s.gamma_dot(k) = vf(a);
        ++a;
    }
    return s;
}

namespace {

void split_state(const ChainModel& model, const ChainState& s, Eigen::VectorXd& qf,
                 Eigen::VectorXd& vf) {
    const int nf = model.dof();
    qf.resize(nf);
    vf.resize(nf);
    int a = 0;
    if (model.base_coordinate_free(0)) { qf(a) = s.x0; vf(a) = s.dx0; ++a; }
    if (model.base_coordinate_free(1)) { qf(a) = s.y0; vf(a) = s.dy0; ++a; }
    if (model.base_coordinate_free(2)) { qf(a) = s.theta0; vf(a) = s.dtheta0; ++a; }
    for (int k = 0; k < model.joint_count(); ++k) {
        qf(a) = s.gamma(k);
        vf(a) = s.gamma_dot(k);
        ++a;
    }
}

} // namespace

ChainState ChainModel::step(const ChainState& state, const ForceFn& forces, double dt) const {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step: dt must be positive");
    }
    const double hint = state.t + 0.5 * dt;
    Eigen::VectorXd q, v;
    split_state(*this, state, q, v);

    auto deriv = [&](double t, const Eigen::VectorXd& qf, const Eigen::VectorXd& vf,
                     Eigen::VectorXd& ad) -> Eigen::VectorXd {
        const ChainState s = state_from_free(t, qf, vf, hint);
        const ForceSet f = forces ? forces(*this, s, kinematics(s)) : ForceSet{};
        ad = evaluate(s, f).free_accel;
        return vf;
    };

    const double h = dt;
    Eigen::VectorXd a1, a2, a3, a4;
    const Eigen::VectorXd v1 = deriv(state.t, q, v, a1);
    const Eigen::VectorXd v2 = deriv(state.t + 0.5 * h, q + 0.5 * h * v1, v + 0.5 * h * a1, a2);
    const Eigen::VectorXd v3 = deriv(state.t + 0.5 * h, q + 0.5 * h * v2, v + 0.5 * h * a2, a3);
    const Eigen::VectorXd v4 = deriv(state.t + h, q + h * v3, v + h * a3, a4);

    const Eigen::VectorXd qn = q + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
    const Eigen::VectorXd vn = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    if (!qn.allFinite() || !vn.allFinite()) {
        throw std::runtime_error("step: state became non-finite (step size too large?)");
    }
    return state_from_free(state.t + h, qn, vn, state.t + h);
}

ChainState ChainModel::cross_breakpoint(const ChainState& pre, double hint_out,
                                        double& impulse_work) const {
    impulse_work = 0.0;
    Eigen::VectorXd q, v;
    split_state(*this, pre, q, v);
    ChainState post = state_from_free(pre.t, q, v, hint_out);

    const int n = 3 + joint_count();
    Eigen::VectorXd dup = Eigen::VectorXd::Zero(n);
    dup(0) = post.dx0 - pre.dx0;
    dup(1) = post.dy0 - pre.dy0;
    dup(2) = post.dtheta0 - pre.dtheta0;
    if (dup.lpNorm<Eigen::Infinity>() < 1e-14) {
        return post;
    }

    const int nf = dof();
    if (nf > 0) {
        const Eigen::MatrixXd M = mass_matrix(pre, kinematics(pre));
        Eigen::MatrixXd Mff(nf, nf);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
        for (int a = 0; a < nf; ++a) {
            const int za = free_index_[a];
            for (int b = 0; b < nf; ++b) Mff(a, b) = M(za, free_index_[b]);
            rhs(a) = -M.row(za).dot(dup);
        }
        v += Mff.ldlt().solve(rhs);
        post = state_from_free(pre.t, q, v, hint_out);
    }
    impulse_work = kinetic_energy(post) - kinetic_energy(pre);
    return post;
}

void ChainModel::check_step_size(double dt) const {
    double k_max = 0.0;
    for (const JointLaw& law : spec_.joint_laws) {
        k_max = std::max(k_max, std::max(law.k_soft, law.k_stop));
    }
    if (spec_.base_joint_law) {
        k_max = std::max(k_max, std::max(spec_.base_joint_law->k_soft, spec_.base_joint_law->k_stop));
    }
    if (k_max <= 0.0) return;
    double i_min = std::numeric_limits<double>::infinity();
    for (const LinkSpec& l : spec_.links) i_min = std::min(i_min, l.inertia);
    if (!(i_min > 0.0)) {
        throw std::invalid_argument("run_trajectory: stiff joints on zero-inertia links");
    }
    const double bound = 0.1 * std::sqrt(i_min / k_max);
    if (!(dt < bound)) {
        throw std::invalid_argument(
            "run_trajectory: dt = " + std::to_string(dt) +
            " exceeds the stop-spring stability bound 0.1*sqrt(I_min/k_max) = " +
            std::to_string(bound));
    }
}

std::vector<double> ChainModel::breakpoints(double duration) const {
    std::vector<double> bp;
    for (const BaseDriver* d : {&spec_.base.x, &spec_.base.y, &spec_.base.angle}) {
        for (double t : d->breakpoints()) {
            if (t > 1e-12 && t < duration - 1e-12) bp.push_back(t);
        }
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             bp.end());
    return bp;
}

TrajectoryRecord ChainModel::run_trajectory(const ForceFn& forces, double duration,
                                            const IntegratorConfig& integrator,
                                            const RecordOptions& rec) const {
    if (!(integrator.dt > 0.0)) {
        throw std::invalid_argument("run_trajectory: dt must be positive");
    }
    if (!(duration > 0.0)) {
        throw std::invalid_argument("run_trajectory: duration must be positive");
    }
    if (rec.stride < 1) {
        throw std::invalid_argument("run_trajectory: record stride must be >= 1");
    }
    check_step_size(integrator.dt);
    const double dt = integrator.dt;
    const long steps = static_cast<long>(std::ceil(duration / dt - 1e-9));
    const double t_end = static_cast<double>(steps) * dt;

    const std::vector<double> bps = breakpoints(t_end);
    size_t next_bp = 0;

    TrajectoryRecord out;
    const int J = joint_count();
    out.joint_count = J;
    out.dt = dt;
    const long approx = steps / std::max(1, rec.stride) + 2;
    out.t.reserve(approx);

    std::vector<Eigen::VectorXd> gammas, gamma_dots, torques;

    ChainState state = initial_state(0.0);
    ForceSet fset = forces ? forces(*this, state, kinematics(state)) : ForceSet{};
    DynamicsEval ev = evaluate(state, fset);
    out.energy.kinetic_initial = kinetic_energy(state);
    out.energy.spring_initial = spring_energy(state);

    auto record_sample = [&](const ChainState& s, const DynamicsEval& e) {
        out.t.push_back(s.t);
        out.x0.push_back(s.x0);
        out.y0.push_back(s.y0);
        out.theta0.push_back(s.theta0);
        out.dx0.push_back(s.dx0);
        out.dy0.push_back(s.dy0);
        out.dtheta0.push_back(s.dtheta0);
        gammas.push_back(s.gamma);
        gamma_dots.push_back(s.gamma_dot);
        torques.push_back(e.law_torques);
        out.fx.push_back(e.mount_force.x());
        out.fy.push_back(e.mount_force.y());
        out.tz.push_back(e.mount_torque);
        out.max_length_residual = std::max(out.max_length_residual, length_residual(s));
    };
    record_sample(state, ev);

    for (long i = 0; i < steps; ++i) {
        const double t0 = static_cast<double>(i) * dt;
        const double t1 = static_cast<double>(i + 1) * dt;
        double t_sub = t0;
        while (t_sub < t1 - 1e-15) {
            double t_next = t1;
            while (next_bp < bps.size() && bps[next_bp] <= t_sub + 1e-15) ++next_bp;
            if (next_bp < bps.size() && bps[next_bp] < t1 - 1e-15) t_next = bps[next_bp];
            const double h = t_next - t_sub;

            ChainState snew = step(state, forces, h);
            {
                // Re-anchor to the exact grid/breakpoint time so prescribed
                // coordinates carry no accumulated round-off.
                Eigen::VectorXd q, v;
                split_state(*this, snew, q, v);
                snew = state_from_free(t_next, q, v, t_sub + 0.5 * h);
            }
            const ForceSet fnew = forces ? forces(*this, snew, kinematics(snew)) : ForceSet{};
            DynamicsEval evnew = evaluate(snew, fnew);

            out.energy.work_prescribed += 0.5 * h * (ev.power_prescribed + evnew.power_prescribed);
            out.energy.work_external += 0.5 * h * (ev.power_external + evnew.power_external);
            out.energy.damper_dissipation += 0.5 * h * (ev.power_damper + evnew.power_damper);

            state = std::move(snew);
            ev = std::move(evnew);
            t_sub = t_next;

            if (next_bp < bps.size() && std::abs(bps[next_bp] - t_next) <= 1e-12) {
                // Prescribed-velocity corner: switch branches and apply the
                // drive impulse to the free coordinates.
                double jump_work = 0.0;
                state = cross_breakpoint(state, t_next + 1e-9, jump_work);
                out.energy.work_prescribed += jump_work;
                const ForceSet fpost =
                    forces ? forces(*this, state, kinematics(state)) : ForceSet{};
                ev = evaluate(state, fpost);
                ++next_bp;
            }
        }
        if ((i + 1) % rec.stride == 0 || i + 1 == steps) {
            record_sample(state, ev);
        }
    }

    out.energy.kinetic_final = kinetic_energy(state);
    out.energy.spring_final = spring_energy(state);

    const auto m = static_cast<Eigen::Index>(out.t.size());
    out.gamma.resize(m, J);
    out.gamma_dot.resize(m, J);
    out.joint_torque.resize(m, J);
    for (Eigen::Index r = 0; r < m; ++r) {
        out.gamma.row(r) = gammas[static_cast<size_t>(r)].transpose();
        out.gamma_dot.row(r) = gamma_dots[static_cast<size_t>(r)].transpose();
        out.joint_torque.row(r) = torques[static_cast<size_t>(r)].transpose();
    }
    return out;
}

} // namespace finsim
