#include "finsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace finsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) fail(path, "unknown key '" + key + "'");
    }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

MediumModel parse_medium(const json& obj) {
    check_keys(obj, "medium",
               {"sigma_perp", "sigma_par", "v_eps", "mode", "particle_diameter", "depth"});
    MediumModel m;
    m.sigma_perp = get_number(obj, "medium", "sigma_perp", m.sigma_perp);
    m.sigma_par = get_number(obj, "medium", "sigma_par", m.sigma_par);
    m.v_eps = get_number(obj, "medium", "v_eps", m.v_eps);
    m.particle_diameter = get_number(obj, "medium", "particle_diameter", m.particle_diameter);
    m.depth = get_number(obj, "medium", "depth", m.depth);
    const std::string mode = get_string(obj, "medium", "mode", "constant");
    if (mode == "constant") {
        m.mode = CoefficientMode::Constant;
    } else if (mode == "sine_scaled") {
        m.mode = CoefficientMode::SineScaled;
    } else {
        fail("medium.mode", "must be 'constant' or 'sine_scaled'");
    }
    if (!m.valid()) fail("medium", "requires sigma_perp > 0, sigma_par >= 0, v_eps > 0");
    return m;
}

FinKind parse_kind(const std::string& kind) {
    if (kind == "rigid") return FinKind::Rigid;
    if (kind == "soft") return FinKind::Soft;
    if (kind == "origami") return FinKind::Origami;
    fail("fin.kind", "must be 'rigid', 'soft' or 'origami'");
}

const char* kind_name(FinKind kind) {
    switch (kind) {
        case FinKind::Rigid: return "rigid";
        case FinKind::Soft: return "soft";
        case FinKind::Origami: return "origami";
    }
    return "origami";
}

FinSpec parse_fin(const json& obj) {
    check_keys(obj, "fin",
               {"preset", "kind", "segments", "plate_length", "plate_height", "thickness",
                "density", "rod_length", "rod_diameter", "rod_density", "k_soft", "k_stop",
                "damping", "stop_angle_deg"});
    FinSpec fin;
    if (obj.contains("preset")) {
        fin = fin_preset(get_string(obj, "fin", "preset", ""));
    }
    if (obj.contains("kind")) fin.kind = parse_kind(get_string(obj, "fin", "kind", ""));
    fin.segments = get_int(obj, "fin", "segments", fin.segments);
    fin.plate_length = get_number(obj, "fin", "plate_length", fin.plate_length);
    fin.plate_height = get_number(obj, "fin", "plate_height", fin.plate_height);
    fin.thickness = get_number(obj, "fin", "thickness", fin.thickness);
    fin.density = get_number(obj, "fin", "density", fin.density);
    fin.rod_length = get_number(obj, "fin", "rod_length", fin.rod_length);
    fin.rod_diameter = get_number(obj, "fin", "rod_diameter", fin.rod_diameter);
    fin.rod_density = get_number(obj, "fin", "rod_density", fin.rod_density);
    fin.k_soft = get_number(obj, "fin", "k_soft", fin.k_soft);
    fin.k_stop = get_number(obj, "fin", "k_stop", fin.k_stop);
    fin.joint_damping = get_number(obj, "fin", "damping", fin.joint_damping);
    fin.stop_angle_deg = get_number(obj, "fin", "stop_angle_deg", fin.stop_angle_deg);
    try {
        fin.validate();
    } catch (const std::invalid_argument& e) {
        fail("fin", e.what());
    }
    return fin;
}

RobotSpec parse_robot(const json& obj, const FinSpec& fin) {
    check_keys(obj, "robot",
               {"body_mass", "cart_mass", "body_height", "body_width", "body_length"});
    RobotSpec robot;
    robot.fin = fin;
    robot.body_mass = get_number(obj, "robot", "body_mass", robot.body_mass);
    robot.cart_mass = get_number(obj, "robot", "cart_mass", robot.cart_mass);
    robot.body_height = get_number(obj, "robot", "body_height", robot.body_height);
    robot.body_width = get_number(obj, "robot", "body_width", robot.body_width);
    robot.body_length = get_number(obj, "robot", "body_length", robot.body_length);
    try {
        robot.validate();
    } catch (const std::invalid_argument& e) {
        fail("robot", e.what());
    }
    return robot;
}

Protocol parse_protocol(const json& obj) {
    check_keys(obj, "protocol", {"drag", "rotate", "gait", "classify"});
    if (obj.size() != 1) {
        fail("protocol", "exactly one of 'drag', 'rotate', 'gait', 'classify' must be present");
    }
    const std::string name = obj.begin().key();
    const json& p = obj.begin().value();
    const std::string path = "protocol." + name;

    if (name == "drag") {
        check_keys(p, path, {"amplitude", "speed", "attack_deg", "cycles", "discard_first"});
        DragProtocol d;
        d.amplitude = get_number(p, path, "amplitude", d.amplitude);
        d.speed = get_number(p, path, "speed", d.speed);
        d.attack_deg = get_number(p, path, "attack_deg", d.attack_deg);
        d.cycles = get_int(p, path, "cycles", d.cycles);
        d.discard_first = get_bool(p, path, "discard_first", d.discard_first);
        try {
            d.validate();
        } catch (const std::invalid_argument& e) {
            fail("protocol", e.what());
        }
        return d;
    }
    if (name == "rotate") {
        check_keys(p, path, {"sweep_deg", "omega_deg_s", "cycles", "arm_offset", "discard_first"});
        RotateProtocol r;
        r.sweep_deg = get_number(p, path, "sweep_deg", r.sweep_deg);
        r.omega_deg_s = get_number(p, path, "omega_deg_s", r.omega_deg_s);
        r.cycles = get_int(p, path, "cycles", r.cycles);
        r.arm_offset = get_number(p, path, "arm_offset", r.arm_offset);
        r.discard_first = get_bool(p, path, "discard_first", r.discard_first);
        try {
            r.validate();
        } catch (const std::invalid_argument& e) {
            fail("protocol", e.what());
        }
        return r;
    }
    if (name == "gait") {
        check_keys(p, path, {"theta1_deg", "theta2_deg", "omega_deg_s", "arm_length", "cycles"});
        GaitParams g;
        g.theta1_deg = get_number(p, path, "theta1_deg", g.theta1_deg);
        g.theta2_deg = get_number(p, path, "theta2_deg", g.theta2_deg);
        g.omega_deg_s = get_number(p, path, "omega_deg_s", g.omega_deg_s);
        g.arm_length = get_number(p, path, "arm_length", g.arm_length);
        g.cycles = get_int(p, path, "cycles", g.cycles);
        try {
            g.validate();
        } catch (const std::invalid_argument& e) {
            fail("protocol", e.what());
        }
        return g;
    }
    // classify
    check_keys(p, path,
               {"amplitudes", "speed", "attack_deg", "cycles", "plateau_rel_per_mm",
                "flat_tol_deg"});
    ClassifyProtocol c;
    if (p.contains("amplitudes")) {
        if (!p.at("amplitudes").is_array()) fail(path + ".amplitudes", "expected an array");
        c.amplitudes.clear();
        for (const json& a : p.at("amplitudes")) {
            if (!a.is_number()) fail(path + ".amplitudes", "expected numbers");
            c.amplitudes.push_back(a.get<double>());
        }
    }
    c.speed = get_number(p, path, "speed", c.speed);
    c.attack_deg = get_number(p, path, "attack_deg", c.attack_deg);
    c.cycles = get_int(p, path, "cycles", c.cycles);
    c.plateau_rel_per_mm = get_number(p, path, "plateau_rel_per_mm", c.plateau_rel_per_mm);
    c.flat_tol_deg = get_number(p, path, "flat_tol_deg", c.flat_tol_deg);
    if (c.amplitudes.empty()) fail(path + ".amplitudes", "must not be empty");
    return c;
}

IntegratorConfig parse_integrator(const json& obj, int& record_stride) {
    check_keys(obj, "integrator", {"dt", "constraint_tolerance", "record_stride", "method"});
    IntegratorConfig integ;
    integ.dt = get_number(obj, "integrator", "dt", integ.dt);
    integ.constraint_tolerance =
        get_number(obj, "integrator", "constraint_tolerance", integ.constraint_tolerance);
    record_stride = get_int(obj, "integrator", "record_stride", record_stride);
    const std::string method = get_string(obj, "integrator", "method", "rk4");
    if (method != "rk4") fail("integrator.method", "only 'rk4' is supported");
    if (!(integ.dt > 0.0)) fail("integrator.dt", "must be > 0");
    if (record_stride < 1) fail("integrator.record_stride", "must be >= 1");
    return integ;
}

} // namespace

const char* RunConfig::protocol_name() const {
    if (std::holds_alternative<DragProtocol>(protocol)) return "drag";
    if (std::holds_alternative<RotateProtocol>(protocol)) return "rotate";
    if (std::holds_alternative<GaitParams>(protocol)) return "gait";
    return "classify";
}

RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
    }
    check_keys(root, "(root)",
               {"seed", "output_dir", "medium", "fin", "robot", "integrator", "protocol"});

    RunConfig cfg;
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned() && !root.at("seed").is_number_integer()) {
            fail("seed", "expected an integer");
        }
        cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    cfg.output_dir = get_string(root, "(root)", "output_dir", cfg.output_dir);
    if (root.contains("medium")) cfg.medium = parse_medium(root.at("medium"));
    if (root.contains("fin")) cfg.fin = parse_fin(root.at("fin"));
    if (root.contains("integrator")) {
        cfg.integrator = parse_integrator(root.at("integrator"), cfg.record_stride);
    }
    if (root.contains("protocol")) cfg.protocol = parse_protocol(root.at("protocol"));
    if (root.contains("robot")) cfg.robot = parse_robot(root.at("robot"), cfg.fin);
    if (std::holds_alternative<GaitParams>(cfg.protocol) && !cfg.robot) {
        fail("robot", "a gait protocol needs a robot block");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

nlohmann::json effective_config(const RunConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["output_dir"] = cfg.output_dir;
    root["medium"] = {
        {"sigma_perp", cfg.medium.sigma_perp},
        {"sigma_par", cfg.medium.sigma_par},
        {"v_eps", cfg.medium.v_eps},
        {"mode", cfg.medium.mode == CoefficientMode::Constant ? "constant" : "sine_scaled"},
        {"particle_diameter", cfg.medium.particle_diameter},
        {"depth", cfg.medium.depth},
    };
    root["fin"] = {
        {"kind", kind_name(cfg.fin.kind)},
        {"segments", cfg.fin.segments},
        {"plate_length", cfg.fin.plate_length},
        {"plate_height", cfg.fin.plate_height},
        {"thickness", cfg.fin.thickness},
        {"density", cfg.fin.density},
        {"rod_length", cfg.fin.rod_length},
        {"rod_diameter", cfg.fin.rod_diameter},
        {"rod_density", cfg.fin.rod_density},
        {"k_soft", cfg.fin.k_soft},
        {"k_stop", cfg.fin.k_stop},
        {"damping", cfg.fin.joint_damping},
        {"stop_angle_deg", cfg.fin.stop_angle_deg},
    };
    if (cfg.robot) {
        root["robot"] = {
            {"body_mass", cfg.robot->body_mass},
            {"cart_mass", cfg.robot->cart_mass},
            {"body_height", cfg.robot->body_height},
            {"body_width", cfg.robot->body_width},
            {"body_length", cfg.robot->body_length},
        };
    }
    root["integrator"] = {
        {"dt", cfg.integrator.dt},
        {"constraint_tolerance", cfg.integrator.constraint_tolerance},
        {"record_stride", cfg.record_stride},
        {"method", "rk4"},
    };
    json p;
    if (const auto* d = std::get_if<DragProtocol>(&cfg.protocol)) {
        p["drag"] = {
            {"amplitude", d->amplitude}, {"speed", d->speed},
            {"attack_deg", d->attack_deg}, {"cycles", d->cycles},
            {"discard_first", d->discard_first},
        };
    } else if (const auto* r = std::get_if<RotateProtocol>(&cfg.protocol)) {
        p["rotate"] = {
            {"sweep_deg", r->sweep_deg}, {"omega_deg_s", r->omega_deg_s},
            {"cycles", r->cycles}, {"arm_offset", r->arm_offset},
            {"discard_first", r->discard_first},
        };
    } else if (const auto* g = std::get_if<GaitParams>(&cfg.protocol)) {
        p["gait"] = {
            {"theta1_deg", g->theta1_deg}, {"theta2_deg", g->theta2_deg},
            {"omega_deg_s", g->omega_deg_s}, {"arm_length", g->arm_length},
            {"cycles", g->cycles},
        };
    } else if (const auto* c = std::get_if<ClassifyProtocol>(&cfg.protocol)) {
        p["classify"] = {
            {"amplitudes", c->amplitudes}, {"speed", c->speed},
            {"attack_deg", c->attack_deg}, {"cycles", c->cycles},
            {"plateau_rel_per_mm", c->plateau_rel_per_mm},
            {"flat_tol_deg", c->flat_tol_deg},
        };
    }
    root["protocol"] = p;
    return root;
}

std::string config_hash(const RunConfig& cfg) {
    const std::string dump = effective_config(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : dump) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return effective_config(a) == effective_config(b);
}

} // namespace finsim
