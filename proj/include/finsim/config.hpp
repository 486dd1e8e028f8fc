#pragma once

#include "finsim/fin.hpp"
#include "finsim/medium.hpp"
#include "finsim/scenarios.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace finsim {

/// Amplitude-sweep protocol for the flapping-regime classifier.
struct ClassifyProtocol {
    std::vector<double> amplitudes{0.05, 0.10, 0.15, 0.20};
    double speed = 0.03;
    double attack_deg = 90.0;
    int cycles = 3;
    double plateau_rel_per_mm = 0.005;
    double flat_tol_deg = 0.5;
};

using Protocol = std::variant<DragProtocol, RotateProtocol, GaitParams, ClassifyProtocol>;

/// One fully resolved run. Angles are degrees here (the config-file unit);
/// everything downstream works in radians and SI.
struct RunConfig {
    MediumModel medium;
    FinSpec fin;
    std::optional<RobotSpec> robot;
    Protocol protocol = DragProtocol{};
    IntegratorConfig integrator;
    int record_stride = 10;
    std::uint64_t seed = 1;
    std::string output_dir = "out";

    ScenarioOptions scenario_options() const {
        return ScenarioOptions{integrator, record_stride};
    }
    const char* protocol_name() const;
};

/// Parse the canonical JSON config. Unknown keys are errors; violated field
/// invariants report the offending path.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Fully resolved echo of a config: every default made explicit. Re-parsing
/// the echo yields an identical RunConfig.
nlohmann::json effective_config(const RunConfig& config);

/// FNV-1a hash of the canonical effective-config dump.
std::string config_hash(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

} // namespace finsim
