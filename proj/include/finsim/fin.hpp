#pragma once

#include "finsim/chain.hpp"
#include "finsim/joint.hpp"

#include <optional>
#include <string>
#include <vector>

namespace finsim {

enum class FinKind { Rigid, Soft, Origami };

/// Geometry and joint compliance of a segmented fin plus its extension rod.
/// Angles are stored in degrees (the config unit); accessors give radians.
struct FinSpec {
    FinKind kind = FinKind::Origami;
    int segments = 3;             ///< N
    double plate_length = 0.060;  ///< m, segmented extent L_p
    double plate_height = 0.055;  ///< m, into-page extent H_p
    double thickness = 0.002;     ///< m
    double density = 1200.0;      ///< kg/m^3 (printed polymer)
    double rod_length = 0.050;    ///< m, drag-inactive extension rod / arm
    double rod_diameter = 0.003;  ///< m
    double rod_density = 1200.0;  ///< kg/m^3

    double k_soft = 1.2e-4;       ///< N*m/rad
    double k_stop = 3e-2;         ///< N*m/rad
    double joint_damping = 2e-5;  ///< N*m*s/rad
    double stop_angle_deg = 0.0;

    /// Optional per-joint overrides (size == segments when present).
    std::optional<std::vector<JointLaw>> per_joint;

    double stop_angle_rad() const;
    double segment_length() const { return plate_length / segments; }
    double plate_area() const { return plate_length * plate_height; }

    /// Laws for the `segments` pin joints, from the uniform parameters or the
    /// per-joint overrides.
    std::vector<JointLaw> joint_laws() const;

    void validate() const;
};

/// Named presets for the four test articles. Stiffness values are the
/// repository's synthetic calibration, not measured data.
FinSpec fin_preset(const std::string& name);
extern const char* const kFinPresetNames[4]; ///< rigid, soft-2.0mm, soft-2.5mm, origami-2.0mm

/// Rod link followed by `segments` equal plate links, with one compliant
/// joint per plate boundary (the first between rod and plate).
ChainSpec build_fin_chain(const FinSpec& fin, BaseMotion base);

} // namespace finsim
