#include "finsim/fin.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace finsim {

double FinSpec::stop_angle_rad() const {
    return stop_angle_deg * std::numbers::pi / 180.0;
}

std::vector<JointLaw> FinSpec::joint_laws() const {
    if (per_joint) {
        if (static_cast<int>(per_joint->size()) != segments) {
            throw std::invalid_argument("fin: per-joint law count must equal the segment count");
        }
        return *per_joint;
    }
    JointLaw law;
    law.k_soft = k_soft;
    law.k_stop = k_stop;
    law.damping = joint_damping;
    law.stop_angle = stop_angle_rad();
    return std::vector<JointLaw>(static_cast<size_t>(segments), law);
}

void FinSpec::validate() const {
    if (segments < 1) {
        throw std::invalid_argument("fin: segment count must be >= 1");
    }
    if (!(plate_length > 0.0) || !(plate_height > 0.0) || !(thickness > 0.0) ||
        !(density > 0.0) || !(rod_length > 0.0) || !(rod_diameter > 0.0) ||
        !(rod_density > 0.0)) {
        throw std::invalid_argument("fin: geometry and densities must be positive");
    }
    for (const JointLaw& law : joint_laws()) {
        if (!law.valid()) {
            throw std::invalid_argument("fin: joint law violates k_stop >= k_soft >= 0, b >= 0");
        }
        if (kind == FinKind::Rigid || kind == FinKind::Soft) {
            if (law.k_soft != law.k_stop) {
                throw std::invalid_argument(
                    "fin: rigid/soft kinds require symmetric stiffness (k_soft == k_stop)");
            }
        } else if (!(law.k_soft < law.k_stop)) {
            throw std::invalid_argument("fin: origami kind requires k_soft < k_stop");
        }
    }
}

const char* const kFinPresetNames[4] = {"rigid", "soft-2.0mm", "soft-2.5mm", "origami-2.0mm"};

FinSpec fin_preset(const std::string& name) {
    FinSpec fin;
    if (name == "rigid") {
        fin.kind = FinKind::Rigid;
        fin.k_soft = 3e-2;
        fin.k_stop = 3e-2;
    } else if (name == "soft-2.0mm") {
        fin.kind = FinKind::Soft;
        fin.k_soft = 2.5e-4;
        fin.k_stop = 2.5e-4;
    } else if (name == "soft-2.5mm") {
        fin.kind = FinKind::Soft;
        fin.thickness = 0.0025;
        // Bending stiffness of the printed hinge grows with thickness^3.
        fin.k_soft = 2.5e-4 * 1.953125;
        fin.k_stop = fin.k_soft;
    } else if (name == "origami-2.0mm") {
        fin.kind = FinKind::Origami;
        fin.k_soft = 1.2e-4;
        fin.k_stop = 3e-2;
    } else {
        throw std::invalid_argument("unknown fin preset '" + name + "'");
    }
    return fin;
}

ChainSpec build_fin_chain(const FinSpec& fin, BaseMotion base) {
    fin.validate();

    ChainSpec spec;
    spec.base = std::move(base);

    LinkSpec rod;
    rod.length = fin.rod_length;
    rod.height = fin.rod_diameter;
    rod.drag_active = false;
    const double r = 0.5 * fin.rod_diameter;
    rod.mass = fin.rod_density * std::numbers::pi * r * r * fin.rod_length;
    rod.inertia = rod.mass * (3.0 * r * r + fin.rod_length * fin.rod_length) / 12.0;
    spec.links.push_back(rod);

    LinkSpec seg;
    seg.length = fin.segment_length();
    seg.height = fin.plate_height;
    seg.drag_active = true;
    seg.mass = fin.density * seg.length * fin.plate_height * fin.thickness;
    seg.inertia = seg.mass * (seg.length * seg.length + fin.thickness * fin.thickness) / 12.0;
    for (int i = 0; i < fin.segments; ++i) {
        spec.links.push_back(seg);
    }

    spec.joint_laws = fin.joint_laws();
    return spec;
}

} // namespace finsim
