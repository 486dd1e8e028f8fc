#pragma once

#include "finsim/chain.hpp"
#include "finsim/csv.hpp"

#include <string>

namespace finsim {

/// Provenance stamped into every output file.
struct FileMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// Columns: t,x0,y0,theta_p,gamma_1..N,dgamma_1..N,Fx,Fy,Tz (SI, radians).
CsvTable trajectory_table(const TrajectoryRecord& record, const FileMeta& meta);
void write_trajectory_csv(const std::string& path, const TrajectoryRecord& record,
                          const FileMeta& meta);

/// Rebuild the recorded columns from a CSV (energy audit is not serialized).
TrajectoryRecord read_trajectory_csv(const std::string& path);
TrajectoryRecord trajectory_from_table(const CsvTable& table);

} // namespace finsim
