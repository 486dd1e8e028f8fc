#pragma once

#include "finsim/csv.hpp"
#include "finsim/fin.hpp"

#include <Eigen/Core>

#include <string>

namespace finsim {

/// Joint-angle time series at one drag speed, resampled onto a uniform grid.
struct ExperimentalLog {
    Eigen::VectorXd t;     ///< s, uniform
    Eigen::MatrixXd gamma; ///< samples x joints, rad
    double speed = 0.0;    ///< m/s
    std::string source;

    int joints() const { return static_cast<int>(gamma.cols()); }
    int samples() const { return static_cast<int>(gamma.rows()); }
};

/// Accepted layouts:
///  - joint angles: t,gamma_1..gamma_N[,v]   (TrajectoryRecord CSVs qualify;
///    the speed label falls back to the median |dy0/dt| when y0 is present)
///  - marker positions: t,x_0,y_0,...,x_{N+1},y_{N+1}[,v] with point 0 at the
///    chain base, point 1 at the plate's proximal edge and one point per
///    hinge/tip; twists come from the segment directions.
/// Rows must be strictly increasing in time; output is linearly resampled
/// onto a uniform grid with the same sample count.
ExperimentalLog ingest_log(const CsvTable& table, double speed_hint = 0.0);
ExperimentalLog ingest_log_file(const std::string& path, double speed_hint = 0.0);

} // namespace finsim
