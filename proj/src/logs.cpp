#include "finsim/logs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finsim {

namespace {

void check_monotonic(const std::vector<double>& t) {
    for (size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) {
            throw std::invalid_argument("log: time column must be strictly increasing");
        }
    }
}

Eigen::MatrixXd resample_uniform(const std::vector<double>& t, const Eigen::MatrixXd& y,
                                 Eigen::VectorXd& grid) {
    const auto n = static_cast<Eigen::Index>(t.size());
    grid.resize(n);
    Eigen::MatrixXd out(n, y.cols());
    const double t0 = t.front();
    const double dt = (t.back() - t0) / static_cast<double>(n - 1);
    size_t j = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double tau = t0 + dt * static_cast<double>(i);
        grid(i) = tau;
        while (j + 2 < t.size() && t[j + 1] <= tau) ++j;
        const double w = std::clamp((tau - t[j]) / (t[j + 1] - t[j]), 0.0, 1.0);
        out.row(i) = (1.0 - w) * y.row(static_cast<Eigen::Index>(j)) +
                     w * y.row(static_cast<Eigen::Index>(j + 1));
    }
    return out;
}

double median_abs_rate(const std::vector<double>& t, const std::vector<double>& y) {
    std::vector<double> rates;
    for (size_t i = 1; i < t.size(); ++i) {
        rates.push_back(std::abs((y[i] - y[i - 1]) / (t[i] - t[i - 1])));
    }
    std::nth_element(rates.begin(), rates.begin() + rates.size() / 2, rates.end());
    return rates[rates.size() / 2];
}

} // namespace

ExperimentalLog ingest_log(const CsvTable& table, double speed_hint) {
    if (table.rows.size() < 2) {
        throw std::invalid_argument("log: need at least two samples");
    }
    const int ct = table.require_column("t");
    std::vector<double> t;
    t.reserve(table.rows.size());
    for (const auto& row : table.rows) t.push_back(row[ct]);
    check_monotonic(t);

    ExperimentalLog log;

    int joints = 0;
    while (table.column("gamma_" + std::to_string(joints + 1)) >= 0) ++joints;

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Eigen::MatrixXd gamma;
    if (joints > 0) {
        gamma.resize(n, joints);
        for (int k = 0; k < joints; ++k) {
            const int c = table.column("gamma_" + std::to_string(k + 1));
            for (Eigen::Index i = 0; i < n; ++i) {
                gamma(i, k) = table.rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
            }
        }
    } else {
        // Marker-position layout: points 0..N+1 along the chain; twists are
        // the direction changes between consecutive segments.
        int points = 0;
        while (table.column("x_" + std::to_string(points)) >= 0 &&
               table.column("y_" + std::to_string(points)) >= 0) {
            ++points;
        }
        if (points < 3) {
            throw std::invalid_argument(
                "log: need either gamma_* columns or marker columns x_0,y_0,...");
        }
        joints = points - 2;
        gamma.resize(n, joints);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = table.rows[static_cast<size_t>(i)];
            double prev_angle = 0.0;
            for (int p = 0; p + 1 < points; ++p) {
                const double x0 = row[static_cast<size_t>(table.column("x_" + std::to_string(p)))];
                const double y0 = row[static_cast<size_t>(table.column("y_" + std::to_string(p)))];
                const double x1 =
                    row[static_cast<size_t>(table.column("x_" + std::to_string(p + 1)))];
                const double y1 =
                    row[static_cast<size_t>(table.column("y_" + std::to_string(p + 1)))];
                const double angle = std::atan2(y1 - y0, x1 - x0);
                if (p > 0) {
                    double d = angle - prev_angle;
                    while (d > M_PI) d -= 2.0 * M_PI;
                    while (d < -M_PI) d += 2.0 * M_PI;
                    gamma(i, p - 1) = d;
                }
                prev_angle = angle;
            }
        }
    }
    if (!gamma.allFinite()) throw std::invalid_argument("log: non-finite joint angles");

    log.gamma = resample_uniform(t, gamma, log.t);

    if (const int cv = table.column("v"); cv >= 0) {
        log.speed = table.rows.front()[static_cast<size_t>(cv)];
    } else if (speed_hint > 0.0) {
        log.speed = speed_hint;
    } else if (const int cy = table.column("y0"); cy >= 0) {
        std::vector<double> y;
        for (const auto& row : table.rows) y.push_back(row[static_cast<size_t>(cy)]);
        log.speed = median_abs_rate(t, y);
    }
    if (!(log.speed > 0.0)) {
        throw std::invalid_argument("log: missing positive speed label");
    }
    return log;
}

ExperimentalLog ingest_log_file(const std::string& path, double speed_hint) {
    ExperimentalLog log = ingest_log(read_csv_file(path), speed_hint);
    log.source = path;
    return log;
}

} // namespace finsim
