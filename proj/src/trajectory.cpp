#include "finsim/trajectory.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace finsim {

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int CsvTable::require_column(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw std::invalid_argument("csv: missing column '" + name + "'");
    return c;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tok;
            while (ls >> tok) {
                const auto eq = tok.find('=');
                if (eq != std::string::npos) {
                    table.meta[tok.substr(0, eq)] = tok.substr(eq + 1);
                }
            }
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            table.header = cells;
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw std::invalid_argument("csv: row width does not match the header");
        }
        std::vector<double> row(cells.size());
        for (size_t i = 0; i < cells.size(); ++i) {
            const char* b = cells[i].data();
            const char* e = b + cells[i].size();
            while (b < e && *b == ' ') ++b;
            const auto res = std::from_chars(b, e, row[i]);
            if (res.ec != std::errc{}) {
                throw std::invalid_argument("csv: bad number '" + cells[i] + "'");
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::invalid_argument("csv: empty input");
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
    for (const auto& [k, v] : table.meta) {
        out << "# " << k << '=' << v << '\n';
    }
    for (size_t i = 0; i < table.header.size(); ++i) {
        out << (i ? "," : "") << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_double(row[i]);
        }
        out << '\n';
    }
}

void write_csv_file(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(out, table);
}

CsvTable trajectory_table(const TrajectoryRecord& record, const FileMeta& meta) {
    CsvTable table;
    if (!meta.config_hash.empty()) table.meta["config"] = meta.config_hash;
    table.meta["seed"] = std::to_string(meta.seed);

    const int J = record.joint_count;
    table.header = {"t", "x0", "y0", "theta_p"};
    for (int k = 1; k <= J; ++k) table.header.push_back("gamma_" + std::to_string(k));
    for (int k = 1; k <= J; ++k) table.header.push_back("dgamma_" + std::to_string(k));
    table.header.insert(table.header.end(), {"Fx", "Fy", "Tz"});

    table.rows.reserve(record.samples());
    for (size_t i = 0; i < record.samples(); ++i) {
        std::vector<double> row;
        row.reserve(table.header.size());
        row.push_back(record.t[i]);
        row.push_back(record.x0[i]);
        row.push_back(record.y0[i]);
        row.push_back(record.theta0[i]);
        for (int k = 0; k < J; ++k) row.push_back(record.gamma(static_cast<Eigen::Index>(i), k));
        for (int k = 0; k < J; ++k) row.push_back(record.gamma_dot(static_cast<Eigen::Index>(i), k));
        row.push_back(record.fx[i]);
        row.push_back(record.fy[i]);
        row.push_back(record.tz[i]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_trajectory_csv(const std::string& path, const TrajectoryRecord& record,
                          const FileMeta& meta) {
    write_csv_file(path, trajectory_table(record, meta));
}

TrajectoryRecord trajectory_from_table(const CsvTable& table) {
    TrajectoryRecord rec;
    int J = 0;
    while (table.column("gamma_" + std::to_string(J + 1)) >= 0) ++J;
    rec.joint_count = J;

    const int ct = table.require_column("t");
    const int cx = table.require_column("x0");
    const int cy = table.require_column("y0");
    const int cth = table.require_column("theta_p");
    const int cfx = table.require_column("Fx");
    const int cfy = table.require_column("Fy");
    const int ctz = table.require_column("Tz");
    std::vector<int> cg(J), cdg(J);
    for (int k = 0; k < J; ++k) {
        cg[k] = table.require_column("gamma_" + std::to_string(k + 1));
        cdg[k] = table.require_column("dgamma_" + std::to_string(k + 1));
    }

    const auto m = static_cast<Eigen::Index>(table.rows.size());
    rec.gamma.resize(m, J);
    rec.gamma_dot.resize(m, J);
    rec.joint_torque = Eigen::MatrixXd::Zero(m, J);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& row = table.rows[static_cast<size_t>(i)];
        rec.t.push_back(row[ct]);
        rec.x0.push_back(row[cx]);
        rec.y0.push_back(row[cy]);
        rec.theta0.push_back(row[cth]);
        rec.dx0.push_back(0.0);
        rec.dy0.push_back(0.0);
        rec.dtheta0.push_back(0.0);
        rec.fx.push_back(row[cfx]);
        rec.fy.push_back(row[cfy]);
        rec.tz.push_back(row[ctz]);
        for (int k = 0; k < J; ++k) {
            rec.gamma(i, k) = row[cg[k]];
            rec.gamma_dot(i, k) = row[cdg[k]];
        }
    }
    return rec;
}

TrajectoryRecord read_trajectory_csv(const std::string& path) {
    return trajectory_from_table(read_csv_file(path));
}

} // namespace finsim
