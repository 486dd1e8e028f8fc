#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace finsim {

/// Plain comma-separated table with `# key=value` comment metadata.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> meta;

    int column(const std::string& name) const; ///< -1 when absent
    int require_column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Full-precision double formatting (round-trips exactly).
std::string format_double(double v);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

} // namespace finsim
