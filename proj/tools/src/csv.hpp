#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cloudcluster {

/// Shortest round-trip decimal encoding, locale independent.
[[nodiscard]] std::string csv_num(double v);
[[nodiscard]] std::string csv_num(int v);
[[nodiscard]] std::string csv_num(std::uint64_t v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    [[nodiscard]] std::string str() const;
};

/// Writes to the path, or to stdout when path is empty.
void write_output(const std::string& path, const std::string& content);

} // namespace cloudcluster
