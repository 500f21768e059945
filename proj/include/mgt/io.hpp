#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mgt {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Writes `<base>.bin` (little-endian float64, row-major) and `<base>.json`
/// (shape, layout, checksum, user metadata). Returns both paths.
std::vector<std::filesystem::path> write_field(const std::filesystem::path& base, const Eigen::MatrixXd& m,
                                               const nlohmann::json& meta = nlohmann::json::object());

/// Reads a field written by write_field; throws IoError on a checksum or shape mismatch.
Eigen::MatrixXd read_field(const std::filesystem::path& base);

using Cell = std::variant<double, long long, std::string>;

/// Small table with a header row, rendered as CSV with round-trip precision.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
    std::string render() const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Writes text atomically enough for a single writer (temp file + rename).
void write_text(const std::filesystem::path& path, const std::string& text);

std::string format_double(double v);

}  // namespace mgt
