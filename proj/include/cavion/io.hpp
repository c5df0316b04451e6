#pragma once

// Output tables, atomic file writes, numeric CSV input, and hashing.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cavion {

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// 12 significant digits.
std::string format_number(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::pair<std::string, std::string>> meta; // written as "# key=value"

    void add(std::vector<double> row);
    // Header block: title, config hash, seed, metadata; then the column row.
    std::string to_csv(const std::string& title, const std::string& config_hash, std::uint64_t seed) const;
    nlohmann::json to_json(const std::string& title, const std::string& config_hash, std::uint64_t seed) const;
};

// Writes to a temporary sibling and renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct CsvData {
    std::vector<std::string> header; // empty when the file has no header row
    std::vector<std::vector<double>> rows;

    // Index of a named column; throws InputError if absent.
    std::size_t column(const std::string& name) const;
};

// Comment lines start with '#'. The first non-comment line is a header if it
// is not numeric. Throws InputError naming the line of any malformed row and
// "no data rows" when nothing remains.
CsvData read_numeric_csv(std::istream& is, const std::string& source = "input");

} // namespace cavion
