#include "cavion/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cavion/errors.hpp"

namespace cavion {

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void Table::add(std::vector<double> row) {
    if (row.size() != columns.size()) throw DomainError("table row has the wrong number of columns");
    rows.push_back(std::move(row));
}

std::string Table::to_csv(const std::string& title, const std::string& config_hash, std::uint64_t seed) const {
    std::ostringstream os;
    os << "# " << title << "\n# config_hash=" << config_hash << "\n# seed=" << seed << "\n";
    for (const auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_number(r[i]);
        os << "\n";
    }
    return os.str();
}

nlohmann::json Table::to_json(const std::string& title, const std::string& config_hash,
                              std::uint64_t seed) const {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : meta) m[k] = v;
    nlohmann::json data = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = nlohmann::json::array();
        for (double v : r) row.push_back(std::isfinite(v) ? std::stod(format_number(v)) : v);
        data.push_back(row);
    }
    return {{"title", title}, {"config_hash", config_hash}, {"seed", seed},
            {"meta", m},      {"columns", columns},         {"rows", data}};
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) {
            os.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::size_t CsvData::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw InputError(name, "no such column");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t\r");
        const auto e = cur.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool to_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

} // namespace

CsvData read_numeric_csv(std::istream& is, const std::string& source) {
    CsvData data;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
        const auto fields = split_fields(line);
        std::vector<double> row(fields.size());
        bool numeric = true;
        for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && to_double(fields[i], row[i]);
        if (first) {
            first = false;
            width = fields.size();
            if (!numeric) {
                data.header = fields;
                continue;
            }
        }
        const std::string where = source + ":" + std::to_string(lineno);
        if (!numeric) throw InputError(where, "malformed numeric row '" + line + "'");
        if (fields.size() != width)
            throw InputError(where, "expected " + std::to_string(width) + " columns, got " +
                                        std::to_string(fields.size()));
        data.rows.push_back(std::move(row));
    }
    if (data.rows.empty()) throw InputError(source, "no data rows");
    return data;
}

} // namespace cavion
