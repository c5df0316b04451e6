#pragma once

// Run configuration: a sectioned key = value text format with explicit units.
//
//   experiment = ple
//   seed = 7
//   [cavity]
//   kappa = 3.85 GHz        # rates are quoted as 2 pi x frequency
//   z_half = 45 nm
//   [zeeman]
//   b_offset = (0, 1, 0) G
//   fields = 0:2:0.1 mT     # start:stop:step, or a comma list "0.1, 1, 3 nW"
//
// Dimensioned fields require a unit; unknown keys are rejected.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cavion/experiments.hpp"

namespace cavion {

enum class Dim { none, frequency, length, time, temperature, power, field, energy, drift };

class ConfigFile {
public:
    static ConfigFile parse(std::istream& is, const std::string& source = "config");
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    // Replaces every occurrence of the key, e.g. for command-line overrides.
    void set(const std::string& section, const std::string& key, const std::string& value);

    // Values in SI units (Hz, m, s, K, W, T, J, Hz/s).
    double quantity(const std::string& section, const std::string& key, Dim dim, double fallback);
    double number(const std::string& section, const std::string& key, double fallback);
    std::int64_t integer(const std::string& section, const std::string& key, std::int64_t fallback);
    bool flag(const std::string& section, const std::string& key, bool fallback);
    std::string word(const std::string& section, const std::string& key, const std::string& fallback);
    Vec3 vector(const std::string& section, const std::string& key, Dim dim, const Vec3& fallback);
    std::vector<double> grid(const std::string& section, const std::string& key, Dim dim,
                             const std::vector<double>& fallback);
    // Every occurrence of a repeatable key, e.g. mask intervals.
    std::vector<std::pair<double, double>> intervals(const std::string& section, const std::string& key,
                                                      Dim dim);

    // Throws InputError naming the first key no accessor consumed.
    void reject_unused() const;

    // All entries in sorted order, re-parseable; used for hashing.
    std::string canonical() const;

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
        mutable bool used = false;
    };
    std::map<std::string, std::vector<Entry>> entries_; // "section.key"
    const Entry* find(const std::string& section, const std::string& key) const;
};

// Parses "<number> <unit>" of the given dimension into SI. Throws InputError
// with `where` on a missing or mismatched unit.
double parse_quantity(const std::string& text, Dim dim, const std::string& where);
std::vector<double> parse_grid(const std::string& text, Dim dim, const std::string& where);

enum class Experiment { ple, lifetime, cavity_sweep, saturation, zeeman, g2, spin_t1, purcell_stats };

Experiment experiment_from_name(const std::string& name);
std::string experiment_name(Experiment e);

struct RunConfig {
    Experiment experiment = Experiment::ple;
    std::uint64_t seed = 1;
    Setup setup{};
    double ion_purcell = 125.0;
    double ion_detuning = 0.0; // Hz, ion minus cavity

    EnsembleConfig ensemble{};
    ScanPlan scan{};
    PeakCountOptions peaks{};

    LifetimeOptions lifetime{};
    double sweep_gate_lifetimes = 8.0;
    int sweep_bins = 80;
    std::vector<double> ple_offsets; // saturation and Zeeman scans, Hz relative to the ion
    ZeemanConfig zeeman{};
    Vec3 field_direction{0.0, 0.0, 1.0};
    double zeeman_width = 6e6;
    G2Options g2{};
    SpinRelaxParams spin{};
    std::vector<double> temperatures;
    std::vector<double> fractions;

    std::string canonical; // hashed configuration text
};

// Defaults for `experiment`, overridden by the file. Consumes and validates every key.
RunConfig load_run_config(ConfigFile& file, std::optional<Experiment> experiment = std::nullopt);

} // namespace cavion
