#include "cavion/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "cavion/errors.hpp"

namespace cavion {

namespace {

struct Unit {
    const char* name;
    double factor;
};

const std::vector<Unit>& units_of(Dim d) {
    static const std::vector<Unit> none{};
    static const std::vector<Unit> freq{{"THz", 1e12}, {"GHz", 1e9}, {"MHz", 1e6}, {"kHz", 1e3},
                                        {"Hz", 1.0},   {"s^-1", 1.0}, {"/s", 1.0}, {"cps", 1.0}};
    static const std::vector<Unit> length{{"mm", 1e-3}, {"um", 1e-6}, {"\xC2\xB5m", 1e-6},
                                          {"nm", 1e-9}, {"pm", 1e-12}, {"m", 1.0}};
    static const std::vector<Unit> time{{"ms", 1e-3}, {"us", 1e-6}, {"\xC2\xB5s", 1e-6}, {"ns", 1e-9},
                                        {"ps", 1e-12}, {"min", 60.0}, {"hr", 3600.0}, {"s", 1.0}};
    static const std::vector<Unit> temp{{"mK", 1e-3}, {"K", 1.0}};
    static const std::vector<Unit> power{{"mW", 1e-3}, {"uW", 1e-6}, {"\xC2\xB5W", 1e-6},
                                         {"nW", 1e-9}, {"pW", 1e-12}, {"W", 1.0}};
    static const std::vector<Unit> field{{"mT", 1e-3}, {"uT", 1e-6}, {"\xC2\xB5T", 1e-6},
                                         {"T", 1.0},   {"mG", 1e-7}, {"G", 1e-4}};
    static const std::vector<Unit> energy{{"meV", 1e-3 * constants::elementary_charge},
                                          {"ueV", 1e-6 * constants::elementary_charge},
                                          {"eV", constants::elementary_charge},
                                          {"J", 1.0}};
    static const std::vector<Unit> drift{{"GHz/hr", 1e9 / 3600.0}, {"MHz/hr", 1e6 / 3600.0},
                                         {"kHz/hr", 1e3 / 3600.0}, {"Hz/hr", 1.0 / 3600.0},
                                         {"GHz/s", 1e9},           {"MHz/s", 1e6},
                                         {"kHz/s", 1e3},           {"Hz/s", 1.0}};
    switch (d) {
    case Dim::none: return none;
    case Dim::frequency: return freq;
    case Dim::length: return length;
    case Dim::time: return time;
    case Dim::temperature: return temp;
    case Dim::power: return power;
    case Dim::field: return field;
    case Dim::energy: return energy;
    case Dim::drift: return drift;
    }
    return none;
}

const char* dim_name(Dim d) {
    switch (d) {
    case Dim::none: return "dimensionless number";
    case Dim::frequency: return "frequency";
    case Dim::length: return "length";
    case Dim::time: return "time";
    case Dim::temperature: return "temperature";
    case Dim::power: return "power";
    case Dim::field: return "magnetic field";
    case Dim::energy: return "energy";
    case Dim::drift: return "drift rate";
    }
    return "value";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

// Splits a trailing unit of `dim` off `text`; returns the factor to base units.
double split_unit(std::string& text, Dim dim, const std::string& where) {
    text = trim(text);
    if (dim == Dim::none) return 1.0;
    for (const auto& u : units_of(dim)) {
        const std::string name = u.name;
        if (text.size() > name.size() && text.compare(text.size() - name.size(), name.size(), name) == 0) {
            const char prev = text[text.size() - name.size() - 1];
            if (std::isdigit(static_cast<unsigned char>(prev)) || prev == ' ' || prev == ')' ||
                prev == '.' || prev == '\t') {
                text = trim(text.substr(0, text.size() - name.size()));
                return u.factor;
            }
        }
    }
    std::string choices;
    for (const auto& u : units_of(dim)) choices += std::string(choices.empty() ? "" : ", ") + u.name;
    double probe = 0.0;
    if (parse_number(text, probe))
        throw InputError(where, std::string("missing unit; expected a ") + dim_name(dim) + " in " + choices);
    throw InputError(where, "'" + text + "' is not a " + dim_name(dim) + " (units: " + choices + ")");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
               c == '_';
    });
}

} // namespace

double parse_quantity(const std::string& text, Dim dim, const std::string& where) {
    std::string t = text;
    const double factor = split_unit(t, dim, where);
    double v = 0.0;
    if (!parse_number(t, v)) {
        if (dim == Dim::none) throw InputError(where, "expected a bare number, got '" + trim(text) + "'");
        throw InputError(where, "malformed number '" + t + "'");
    }
    return v * factor;
}

std::vector<double> parse_grid(const std::string& text, Dim dim, const std::string& where) {
    std::string t = text;
    const double factor = split_unit(t, dim, where);
    std::vector<double> out;
    if (t.find(':') != std::string::npos) {
        const auto parts = split(t, ':');
        double a = 0, b = 0, step = 0;
        if (parts.size() != 3 || !parse_number(parts[0], a) || !parse_number(parts[1], b) ||
            !parse_number(parts[2], step))
            throw InputError(where, "range must be start:stop:step");
        if (!(step > 0.0) || b < a) throw InputError(where, "range needs step > 0 and stop >= start");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        if (n > 100'000'000) throw InputError(where, "range has too many points");
        for (std::size_t i = 0; i < n; ++i) out.push_back((a + static_cast<double>(i) * step) * factor);
        return out;
    }
    for (const auto& p : split(t, ',')) {
        double v = 0.0;
        if (!parse_number(p, v)) throw InputError(where, "malformed list entry '" + p + "'");
        out.push_back(v * factor);
    }
    if (out.empty()) throw InputError(where, "empty list");
    return out;
}

ConfigFile ConfigFile::parse(std::istream& is, const std::string& source) {
    ConfigFile cfg;
    std::string section;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        std::string line = raw;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InputError(where, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_identifier(section)) throw InputError(where, "invalid section name '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(where, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_identifier(key)) throw InputError(where, "invalid key '" + key + "'");
        if (value.empty()) throw InputError(where, "empty value for '" + key + "'");
        cfg.entries_[section.empty() ? key : section + "." + key].push_back({value, lineno});
    }
    return cfg;
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section, const std::string& key) const {
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = entries_.find(full);
    if (it == entries_.end()) return nullptr;
    if (it->second.size() > 1)
        throw InputError(full, "duplicate key (lines " + std::to_string(it->second[0].line) + " and " +
                                   std::to_string(it->second[1].line) + ")");
    it->second[0].used = true;
    return &it->second[0];
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& value) {
    entries_[section.empty() ? key : section + "." + key] = {Entry{value, 0}};
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    return entries_.count(section.empty() ? key : section + "." + key) > 0;
}

namespace {
std::string full_key(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}
} // namespace

double ConfigFile::quantity(const std::string& section, const std::string& key, Dim dim, double fallback) {
    const auto* e = find(section, key);
    return e ? parse_quantity(e->value, dim, full_key(section, key)) : fallback;
}

double ConfigFile::number(const std::string& section, const std::string& key, double fallback) {
    return quantity(section, key, Dim::none, fallback);
}

std::int64_t ConfigFile::integer(const std::string& section, const std::string& key, std::int64_t fallback) {
    const auto* e = find(section, key);
    if (!e) return fallback;
    const double v = parse_quantity(e->value, Dim::none, full_key(section, key));
    if (v != std::floor(v) || std::abs(v) > 9.0e15)
        throw InputError(full_key(section, key), "expected an integer");
    return static_cast<std::int64_t>(v);
}

bool ConfigFile::flag(const std::string& section, const std::string& key, bool fallback) {
    const auto* e = find(section, key);
    if (!e) return fallback;
    std::string v = e->value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw InputError(full_key(section, key), "expected true or false");
}

std::string ConfigFile::word(const std::string& section, const std::string& key, const std::string& fallback) {
    const auto* e = find(section, key);
    return e ? e->value : fallback;
}

Vec3 ConfigFile::vector(const std::string& section, const std::string& key, Dim dim, const Vec3& fallback) {
    const auto* e = find(section, key);
    if (!e) return fallback;
    const std::string where = full_key(section, key);
    std::string t = e->value;
    const double factor = split_unit(t, dim, where);
    if (t.size() < 2 || t.front() != '(' || t.back() != ')')
        throw InputError(where, "expected a vector like (x, y, z)");
    const auto parts = split(t.substr(1, t.size() - 2), ',');
    if (parts.size() != 3) throw InputError(where, "vector needs three components");
    Vec3 v{};
    for (int i = 0; i < 3; ++i) {
        if (!parse_number(parts[i], v[i])) throw InputError(where, "malformed component '" + parts[i] + "'");
        v[i] *= factor;
    }
    return v;
}

std::vector<double> ConfigFile::grid(const std::string& section, const std::string& key, Dim dim,
                                     const std::vector<double>& fallback) {
    const auto* e = find(section, key);
    return e ? parse_grid(e->value, dim, full_key(section, key)) : fallback;
}

std::vector<std::pair<double, double>> ConfigFile::intervals(const std::string& section,
                                                              const std::string& key, Dim dim) {
    std::vector<std::pair<double, double>> out;
    const auto it = entries_.find(full_key(section, key));
    if (it == entries_.end()) return out;
    for (const auto& e : it->second) {
        e.used = true;
        const std::string where = full_key(section, key) + " (line " + std::to_string(e.line) + ")";
        std::string t = e.value;
        const double factor = split_unit(t, dim, where);
        if (t.size() < 2 || t.front() != '(' || t.back() != ')')
            throw InputError(where, "expected an interval like (a, b)");
        const auto parts = split(t.substr(1, t.size() - 2), ',');
        double a = 0, b = 0;
        if (parts.size() != 2 || !parse_number(parts[0], a) || !parse_number(parts[1], b))
            throw InputError(where, "interval needs two numbers");
        if (!(b > a)) throw InputError(where, "interval must have b > a");
        out.emplace_back(a * factor, b * factor);
    }
    return out;
}

void ConfigFile::reject_unused() const {
    for (const auto& [k, list] : entries_) {
        for (const auto& e : list)
            if (!e.used) throw InputError(k, "unknown key (line " + std::to_string(e.line) + ")");
    }
}

std::string ConfigFile::canonical() const {
    std::string top, body, current;
    for (const auto& [k, list] : entries_) {
        const auto dot = k.find('.');
        for (const auto& e : list) {
            if (dot == std::string::npos) {
                top += k + " = " + e.value + "\n";
                continue;
            }
            const std::string section = k.substr(0, dot);
            if (section != current) {
                body += "[" + section + "]\n";
                current = section;
            }
            body += k.substr(dot + 1) + " = " + e.value + "\n";
        }
    }
    return top + body;
}

Experiment experiment_from_name(const std::string& name) {
    static const std::map<std::string, Experiment> names{
        {"ple", Experiment::ple},         {"lifetime", Experiment::lifetime},
        {"cavity_sweep", Experiment::cavity_sweep}, {"saturation", Experiment::saturation},
        {"zeeman", Experiment::zeeman},   {"g2", Experiment::g2},
        {"spin_t1", Experiment::spin_t1}, {"purcell_stats", Experiment::purcell_stats}};
    const auto it = names.find(name);
    if (it == names.end()) throw InputError("experiment", "unknown experiment '" + name + "'");
    return it->second;
}

std::string experiment_name(Experiment e) {
    switch (e) {
    case Experiment::ple: return "ple";
    case Experiment::lifetime: return "lifetime";
    case Experiment::cavity_sweep: return "cavity_sweep";
    case Experiment::saturation: return "saturation";
    case Experiment::zeeman: return "zeeman";
    case Experiment::g2: return "g2";
    case Experiment::spin_t1: return "spin_t1";
    case Experiment::purcell_stats: return "purcell_stats";
    }
    return "ple";
}

namespace {

std::vector<double> range(double a, double b, double step) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
}

std::uint64_t to_count(std::int64_t v, const std::string& where) {
    if (v < 1) throw InputError(where, "must be >= 1");
    return static_cast<std::uint64_t>(v);
}

} // namespace

RunConfig load_run_config(ConfigFile& f, std::optional<Experiment> experiment) {
    RunConfig rc;
    const std::string exp_word = f.word("", "experiment", "");
    if (experiment) {
        rc.experiment = *experiment;
        if (!exp_word.empty() && experiment_from_name(exp_word) != *experiment)
            throw InputError("experiment", "config names '" + exp_word + "' but '" +
                                               experiment_name(*experiment) + "' was requested");
    } else {
        if (exp_word.empty()) throw InputError("experiment", "missing key");
        rc.experiment = experiment_from_name(exp_word);
    }
    const Experiment e = rc.experiment;
    rc.seed = static_cast<std::uint64_t>(f.integer("", "seed", 1));
    rc.setup.threads = static_cast<unsigned>(std::max<std::int64_t>(1, f.integer("", "threads", 1)));

    // experiment-specific defaults
    rc.setup.det.dark_rate = 10.0;
    rc.setup.background_coeff = 0.01;
    switch (e) {
    case Experiment::lifetime: rc.ion_purcell = 252.0; break;
    case Experiment::cavity_sweep:
        rc.ion_purcell = 320.0;
        rc.setup.seq.input_power = 10e-9;
        break;
    default: rc.ion_purcell = 125.0; break;
    }

    auto& cav = rc.setup.cavity;
    cav.f_cav = f.quantity("cavity", "f_cav", Dim::frequency, cav.f_cav);
    if (f.has("cavity", "q") && f.has("cavity", "kappa"))
        throw InputError("cavity.q", "give either q or kappa, not both");
    if (f.has("cavity", "q")) {
        cav.kappa = angular(cav.f_cav) / f.number("cavity", "q", 0.0);
    } else {
        cav.kappa = angular(f.quantity("cavity", "kappa", Dim::frequency, hertz(cav.kappa)));
    }
    cav.eta_cav = f.number("cavity", "eta_cav", cav.eta_cav);
    cav.g_if = angular(f.quantity("cavity", "g_if", Dim::frequency, hertz(cav.g_if)));
    cav.z_half = f.quantity("cavity", "z_half", Dim::length, cav.z_half);
    cav.envelope.waist_x = f.quantity("cavity", "waist_x", Dim::length, cav.envelope.waist_x);
    cav.envelope.waist_y = f.quantity("cavity", "waist_y", Dim::length, cav.envelope.waist_y);

    const double tau0 = f.quantity("emitter", "tau0", Dim::time, rc.setup.emitter.tau0);
    const double beta = f.number("emitter", "beta", rc.setup.emitter.beta);
    const double n_host = f.number("emitter", "n_host", rc.setup.emitter.n_host);
    const double f_opt = f.quantity("emitter", "f_optical", Dim::frequency, hertz(rc.setup.emitter.omega));
    rc.setup.emitter = EmitterConstants::from_lifetime(tau0, beta, n_host, angular(f_opt));

    auto& seq = rc.setup.seq;
    seq.excite_duration = f.quantity("pulse", "excite_duration", Dim::time, seq.excite_duration);
    seq.gate_start = f.quantity("pulse", "gate_start", Dim::time, seq.excite_duration);
    seq.gate_duration = f.quantity("pulse", "gate_duration", Dim::time, seq.gate_duration);
    seq.rep_period = f.quantity("pulse", "rep_period", Dim::time, seq.rep_period);
    seq.input_power = f.quantity("pulse", "input_power", Dim::power, seq.input_power);

    auto& det = rc.setup.det;
    det.eta_total = f.number("detector", "eta_total", det.eta_total);
    det.dark_rate = f.quantity("detector", "dark_rate", Dim::frequency, det.dark_rate);
    det.dead_time = f.quantity("detector", "dead_time", Dim::time, det.dead_time);
    rc.setup.background_coeff = f.number("background", "coeff", rc.setup.background_coeff);

    rc.ion_purcell = f.number("ion", "purcell", rc.ion_purcell);
    rc.ion_detuning = f.quantity("ion", "detuning", Dim::frequency, rc.ion_detuning);
    rc.setup.gamma_d = angular(f.quantity("ion", "gamma_d", Dim::frequency, hertz(rc.setup.gamma_d)));
    rc.setup.adiabatic_threshold = f.number("solver", "adiabatic_threshold", rc.setup.adiabatic_threshold);

    auto& ens = rc.ensemble;
    ens.density = f.number("ensemble", "density_ppm", 3.0) * 1e-6 * EnsembleConfig::yttrium_site_density;
    ens.site1_fraction = f.number("ensemble", "site1_fraction", ens.site1_fraction);
    ens.sigma_inh = f.quantity("ensemble", "sigma_inh", Dim::frequency, ens.sigma_inh);
    ens.region.x = f.quantity("ensemble", "region_x", Dim::length, ens.region.x);
    ens.region.y = f.quantity("ensemble", "region_y", Dim::length, ens.region.y);
    ens.region.z = f.quantity("ensemble", "region_z", Dim::length, ens.region.z);
    ens.rng_seed = static_cast<std::uint64_t>(f.integer("ensemble", "seed", 1));
    ens.max_count = static_cast<std::size_t>(
        to_count(f.integer("ensemble", "max_count", static_cast<std::int64_t>(ens.max_count)), "ensemble.max_count"));
    ens.delta_g = f.number("ensemble", "delta_g", ens.delta_g);
    ens.f_center = cav.f_cav;

    auto& scan = rc.scan;
    scan.frequency_origin = cav.f_cav;
    std::uint64_t default_pulses = 1000;
    switch (e) {
    case Experiment::cavity_sweep:
        scan.axis = ScanAxis::cavity_detuning;
        default_pulses = 100000;
        break;
    case Experiment::saturation:
        scan.axis = ScanAxis::power;
        default_pulses = 10000;
        break;
    case Experiment::zeeman:
        scan.axis = ScanAxis::magnetic_field;
        default_pulses = 10000;
        break;
    default: scan.axis = ScanAxis::laser_frequency; break;
    }
    scan.pulses_per_point =
        to_count(f.integer("scan", "pulses_per_point", static_cast<std::int64_t>(default_pulses)),
                 "scan.pulses_per_point");
    scan.cavity_drift_rate = f.quantity("scan", "drift_rate", Dim::drift, 0.0);
    scan.co_scan = f.flag("scan", "co_scan", true);
    scan.full_mc = f.flag("scan", "full_mc", false);
    scan.masked = f.intervals("scan", "mask", Dim::frequency);
    const auto ple_grid = f.grid("scan", "grid", Dim::frequency, range(-2e9, 2e9, 2e6));
    const auto sweep_grid = f.grid("sweep", "detunings", Dim::frequency, range(-10e9, 10e9, 0.5e9));
    rc.sweep_gate_lifetimes = f.number("sweep", "gate_lifetimes", rc.sweep_gate_lifetimes);
    rc.sweep_bins = static_cast<int>(f.integer("sweep", "bins", rc.sweep_bins));
    const auto powers = f.grid("saturation", "powers", Dim::power, {0.0, 0.1e-9, 0.3e-9, 1e-9, 3e-9, 10e-9});
    const auto sat_offsets = f.grid("saturation", "offsets", Dim::frequency, range(-150e6, 150e6, 2e6));
    const auto fields = f.grid("zeeman", "fields", Dim::field, range(0.0, 2e-3, 0.1e-3));
    const auto zee_offsets = f.grid("zeeman", "offsets", Dim::frequency, range(-60e6, 60e6, 0.5e6));
    switch (e) {
    case Experiment::cavity_sweep: scan.grid = sweep_grid; break;
    case Experiment::saturation:
        scan.grid = powers;
        rc.ple_offsets = sat_offsets;
        break;
    case Experiment::zeeman:
        scan.grid = fields;
        rc.ple_offsets = zee_offsets;
        break;
    default: scan.grid = ple_grid; break;
    }

    rc.peaks.fixed_width = f.quantity("peaks", "width", Dim::frequency, rc.peaks.fixed_width);
    rc.peaks.threshold_sigma = f.number("peaks", "threshold_sigma", rc.peaks.threshold_sigma);
    rc.peaks.histogram_bin = f.quantity("peaks", "histogram_bin", Dim::frequency, rc.peaks.histogram_bin);
    rc.peaks.masked = scan.masked;

    auto& lt = rc.lifetime;
    lt.n_pulses = to_count(f.integer("lifetime", "pulses", 100000), "lifetime.pulses");
    lt.bin_width = f.quantity("lifetime", "bin_width", Dim::time, lt.bin_width);
    lt.laser_detuning = f.quantity("lifetime", "laser_detuning", Dim::frequency, 0.0);
    lt.cavity_detuning = f.quantity("lifetime", "cavity_detuning", Dim::frequency, 0.0);
    if (f.has("lifetime", "cavity_fraction")) lt.cavity_fraction = f.number("lifetime", "cavity_fraction", 1.0);

    auto& z = rc.zeeman;
    z.b_offset = f.vector("zeeman", "b_offset", Dim::field, {0.0, 1e-4, 0.0});
    rc.field_direction = f.vector("zeeman", "direction", Dim::none, rc.field_direction);
    z.delta_g = f.number("zeeman", "delta_g", ens.delta_g);
    z.include_spin_flip = f.flag("zeeman", "spin_flip", false);
    z.spin_flip_strength = f.number("zeeman", "spin_flip_strength", 0.0);
    z.sum_g = f.number("zeeman", "sum_g", 0.0);
    rc.zeeman_width = f.quantity("zeeman", "width", Dim::frequency, rc.zeeman_width);

    auto& g2 = rc.g2;
    g2.n_pulses = to_count(f.integer("g2", "pulses", 1'000'000), "g2.pulses");
    g2.max_offset = static_cast<int>(f.integer("g2", "max_offset", g2.max_offset));
    g2.target_a = f.number("g2", "target_a", g2.target_a);
    g2.blink.enabled = f.flag("g2", "blink", false);
    g2.blink.p_bright = f.number("g2", "p_bright", g2.blink.enabled ? 0.5 : 1.0);
    g2.blink.switch_time = f.quantity("g2", "switch_time", Dim::time, g2.blink.switch_time);

    auto& sp = rc.spin;
    sp.a_direct = f.number("spin", "a_direct", sp.a_direct);
    sp.a_raman = f.number("spin", "a_raman", sp.a_raman);
    sp.a_orbach = f.number("spin", "a_orbach", sp.a_orbach);
    sp.delta_orbach = f.quantity("spin", "delta_orbach", Dim::energy,
                                 sp.delta_orbach * constants::millielectronvolt) /
                      constants::millielectronvolt;
    sp.spin_splitting = f.quantity("spin", "nu", Dim::frequency, sp.spin_splitting * 1e9) * 1e-9;
    rc.temperatures = f.grid("spin", "temperatures", Dim::temperature, range(2.0, 8.0, 0.5));
    rc.fractions = f.grid("purcell_stats", "fractions", Dim::none, range(0.05, 1.0, 0.05));

    f.reject_unused();
    rc.canonical = f.canonical();
    if (exp_word.empty()) rc.canonical = "experiment = " + experiment_name(e) + "\n" + rc.canonical;

    try {
        rc.setup.validate();
        rc.setup.det.validate(seq.rep_period);
        ens.validate();
        sp.validate();
        z.validate();
        if (rc.peaks.fixed_width <= 0.0 || rc.peaks.histogram_bin <= 0.0)
            throw DomainError("peak width and histogram bin must be > 0");
        if (rc.sweep_bins < 5) throw DomainError("sweep.bins must be >= 5");
        if (g2.max_offset < 0) throw DomainError("g2.max_offset must be >= 0");
        g2.blink.validate();
    } catch (const DomainError& err) {
        throw InputError("config", err.what());
    }
    return rc;
}

} // namespace cavion
