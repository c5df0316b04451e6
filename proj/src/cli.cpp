#include "cavion/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "cavion/config.hpp"
#include "cavion/errors.hpp"
#include "cavion/experiments.hpp"
#include "cavion/io.hpp"

namespace cavion {

namespace fs = std::filesystem;

namespace {

struct OutFile {
    std::string name;
    std::string content;
};

struct Bundle {
    std::vector<OutFile> files;
    std::string summary;
};

class Emitter {
public:
    Emitter(const RunConfig& rc, bool json) : rc_(rc), json_(json), hash_(hex64(fnv1a64(rc.canonical))) {}

    const std::string& hash() const { return hash_; }

    void table(Bundle& b, const std::string& stem, const Table& t) const {
        const std::string title = "cavion " + experiment_name(rc_.experiment) + " " + stem;
        if (json_)
            b.files.push_back({stem + ".json", t.to_json(title, hash_, rc_.seed).dump(2) + "\n"});
        else
            b.files.push_back({stem + ".csv", t.to_csv(title, hash_, rc_.seed)});
    }

    void json(Bundle& b, const std::string& stem, nlohmann::json j) const {
        j["config_hash"] = hash_;
        j["seed"] = rc_.seed;
        b.files.push_back({stem + ".json", j.dump(2) + "\n"});
    }

private:
    const RunConfig& rc_;
    bool json_;
    std::string hash_;
};

double noise_for(double level_per_pulse, std::uint64_t pulses) {
    const double n = static_cast<double>(pulses);
    if (level_per_pulse * n >= 1.0) return dark_noise_sigma(level_per_pulse, n);
    return 1.0 / n; // a single count
}

IonRecord single_ion(const RunConfig& rc) {
    return make_single_ion(rc.setup, rc.ion_purcell, rc.setup.cavity.f_cav + rc.ion_detuning);
}

nlohmann::json fit_with_truth(const FitResult& fit, nlohmann::json extra) {
    auto j = fit_to_json(fit);
    for (auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

void add_spectrum_rows(Table& t, const Spectrum& s, std::vector<double> prefix) {
    for (const auto& p : s.points) {
        auto row = prefix;
        row.insert(row.end(), {p.axis, p.mean, p.stderr_, p.expected});
        t.add(row);
    }
}

Bundle run_ple(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ions = sample_ensemble(rc.ensemble, rc.setup.cavity, rc.setup.emitter);
    const auto spectrum = run_ple_scan(rc.scan, ions, rc.setup, rc.seed);
    Table t;
    t.columns = {"freq_offset_hz", "mean", "stderr", "expected", "cavity_offset_hz", "time_s"};
    t.meta = {{"frequency_origin_hz", format_number(spectrum.origin)}, {"ions", std::to_string(ions.size())}};
    auto points = spectrum.points;
    std::sort(points.begin(), points.end(), [](auto& a, auto& c) { return a.axis < c.axis; });
    std::vector<double> x, y;
    for (const auto& p : points) {
        t.add({p.axis, p.mean, p.stderr_, p.expected, p.cavity_offset, p.time});
        x.push_back(p.axis);
        y.push_back(p.mean);
    }
    em.table(b, "ple", t);

    auto po = rc.peaks;
    po.baseline = rc.setup.det.dark_rate * rc.setup.seq.gate_duration +
                  background_ion_rate(input_photon_number(rc.setup, rc.setup.seq.input_power, 0.0),
                                      rc.setup.background_coeff);
    po.noise_sigma = noise_for(po.baseline, rc.scan.pulses_per_point);
    if (x.size() >= 3) {
        const auto pk = count_peaks(x, y, po);
        auto pj = peaks_to_json(pk.list);
        pj["envelope"] = fit_to_json(pk.envelope);
        pj["masked_estimate"] = pk.masked_estimate;
        pj["noise_sigma"] = po.noise_sigma;
        pj["baseline"] = po.baseline;
        pj["frequency_origin_hz"] = spectrum.origin;
        em.json(b, "peaks", pj);
        Table d;
        d.columns = {"bin_center_hz", "peaks"};
        for (std::size_t i = 0; i < pk.bin_centers.size(); ++i) d.add({pk.bin_centers[i], pk.bin_counts[i]});
        em.table(b, "density", d);
        b.summary = std::to_string(ions.size()) + " ions, " + std::to_string(pk.list.peaks.size()) +
                    " peaks above threshold";
    }
    em.json(b, "ensemble", ensemble_to_json(ions, rc.ensemble.f_center));
    return b;
}

Bundle run_lifetime_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ion = single_ion(rc);
    const auto res = run_lifetime(ion, rc.setup, rc.lifetime, rc.seed);
    Table t;
    t.columns = {"t_s", "counts"};
    t.meta = {{"bin_width_s", format_number(rc.lifetime.bin_width)}, {"n_pulses", std::to_string(rc.lifetime.n_pulses)}};
    for (std::size_t i = 0; i < res.counts.size(); ++i)
        t.add({res.bin_start[i] + 0.5 * rc.lifetime.bin_width, res.counts[i]});
    em.table(b, "lifetime", t);
    em.json(b, "fit", fit_with_truth(res.fit, {{"true_tau_s", res.tau}, {"clicks", res.clicks},
                                                {"excitation", res.excitation}}));
    b.summary = "tau fit " + (res.fit.converged ? format_number(res.fit.params[1]) : std::string("n/a")) +
                " s, model " + format_number(res.tau) + " s";
    return b;
}

Bundle run_sweep_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ion = single_ion(rc);
    const auto res = run_cavity_sweep(rc.scan, ion, rc.setup, rc.seed, rc.sweep_gate_lifetimes, rc.sweep_bins);
    Table t;
    t.columns = {"detuning_hz", "enhancement", "weight", "stderr", "expected", "converged"};
    for (const auto& p : res.points)
        t.add({p.detuning, p.enhancement, p.converged ? 1.0 / (p.stderr_ * p.stderr_) : 0.0, p.stderr_,
               p.expected, p.converged ? 1.0 : 0.0});
    em.table(b, "cavity_sweep", t);
    em.json(b, "fit", fit_with_truth(res.lorentzian, {{"configured_purcell", rc.ion_purcell},
                                                      {"kappa_hz", hertz(rc.setup.cavity.kappa)}}));
    b.summary = res.lorentzian.converged ? "fwhm " + format_number(res.lorentzian.params[2]) + " Hz"
                                         : std::string("lorentzian fit did not converge");
    return b;
}

Bundle run_saturation_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ion = single_ion(rc);
    const auto res = run_saturation_series(rc.scan, ion, rc.setup, rc.ple_offsets, rc.seed);
    Table rows;
    rows.columns = {"power_w", "n_photons", "amplitude", "amplitude_err", "center_hz", "sigma_hz",
                    "offset",  "offset_err", "model_amplitude", "model_offset", "converged"};
    const double nan = std::nan("");
    for (const auto& r : res.rows) {
        const bool ok = r.mc.converged;
        rows.add({r.power, r.n_photons, ok ? r.mc.params[0] : nan, ok ? r.mc.stderr_[0] : nan,
                  ok ? r.mc.params[1] : nan, ok ? std::abs(r.mc.params[2]) : nan, ok ? r.mc.params[3] : nan,
                  ok ? r.mc.stderr_[3] : nan, r.model.converged ? r.model.params[0] : nan,
                  r.model.converged ? r.model.params[3] : nan, ok ? 1.0 : 0.0});
    }
    em.table(b, "saturation", rows);
    Table spectra;
    spectra.columns = {"power_w", "freq_offset_hz", "mean", "stderr", "expected"};
    for (const auto& s : res.spectra) add_spectrum_rows(spectra, s, {s.power});
    em.table(b, "spectra", spectra);
    b.summary = std::to_string(res.rows.size()) + " powers";
    return b;
}

Bundle run_zeeman_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ion = single_ion(rc);
    const auto res = run_zeeman_series(rc.scan, ion, rc.setup, rc.zeeman, rc.field_direction, rc.ple_offsets,
                                       rc.zeeman_width, rc.seed);
    Table rows;
    rows.columns = {"field_t", "model_splitting_hz", "separation_hz", "n_peaks"};
    for (const auto& r : res.rows)
        rows.add({r.field, r.model_splitting, r.separation, static_cast<double>(r.n_peaks)});
    em.table(b, "zeeman", rows);
    Table spectra;
    spectra.columns = {"field_t", "freq_offset_hz", "mean", "stderr", "expected"};
    for (std::size_t i = 0; i < res.spectra.size(); ++i) add_spectrum_rows(spectra, res.spectra[i], {res.rows[i].field});
    em.table(b, "spectra", spectra);
    b.summary = std::to_string(res.rows.size()) + " fields";
    return b;
}

Bundle run_g2_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto ion = single_ion(rc);
    const auto res = run_g2(ion, rc.setup, rc.g2, rc.seed);
    Table t;
    t.columns = {"offset", "g2", "stderr"};
    for (const auto& p : res.g2) t.add({static_cast<double>(p.offset), p.value, p.stderr_});
    em.table(b, "g2", t);
    nlohmann::json j{{"signal_per_pulse", res.signal_per_pulse},
                     {"background_per_pulse", res.background_per_pulse},
                     {"g2_floor", res.floor},
                     {"clicks_per_pulse", res.rate.mean},
                     {"clicks_per_pulse_stderr", res.rate.stderr_}};
    if (rc.g2.blink.enabled) {
        const auto bf = fit_bunching(res.g2, rc.setup.seq.rep_period);
        j["bunching"] = fit_to_json(bf.fit);
    }
    em.json(b, "summary", j);
    b.summary = "g2(0) = " + format_number(res.g2.front().value) + " +- " + format_number(res.g2.front().stderr_);
    return b;
}

Bundle run_spin_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto rows = run_spin_t1(rc.spin, rc.temperatures);
    Table t;
    t.columns = {"temperature_k", "t1_s", "rate_per_s", "direct_per_s", "raman_per_s", "orbach_per_s"};
    t.meta = {{"nu_ghz", format_number(rc.spin.spin_splitting)}};
    for (const auto& r : rows)
        t.add({r.temperature, r.result.t1, r.result.rate, r.result.direct, r.result.raman, r.result.orbach});
    em.table(b, "spin_t1", t);
    b.summary = std::to_string(rows.size()) + " temperatures";
    return b;
}

Bundle run_purcell_cmd(const RunConfig& rc, const Emitter& em) {
    Bundle b;
    const auto rows = run_purcell_stats(rc.ensemble, rc.setup, rc.fractions);
    Table t;
    t.columns = {"p_star_fraction", "p_star", "expected_ions"};
    for (const auto& r : rows) t.add({r.fraction, r.p_star, r.expected_ions});
    em.table(b, "purcell_stats", t);
    b.summary = std::to_string(rows.size()) + " thresholds";
    return b;
}

Bundle execute(const RunConfig& rc, const Emitter& em) {
    switch (rc.experiment) {
    case Experiment::ple: return run_ple(rc, em);
    case Experiment::lifetime: return run_lifetime_cmd(rc, em);
    case Experiment::cavity_sweep: return run_sweep_cmd(rc, em);
    case Experiment::saturation: return run_saturation_cmd(rc, em);
    case Experiment::zeeman: return run_zeeman_cmd(rc, em);
    case Experiment::g2: return run_g2_cmd(rc, em);
    case Experiment::spin_t1: return run_spin_cmd(rc, em);
    case Experiment::purcell_stats: return run_purcell_cmd(rc, em);
    }
    return {};
}

struct RunArgs {
    std::string target;
    std::optional<std::uint64_t> seed;
    std::string output = "cavion-out";
    unsigned threads = 1;
    std::string format = "csv";
    std::string temp_grid;
    std::optional<double> nu;
};

int do_run(const RunArgs& a, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    ConfigFile file;
    std::optional<Experiment> exp;
    if (fs::is_regular_file(a.target)) {
        std::ifstream is(a.target);
        file = ConfigFile::parse(is, a.target);
    } else {
        try {
            exp = experiment_from_name(a.target);
        } catch (const InputError&) {
            throw InputError(a.target, "not an experiment name or a readable config file");
        }
    }
    if (a.seed) file.set("", "seed", std::to_string(*a.seed));
    if (!a.temp_grid.empty()) file.set("spin", "temperatures", a.temp_grid + " K");
    if (a.nu) file.set("spin", "nu", format_number(*a.nu) + " GHz");
    RunConfig rc = load_run_config(file, exp);
    rc.setup.threads = std::max(1u, a.threads);

    const Emitter em(rc, a.format == "json");
    Bundle b = execute(rc, em);
    b.files.push_back({"config.cfg", rc.canonical});

    const fs::path dir(a.output);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : b.files) files.push_back(f.name);
    for (const auto& f : b.files) write_atomic(dir / f.name, f.content);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json manifest{{"schema", "cavion.manifest/1"},
                            {"experiment", experiment_name(rc.experiment)},
                            {"config_hash", em.hash()},
                            {"seed", rc.seed},
                            {"version", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"compiler", __VERSION__},
                            {"files", files},
                            {"wall_time_s", wall}};
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    out << experiment_name(rc.experiment) << ": " << b.summary << "\n"
        << "wrote " << b.files.size() + 1 << " files to " << dir.string() << "\n";
    return 0;
}

struct FitArgs {
    std::string file;
    std::string model;
    std::string weights;
    std::optional<double> width;
    std::optional<double> noise;
    std::string xcol, ycol, wcol;
    std::string output;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int do_fit(const FitArgs& a, std::ostream& out) {
    std::ifstream is(a.file);
    if (!is) throw InputError(a.file, "cannot open file");
    const auto data = read_numeric_csv(is, a.file);
    const std::size_t ncol = data.rows.front().size();
    auto col = [&](const std::string& name, std::size_t fallback) -> std::optional<std::size_t> {
        if (!name.empty()) return data.column(name);
        if (fallback < ncol) return fallback;
        return std::nullopt;
    };
    const auto xi = col(a.xcol, 0);
    const auto yi = col(a.ycol, 1);
    if (!xi || !yi) throw InputError(a.file, "need at least two columns (x, y)");
    std::optional<std::size_t> wi;
    if (!a.wcol.empty()) {
        wi = data.column(a.wcol);
    } else if (a.weights.empty()) {
        for (std::size_t i = 0; i < data.header.size(); ++i)
            if (data.header[i] == "weight") wi = i;
        if (!wi && data.header.empty() && ncol >= 3) wi = 2;
    }
    std::vector<double> x, y, w;
    for (const auto& r : data.rows) {
        if (wi && !(r[*wi] > 0.0)) continue; // unweighted rows carry no information
        x.push_back(r[*xi]);
        y.push_back(r[*yi]);
        if (wi) w.push_back(r[*wi]);
    }
    if (x.empty()) throw InputError(a.file, "no data rows");

    nlohmann::json result;
    bool ok = true;
    if (a.model == "peaks") {
        PeakCountOptions po;
        if (a.width) po.fixed_width = *a.width;
        if (a.noise) {
            po.noise_sigma = *a.noise;
        } else {
            std::size_t si = 0;
            bool found = false;
            for (std::size_t i = 0; i < data.header.size(); ++i)
                if (data.header[i] == "stderr") si = i, found = true;
            if (!found) throw InputError("--noise", "required when the file has no stderr column");
            std::vector<double> s;
            for (const auto& r : data.rows) s.push_back(r[si]);
            po.noise_sigma = median(s);
        }
        std::vector<std::size_t> idx(x.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto p, auto q) { return x[p] < x[q]; });
        std::vector<double> xs, ys;
        for (auto i : idx) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
        po.baseline = std::clamp(median(ys), 0.0, *std::max_element(ys.begin(), ys.end()));
        const auto pk = count_peaks(xs, ys, po);
        result = peaks_to_json(pk.list);
        result["envelope"] = fit_to_json(pk.envelope);
        out << "peaks: " << pk.list.peaks.size() << "  total_count: " << pk.list.total_count << "\n";
    } else {
        const Model m = model_from_name(a.model);
        bool poisson = false;
        if (!wi) {
            if (a.weights.empty() || a.weights == "poisson") poisson = true;
            else if (a.weights == "uniform") w.clear();
            else throw InputError("--weights", "expected poisson or uniform");
        }
        const auto fit = poisson ? fit_poisson(m, x, y) : fit_curve(m, x, y, w);
        result = fit_to_json(fit);
        out << "model " << model_name(m) << (fit.converged ? "  converged" : "  NOT converged") << " after "
            << fit.n_iter << " iterations\n";
        char line[160];
        for (std::size_t i = 0; i < fit.names.size(); ++i) {
            std::snprintf(line, sizeof line, "  %-6s %20.12g  +- %-20.6g\n", fit.names[i].c_str(), fit.params[i],
                          fit.converged ? fit.stderr_[i] : std::nan(""));
            out << line;
        }
        out << "  residual_norm " << format_number(fit.residual_norm) << "\n";
        ok = fit.converged;
    }
    if (!a.output.empty()) write_atomic(a.output, result.dump(2) + "\n");
    else out << result.dump(2) << "\n";
    return ok ? 0 : 1;
}

int do_inspect(const std::string& path, std::ostream& out) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "manifest.json";
    std::ifstream is(p);
    if (!is) throw InputError(p.string(), "no manifest found");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(p.string(), e.what());
    }
    out << j.dump(2) << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"cavion: cavity-coupled single-ion spectroscopy simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "run an experiment by name or from a config file");
    run->add_option("target", ra.target, "experiment name or config file")->required();
    run->add_option("--seed", ra.seed, "RNG seed");
    run->add_option("--output", ra.output, "output directory");
    run->add_option("--threads", ra.threads, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--format", ra.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--temp-grid", ra.temp_grid, "spin_t1 temperatures start:stop:step in K");
    run->add_option("--nu", ra.nu, "spin_t1 Zeeman frequency in GHz");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "fit a model to a CSV of x, y[, weight]");
    fit->add_option("file", fa.file, "CSV data file")->required();
    fit->add_option("--model", fa.model, "exponential, lorentzian, gaussian, linear or peaks")->required();
    fit->add_option("--weights", fa.weights, "poisson (default) or uniform");
    fit->add_option("--width", fa.width, "fixed peak FWHM in Hz for --model peaks");
    fit->add_option("--noise", fa.noise, "noise sigma for --model peaks");
    fit->add_option("--x", fa.xcol, "x column name");
    fit->add_option("--y", fa.ycol, "y column name");
    fit->add_option("--w", fa.wcol, "weight column name");
    fit->add_option("--output", fa.output, "write the JSON result here");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "print a run manifest");
    inspect->add_option("path", inspect_path, "output directory or manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    try {
        if (run->parsed()) return do_run(ra, out);
        if (fit->parsed()) return do_fit(fa, out);
        if (inspect->parsed()) return do_inspect(inspect_path, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numeric failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace cavion
