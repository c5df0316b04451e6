// Acceptance checks for the cavion toolkit. One PASS/FAIL line per criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavion/analysis.hpp"
#include "cavion/cli.hpp"
#include "cavion/detection.hpp"
#include "cavion/dynamics.hpp"
#include "cavion/ensemble.hpp"
#include "cavion/experiments.hpp"
#include "cavion/physics_core.hpp"

using namespace cavion;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream note;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            note << " [failed: " << what << "]";
        }
    }
    template <class T>
    Check& operator<<(const T& v) {
        note << v;
        return *this;
    }
};

int failures = 0;

void report(int n, const std::string& title, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.note << " [exception: " << e.what() << "]";
    }
    if (!c.ok) ++failures;
    std::printf("%s criterion %d: %s | %s\n", c.ok ? "PASS" : "FAIL", n, title.c_str(), c.note.str().c_str());
    std::fflush(stdout);
}

bool near(double v, double target, double tol) { return std::abs(v - target) <= tol; }

std::vector<double> range(double a, double b, double step) {
    std::vector<double> v;
    const auto n = static_cast<long>(std::llround((b - a) / step));
    for (long i = 0; i <= n; ++i) v.push_back(a + static_cast<double>(i) * step);
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cavion");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

void purcell_closure(Check& c) {
    const double p1 = purcell_factor(angular(2.08e6), angular(3.85e9), angular(14.0));
    const double p2 = purcell_factor(angular(2.62e6), angular(3.85e9), angular(14.0));
    c << "P(2.08 MHz) = " << p1 << ", P(2.62 MHz) = " << p2;
    c.expect(near(p1, 321, 1), "321 +- 1");
    c.expect(near(p1, 320, 12), "inside 320 +- 12");
    c.expect(near(p2, 510, 1), "510 +- 1");
}

void lifetime_closure(Check& c) {
    const double tau = enhanced_lifetime(252, 11.4e-3);
    c << "tau(252) = " << tau * 1e6 << " us";
    c.expect(near(tau, 45.06e-6, 0.005e-6), "45.06 us");
    c.expect(near(tau, 45.3e-6, 0.7e-6), "inside 45.3 +- 0.7 us");

    Setup s;
    s.det.dark_rate = 10;
    s.seq.rep_period = 400e-6;
    s.seq.gate_duration = 390e-6;
    const auto ion = make_single_ion(s, 252, s.cavity.f_cav);
    LifetimeOptions o;
    o.n_pulses = 100000;
    o.bin_width = 2e-6;
    const auto r = run_lifetime(ion, s, o, 2);
    c.expect(r.fit.converged, "fit converged");
    if (!r.fit.converged) return;
    const double t = r.fit.param("tau"), e = r.fit.error("tau");
    c << "; MC fit " << t * 1e6 << " +- " << e * 1e6 << " us over " << o.n_pulses << " pulses";
    c.expect(std::abs(t - r.tau) <= 1.96 * e, "simulated tau inside the 95% CI");
}

void dipole(Check& c) {
    const auto em = EmitterConstants::erbium_yso();
    const double d = dipole_from_lifetime(em.gamma0, em.beta, em.n_host, em.omega);
    c << "d = " << d << " C m";
    c.expect(near(d, 2.80e-32, 0.028e-32), "2.80e-32 +- 1%");
}

void efficiency(Check& c) {
    const double e = efficiency_total({0.16, 0.46, 0.8, 0.67});
    const double eta = eta_cav_from_contrast(0.46, true);
    c << "eta = " << e << ", eta_cav(0.46) = " << eta;
    c.expect(near(e, 0.0394, 0.00005), "0.0394");
    c.expect(near(eta, 0.161, 0.001), "0.161 +- 0.001");
}

void saturation(Check& c) {
    // single saturated ion, gate long enough to capture the full decay
    Setup s;
    s.det.dark_rate = 0;
    s.seq.input_power = 100e-9;
    s.seq.rep_period = 1e-3;
    s.seq.gate_duration = 990e-6;
    const auto ion = make_single_ion(s, 125, s.cavity.f_cav);
    ScanPlan one;
    one.grid = {0.0};
    one.pulses_per_point = 1'000'000;
    one.full_mc = true;
    one.frequency_origin = ion.f0;
    const auto sp = run_ple_scan(one, {ion}, s, 5);
    const double k = sp.points[0].mean;
    c << "saturated clicks/pulse = " << k << " +- " << sp.points[0].stderr_;
    c.expect(near(k, 0.020, 0.002), "0.020 +- 0.002");

    Setup t;
    t.det.dark_rate = 10;
    ScanPlan plan;
    plan.axis = ScanAxis::power;
    plan.grid = {0.0, 0.1e-9, 0.3e-9, 1e-9, 3e-9, 10e-9};
    plan.pulses_per_point = 20000;
    const auto ion2 = make_single_ion(t, 125, t.cavity.f_cav);
    const auto r = run_saturation_series(plan, ion2, t, range(-150e6, 150e6, 2e6), 9);
    int worst = 0;
    double worst_z = 0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        if (row.power == 0.0) {
            // no drive: every point sits at the dark level
            for (const auto& p : r.spectra[i].points) {
                c.expect(near(p.expected, t.det.dark_rate * t.seq.gate_duration, 1e-15), "zero power is flat");
                c.expect(std::abs(p.mean - p.expected) <= 5 * std::sqrt(p.expected / 20000), "zero power MC");
            }
            continue;
        }
        c.expect(row.mc.converged && row.model.converged, "fits converged");
        if (!(row.mc.converged && row.model.converged)) continue;
        const double z = std::abs(row.mc.param("A") - row.model.param("A")) / row.mc.error("A");
        if (z > worst_z) worst_z = z, worst = static_cast<int>(i);
        c.expect(z < 3, "amplitude within 3 sigma at " + std::to_string(row.power) + " W");
    }
    c << "; amplitude agreement worst " << worst_z << " sigma at " << r.rows[worst].power * 1e9 << " nW";
}

void g2_floor(Check& c) {
    const double f = g2_background_floor(5.5);
    c << "floor(5.5) = " << f;
    c.expect(near(f, 0.284, 0.0005), "0.284");
    c.expect(near(f, 0.29, 0.06), "inside 0.29 +- 0.06");

    Setup s;
    s.det.dark_rate = 10;
    const auto ion = make_single_ion(s, 125, s.cavity.f_cav);
    G2Options o;
    o.n_pulses = 10'000'000;
    o.max_offset = 3;
    s.threads = std::max(1u, std::thread::hardware_concurrency());
    const auto r = run_g2(ion, s, o, 13);
    c << "; MC g2(0) = " << r.g2[0].value << " +- " << r.g2[0].stderr_ << " (floor " << r.floor << ")";
    c.expect(std::abs(r.g2[0].value - r.floor) <= 3 * r.g2[0].stderr_, "MC within 3 SE of the floor");

    DetectorConfig det;
    det.eta_total = 0.04;
    EmissionModel m;
    m.emitters.push_back({0.5, 1.0 / 90e-6, 0.99});
    const auto ideal = g2_pulsed(simulate_clicks(m, det, {}, 1'000'000, 3), 1);
    c << "; ideal g2(0) = " << ideal[0].value;
    c.expect(ideal[0].value == 0.0, "ideal emitter exactly 0");
}

void spin(Check& c) {
    SpinRelaxParams p;
    const double t4 = spin_t1(p).t1;
    p.temperature = 6.0;
    const double t6 = spin_t1(p).t1;
    p.temperature = 0.9;
    p.spin_splitting = 0.1;
    const double tl = spin_t1(p).t1;
    c << "T1(4 K) = " << t4 * 1e3 << " ms, T1(6 K) = " << t6 * 1e6 << " us, T1(0.9 K, 0.1 GHz) = " << tl << " s";
    c.expect(near(t4, 1.64e-3, 0.01e-3), "1.64 ms");
    c.expect(near(t4, 1.5e-3, 0.3e-3), "within 20% of 1.5 ms");
    c.expect(near(t6, 8.4e-6, 0.1e-6), "8.4 us");
    c.expect(near(t6, 7.5e-6, 1.5e-6), "within 20% of 7.5 us");
    c.expect(tl > 1e3, "> 1e3 s");
}

void zeeman(Check& c) {
    auto split = [](double b, Vec3 offset) {
        ZeemanConfig z;
        z.b_offset = offset;
        z.b_applied = {0, 0, b};
        return zeeman_splitting(z);
    };
    const Vec3 perp{0, 1e-4, 0}, para{0, 0, 1e-4};
    const double slope = (split(1.0, perp) - split(0.9, perp)) / 0.1;
    const double zero = split(0.0, perp);
    c << "slope = " << slope * 1e-9 << " GHz/T, splitting(0) = " << zero * 1e-6 << " MHz";
    c.expect(near(slope, 21.69e9, 21.69e9 * 1e-3), "21.69 GHz/T +- 0.1%");
    c.expect(near(zero, 2.17e6, 2.17e6 * 1e-3), "2.17 MHz +- 0.1%");
    // curvature: deviation from the chord between 0 and 2 G
    const double bend_perp = split(1e-4, perp) - 0.5 * (split(0, perp) + split(2e-4, perp));
    const double bend_para = split(1e-4, para) - 0.5 * (split(0, para) + split(2e-4, para));
    c << ", midpoint deviation " << bend_perp * 1e-3 << " kHz (perpendicular offset), " << bend_para * 1e-3
      << " kHz (collinear)";
    c.expect(std::abs(bend_perp) > 0.05 * zero, "non-collinear offset bends the curve");
    c.expect(std::abs(bend_para) < 1e-6 * zero, "collinear offset stays linear");
}

void peak_counting(Check& c) {
    // low power keeps the lines near the fixed 6 MHz counting width
    Setup s;
    s.det.dark_rate = 10;
    s.seq.input_power = 0.01e-9;
    s.threads = std::max(1u, std::thread::hardware_concurrency());
    EnsembleConfig cfg;
    cfg.rng_seed = 2;
    const auto ions = sample_ensemble(cfg, s.cavity, s.emitter);
    ScanPlan plan;
    plan.grid = range(-12e9, 12e9, 1e6);
    plan.frequency_origin = cfg.f_center;
    plan.pulses_per_point = 10000;
    const auto sp = run_ple_scan(plan, ions, s, 17);
    std::vector<double> x, y;
    for (const auto& p : sp.points) {
        x.push_back(p.axis);
        y.push_back(p.mean);
    }
    PeakCountOptions o;
    o.baseline = s.det.dark_rate * s.seq.gate_duration;
    o.noise_sigma = dark_noise_sigma(o.baseline, plan.pulses_per_point);
    const auto res = count_peaks(x, y, o);
    const double sigma = std::abs(res.envelope.param("sigma"));
    c << ions.size() << " ions, " << res.list.peaks.size() << " peaks, total_count " << res.list.total_count
      << ", envelope sigma " << sigma * 1e-9 << " GHz";
    c.expect(res.list.total_count >= 500, "total_count >= 500");
    c.expect(res.envelope.converged && near(sigma, 2.9e9, 0.15 * 2.9e9), "sigma within 15% of 2.9 GHz");

    // separable oracle
    std::mt19937_64 rng(50);
    const auto ox = range(-2e9, 2e9, 1e6);
    std::vector<double> centers, oy(ox.size(), 8e-4);
    for (int i = 0; i < 50; ++i)
        centers.push_back(-1.75e9 + i * 70e6 + std::uniform_real_distribution<double>(-15e6, 15e6)(rng));
    for (std::size_t i = 0; i < ox.size(); ++i) {
        for (double c0 : centers) oy[i] += model_value(Model::lorentzian_offset, {0.005, c0, 6e6, 0}, ox[i]);
        oy[i] += 1e-4 * std::normal_distribution<double>()(rng);
    }
    PeakCountOptions oo;
    oo.noise_sigma = 1e-4;
    oo.baseline = 8e-4;
    oo.threshold_sigma = 5;
    const auto ores = count_peaks(ox, oy, oo);
    bool all = ores.list.peaks.size() == 50;
    for (double c0 : centers) {
        bool hit = false;
        for (const auto& p : ores.list.peaks) hit = hit || std::abs(p.center - c0) < 0.6e6;
        all = all && hit;
    }
    c << "; oracle recovered " << ores.list.peaks.size() << "/50";
    c.expect(all, "50-peak oracle exact");
}

void enhancement_sweep(Check& c) {
    Setup s;
    s.det.dark_rate = 10;
    s.seq.input_power = 10e-9;
    const double p_max = 320;
    const auto ion = make_single_ion(s, p_max, s.cavity.f_cav);
    ScanPlan plan;
    plan.axis = ScanAxis::cavity_detuning;
    plan.grid = range(-10e9, 10e9, 0.5e9);
    plan.pulses_per_point = 100000;
    const auto r = run_cavity_sweep(plan, ion, s, 3);
    c.expect(r.lorentzian.converged, "fit converged");
    if (!r.lorentzian.converged) return;
    const double w = r.lorentzian.param("fwhm"), a = r.lorentzian.param("A");
    c << "FWHM = " << w * 1e-9 << " +- " << r.lorentzian.error("fwhm") * 1e-9 << " GHz, peak P = " << a << " +- "
      << r.lorentzian.error("A");
    c.expect(near(w, 3.85e9, 0.05 * 3.85e9), "FWHM 3.85 GHz +- 5%");
    c.expect(near(a, p_max, 0.05 * p_max), "peak P_max +- 5%");
}

void hygiene(Check& c) {
    // step-size convergence at the operating point
    DriveParams d;
    d.gamma = 126.0 / 11.4e-3;
    d.gamma_d = angular(3.1e6);
    d.omega_rabi = std::sqrt(0.2046) * angular(1.3e6);
    const auto coarse = evolve_bloch({}, d, 10e-6, 0.5e-9, 1u << 30);
    const auto fine = evolve_bloch({}, d, 10e-6, 0.25e-9, 1u << 30);
    const double a = coarse.final_state().rho_ee, b = fine.final_state().rho_ee;
    c << "step halving (" << coarse.step << " -> " << fine.step << " s) " << std::abs(a - b);
    c.expect(fine.step < coarse.step, "steps differ");
    c.expect(std::abs(a - b) < 1e-6, "step halving < 1e-6");

    // steady-state oracle
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lg(3, 6), ud(-2, 2);
    double worst = 0;
    for (int i = 0; i < 20; ++i) {
        DriveParams q;
        q.gamma = std::pow(10, lg(rng));
        q.gamma_d = std::pow(10, lg(rng));
        q.omega_rabi = std::pow(10, lg(rng));
        q.detuning = ud(rng) * (q.gamma2() + q.omega_rabi);
        const double g2 = q.gamma2();
        const double sat = q.omega_rabi * q.omega_rabi / (q.gamma * g2) * g2 * g2 / (q.detuning * q.detuning + g2 * g2);
        const double t = 40 / q.gamma;
        const double rho = evolve_bloch({}, q, t, t / 2e4, 1u << 30).final_state().rho_ee;
        worst = std::max(worst, std::abs(rho - 0.5 * sat / (1 + sat)));
    }
    c << ", steady state " << worst;
    c.expect(worst < 1e-4, "steady state < 1e-4");

    // Jacobians against central differences
    double jworst = 0;
    const std::vector<std::pair<Model, std::vector<double>>> cases = {
        {Model::exponential_offset, {3.0, 0.7, 0.2}},
        {Model::lorentzian_offset, {2.0, 0.1, 0.9, 0.3}},
        {Model::gaussian_offset, {1.5, -0.2, 0.6, 0.1}},
        {Model::linear, {0.4, 1.1}}};
    for (const auto& [m, p] : cases) {
        for (double x = -1.9; x < 2; x += 0.3) {
            const auto j = model_jacobian(m, p, x);
            for (std::size_t i = 0; i < p.size(); ++i) {
                auto hi = p, lo = p;
                const double h = 1e-6 * std::max(1.0, std::abs(p[i]));
                hi[i] += h;
                lo[i] -= h;
                const double fd = (model_value(m, hi, x) - model_value(m, lo, x)) / (2 * h);
                jworst = std::max(jworst, std::abs(j[i] - fd) / std::max(std::abs(fd), 1e-3));
            }
        }
    }
    c << ", jacobian " << jworst;
    c.expect(jworst < 1e-5, "jacobian < 1e-5");

    // every command twice with the same seed
    const auto root = fs::temp_directory_path() / "cavion_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::string>> configs = {
        {"ple", "experiment = ple\n[scan]\ngrid = -0.5:0.5:0.002 GHz\n[ensemble]\nregion_z = 0.1 um\n"},
        {"lifetime", "experiment = lifetime\n[lifetime]\npulses = 20000\n"},
        {"cavity_sweep", "experiment = cavity_sweep\n[sweep]\ndetunings = -6:6:2 GHz\n[scan]\npulses_per_point = 20000\n"},
        {"saturation", "experiment = saturation\n[scan]\npulses_per_point = 2000\n"},
        {"zeeman", "experiment = zeeman\n[zeeman]\nfields = 0:1:0.5 mT\n[scan]\npulses_per_point = 2000\n"},
        {"g2", "experiment = g2\n[g2]\npulses = 200000\nblink = true\np_bright = 0.5\n"},
        {"spin_t1", "experiment = spin_t1\n"},
        {"purcell_stats", "experiment = purcell_stats\n"},
    };
    int identical = 0;
    for (const auto& [name, text] : configs) {
        const auto cfg = root / (name + ".cfg");
        std::ofstream(cfg) << text;
        const auto da = root / (name + "_a"), db = root / (name + "_b");
        const int ra = cli({"run", cfg.string(), "--seed", "7", "--output", da.string()});
        const int rb = cli({"run", cfg.string(), "--seed", "7", "--output", db.string(), "--threads", "2"});
        bool same = ra == 0 && rb == 0;
        for (const auto& e : fs::directory_iterator(da)) {
            const auto fname = e.path().filename();
            if (fname == "manifest.json") {
                auto ma = nlohmann::json::parse(slurp(e.path()));
                auto mb = nlohmann::json::parse(slurp(db / fname));
                ma.erase("wall_time_s");
                mb.erase("wall_time_s");
                same = same && ma == mb;
            } else {
                same = same && slurp(e.path()) == slurp(db / fname);
            }
        }
        identical += same;
        c.expect(same, name + " outputs byte-identical");
    }
    c << ", byte-identical commands " << identical << "/" << configs.size();
    fs::remove_all(root);
}

} // namespace

int main() {
    report(1, "Purcell closure", purcell_closure);
    report(2, "lifetime closure", lifetime_closure);
    report(3, "dipole moment", dipole);
    report(4, "efficiency budget", efficiency);
    report(5, "saturation", saturation);
    report(6, "g2 floor", g2_floor);
    report(7, "spin T1", spin);
    report(8, "Zeeman", zeeman);
    report(9, "peak counting", peak_counting);
    report(10, "enhancement versus detuning", enhancement_sweep);
    report(11, "numerical hygiene", hygiene);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
