#include "cavion/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "cavion/errors.hpp"
#include "cavion/rng.hpp"

namespace cavion {

void ScanPlan::validate(ScanAxis expected) const {
    if (axis != expected) throw DomainError("scan plan has the wrong axis for this experiment");
    if (grid.empty()) throw DomainError("scan grid must be non-empty");
    if (pulses_per_point < 1) throw DomainError("pulses_per_point must be >= 1");
    if (!std::isfinite(cavity_drift_rate)) throw DomainError("cavity_drift_rate must be finite");
    for (double v : grid)
        if (!std::isfinite(v)) throw DomainError("scan grid values must be finite");
    auto sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DomainError("scan grid values must be distinct");
    if (cavity_drift_rate != 0.0 && grid.size() > 1) {
        const bool up = std::is_sorted(grid.begin(), grid.end());
        const bool down = std::is_sorted(grid.rbegin(), grid.rend());
        if (!up && !down) throw DomainError("scan grid must be monotone when cavity drift is enabled");
    }
    for (const auto& [a, b] : masked)
        if (!(b > a)) throw DomainError("masked intervals must have positive width");
}

void Setup::validate() const {
    cavity.validate();
    emitter.validate();
    seq.validate();
    if (!(gamma_d >= 0.0)) throw DomainError("gamma_d must be >= 0");
    if (!(background_coeff >= 0.0)) throw DomainError("background_coeff must be >= 0");
    if (!(adiabatic_threshold >= 0.0)) throw DomainError("adiabatic_threshold must be >= 0");
    if (zeeman) zeeman->validate();
}

namespace {

// The detector gate always follows the pulse sequence.
DetectorConfig detector_for(const Setup& s) {
    DetectorConfig d = s.det;
    d.gate_start = s.seq.gate_start;
    d.gate_duration = s.seq.gate_duration;
    d.validate(s.seq.rep_period);
    return d;
}

double dark_per_pulse(const Setup& s) { return s.det.dark_rate * s.seq.gate_duration; }

struct LineDrive {
    DriveParams drive;
    double cavity_fraction = 0.0;
};

LineDrive line_drive(const IonRecord& ion, const Setup& s, double f_line, double f_laser,
                     double f_cavity, double n_ph) {
    const double p = purcell_vs_detuning(ion.purcell, angular(f_line - f_cavity), s.cavity.kappa);
    LineDrive ld;
    ld.drive.omega_rabi = rabi_frequency(n_ph, ion.g);
    ld.drive.detuning = angular(f_laser - f_line);
    ld.drive.gamma = (p + 1.0) * s.emitter.gamma0;
    ld.drive.gamma_d = s.gamma_d;
    ld.cavity_fraction = eta_emitter(p);
    return ld;
}

double excitation(const Setup& s, const DriveParams& d) {
    return pulse_excitation(d, s.seq.excite_duration, s.adiabatic_threshold);
}

double gate_photons(const Setup& s, const DriveParams& d) {
    if (s.seq.gate_start < s.seq.excite_duration) return emitted_photons_per_pulse(d, s.seq);
    const double rho = excitation(s, d);
    return rho * window_capture(d.gamma, s.seq.gate_start - s.seq.excite_duration, s.seq.gate_duration);
}

std::vector<SpectralLine> lines_of(const IonRecord& ion, const Setup& s) {
    if (s.zeeman) return zeeman_lines(ion.f0, *s.zeeman);
    return {{ion.f0, 1.0}};
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
    const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

bool in_mask(const ScanPlan& plan, double v) {
    for (const auto& [a, b] : plan.masked)
        if (v >= a && v <= b) return true;
    return false;
}

} // namespace

IonRecord make_single_ion(const Setup& setup, double purcell, double f0) {
    if (!(purcell >= 0.0)) throw DomainError("purcell must be >= 0");
    IonRecord ion;
    ion.f0 = f0;
    ion.purcell = purcell;
    ion.g = std::sqrt(purcell * setup.cavity.kappa * setup.emitter.gamma0 / 4.0);
    return ion;
}

double input_photon_number(const Setup& setup, double power, double laser_minus_cavity) {
    const double n0 = intracavity_photon_number(power, setup.cavity.eta_cav, setup.cavity.kappa,
                                                angular(setup.cavity.f_cav));
    const double x = 2.0 * laser_minus_cavity / setup.cavity.kappa;
    return n0 / (1.0 + x * x);
}

double ion_clicks_per_pulse(const IonRecord& ion, const Setup& setup, double f_laser, double f_cavity,
                            double power) {
    const double n_ph = input_photon_number(setup, power, angular(f_laser - f_cavity));
    if (n_ph == 0.0) return 0.0;
    double clicks = 0.0;
    for (const auto& line : lines_of(ion, setup)) {
        const auto ld = line_drive(ion, setup, line.frequency, f_laser, f_cavity, n_ph);
        clicks += line.weight * ld.cavity_fraction * setup.det.eta_total * gate_photons(setup, ld.drive);
    }
    return clicks;
}

Spectrum run_ple_scan(const ScanPlan& plan, const std::vector<IonRecord>& ions, const Setup& setup,
                      std::uint64_t seed) {
    plan.validate(ScanAxis::laser_frequency);
    setup.validate();
    const DetectorConfig det = detector_for(setup);
    const double dwell = static_cast<double>(plan.pulses_per_point) * setup.seq.rep_period;
    const double n = static_cast<double>(plan.pulses_per_point);
    const double power = setup.seq.input_power;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < plan.grid.size(); ++i)
        if (!in_mask(plan, plan.grid[i])) order.push_back(i);

    Spectrum out;
    out.axis = ScanAxis::laser_frequency;
    out.origin = plan.frequency_origin;
    out.power = power;
    out.points.resize(order.size());

    auto point = [&](std::size_t j) {
        const std::size_t i = order[j];
        const double v = plan.grid[i];
        SpectrumPoint pt;
        pt.axis = v;
        pt.time = static_cast<double>(i) * dwell;
        pt.cavity_offset = -plan.cavity_drift_rate * pt.time;
        const double f_laser = plan.frequency_origin + v;
        const double f_cav = (plan.co_scan ? f_laser : setup.cavity.f_cav) + pt.cavity_offset;
        const double n_ph = input_photon_number(setup, power, angular(f_laser - f_cav));
        const double noise = dark_per_pulse(setup) + background_ion_rate(n_ph, setup.background_coeff);
        const std::uint64_t key = stream_key(v);

        if (!plan.full_mc) {
            double signal = 0.0;
            for (const auto& ion : ions) signal += ion_clicks_per_pulse(ion, setup, f_laser, f_cav, power);
            pt.expected = signal + noise;
            Rng rng = substream(seed, key);
            const double mean = n * pt.expected;
            const double k =
                mean > 0.0 ? static_cast<double>(std::poisson_distribution<std::uint64_t>(mean)(rng)) : 0.0;
            pt.mean = k / n;
            pt.stderr_ = std::sqrt(k) / n;
        } else {
            EmissionModel model;
            model.emission_start = setup.seq.excite_duration;
            model.rep_period = setup.seq.rep_period;
            model.background_per_pulse = background_ion_rate(n_ph, setup.background_coeff);
            double signal = 0.0;
            if (n_ph > 0.0) {
                for (const auto& ion : ions) {
                    for (const auto& line : lines_of(ion, setup)) {
                        const auto ld = line_drive(ion, setup, line.frequency, f_laser, f_cav, n_ph);
                        const double rho = line.weight * excitation(setup, ld.drive);
                        if (rho <= 0.0) continue;
                        model.emitters.push_back({rho, ld.drive.gamma, ld.cavity_fraction});
                        signal += rho * ld.cavity_fraction * det.eta_total *
                                  window_capture(ld.drive.gamma, det.gate_start - setup.seq.excite_duration,
                                                 det.gate_duration);
                    }
                }
            }
            pt.expected = signal + noise;
            const auto stream =
                simulate_clicks(model, det, BlinkConfig{}, plan.pulses_per_point, splitmix64(seed ^ key), 1);
            const auto rate = click_rate(stream);
            pt.mean = rate.mean;
            pt.stderr_ = rate.stderr_;
        }
        out.points[j] = pt;
    };
    parallel_for(order.size(), plan.cavity_drift_rate != 0.0 ? 1u : setup.threads, point);
    return out;
}

LifetimeResult run_lifetime(const IonRecord& ion, const Setup& setup, const LifetimeOptions& opts,
                            std::uint64_t seed) {
    setup.validate();
    if (!(opts.bin_width > 0.0)) throw DomainError("bin_width must be > 0");
    const DetectorConfig det = detector_for(setup);
    const double f_laser = ion.f0 + opts.laser_detuning;
    const double f_cav = ion.f0 + opts.cavity_detuning;
    const double n_ph = input_photon_number(setup, setup.seq.input_power, angular(f_laser - f_cav));
    const auto ld = line_drive(ion, setup, ion.f0, f_laser, f_cav, n_ph);

    LifetimeResult out;
    out.gamma = ld.drive.gamma;
    out.tau = 1.0 / ld.drive.gamma;
    out.excitation = n_ph > 0.0 ? excitation(setup, ld.drive) : 0.0;

    EmissionModel model;
    model.emission_start = setup.seq.excite_duration;
    model.rep_period = setup.seq.rep_period;
    model.background_per_pulse = background_ion_rate(n_ph, setup.background_coeff);
    model.emitters.push_back(
        {out.excitation, ld.drive.gamma, opts.cavity_fraction.value_or(ld.cavity_fraction)});
    const auto stream = simulate_clicks(model, det, BlinkConfig{}, opts.n_pulses, seed, setup.threads);
    out.clicks = stream.clicks.size();

    const auto nbins = static_cast<std::size_t>(std::floor(det.gate_duration / opts.bin_width + 1e-9));
    if (nbins < 5) throw DomainError("gate must span at least 5 bins");
    out.counts.assign(nbins, 0.0);
    for (const auto& c : stream.clicks) {
        const auto b = static_cast<std::size_t>((c.t - det.gate_start) / opts.bin_width);
        if (b < nbins) out.counts[b] += 1.0;
    }
    std::vector<double> centers(nbins);
    out.bin_start.resize(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        out.bin_start[b] = det.gate_start + b * opts.bin_width - setup.seq.excite_duration;
        centers[b] = out.bin_start[b] + 0.5 * opts.bin_width;
    }
    out.fit = fit_poisson(Model::exponential_offset, centers, out.counts);
    return out;
}

CavitySweepResult run_cavity_sweep(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                                   std::uint64_t seed, double gate_lifetimes, int bins) {
    plan.validate(ScanAxis::cavity_detuning);
    if (!(gate_lifetimes > 0.0) || bins < 5) throw DomainError("sweep needs gate_lifetimes > 0 and bins >= 5");
    CavitySweepResult out;
    std::vector<double> x, y, w;
    for (double delta : plan.grid) {
        SweepPoint pt;
        pt.detuning = delta;
        pt.expected = purcell_vs_detuning(ion.purcell, angular(delta), setup.cavity.kappa) + 1.0;
        Setup s = setup;
        s.seq.gate_start = s.seq.excite_duration;
        s.seq.gate_duration = gate_lifetimes / (pt.expected * s.emitter.gamma0);
        s.seq.rep_period = s.seq.gate_end();
        LifetimeOptions lo;
        lo.n_pulses = plan.pulses_per_point;
        lo.bin_width = s.seq.gate_duration / bins;
        lo.cavity_detuning = delta;
        const auto life = run_lifetime(ion, s, lo, splitmix64(seed ^ stream_key(delta)));
        if (life.fit.converged && life.fit.params[1] > 0.0) {
            const double tau = life.fit.params[1];
            pt.enhancement = 1.0 / (tau * setup.emitter.gamma0);
            pt.stderr_ = life.fit.stderr_[1] / (tau * tau * setup.emitter.gamma0);
            pt.converged = pt.stderr_ > 0.0 && std::isfinite(pt.stderr_);
        }
        if (pt.converged) {
            x.push_back(delta);
            y.push_back(pt.enhancement);
            w.push_back(1.0 / (pt.stderr_ * pt.stderr_));
        }
        out.points.push_back(pt);
    }
    if (x.size() >= 5) {
        const double peak = *std::max_element(y.begin(), y.end());
        out.lorentzian = fit_curve(Model::lorentzian_offset, x, y, w,
                                   {{"A", peak - 1.0}, {"x0", 0.0}, {"fwhm", hertz(setup.cavity.kappa)}, {"c", 1.0}});
    } else {
        out.lorentzian.model = Model::lorentzian_offset;
        out.lorentzian.names = model_parameters(Model::lorentzian_offset);
    }
    return out;
}

SaturationResult run_saturation_series(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                                       const std::vector<double>& ple_offsets, std::uint64_t seed) {
    plan.validate(ScanAxis::power);
    SaturationResult out;
    for (double power : plan.grid) {
        if (!(power >= 0.0)) throw DomainError("power grid values must be >= 0");
        ScanPlan sub;
        sub.axis = ScanAxis::laser_frequency;
        sub.grid = ple_offsets;
        sub.pulses_per_point = plan.pulses_per_point;
        sub.co_scan = plan.co_scan;
        sub.frequency_origin = ion.f0;
        sub.full_mc = plan.full_mc;
        Setup s = setup;
        s.seq.input_power = power;
        auto spectrum = run_ple_scan(sub, {ion}, s, splitmix64(seed ^ stream_key(power)));

        SaturationRow row;
        row.power = power;
        row.n_photons = input_photon_number(s, power, 0.0);
        std::vector<double> x, y, e, w;
        const double n = static_cast<double>(plan.pulses_per_point);
        for (const auto& p : spectrum.points) {
            x.push_back(p.axis);
            y.push_back(p.mean);
            e.push_back(p.expected);
            // the Poisson variance the MC points would carry
            w.push_back(n / std::max(p.expected, 0.1 / n));
        }
        if (x.size() >= 5) {
            row.mc = fit_poisson(Model::gaussian_offset, x, y, n);
            row.model = fit_curve(Model::gaussian_offset, x, e, w);
        } else {
            for (auto* r : {&row.mc, &row.model}) {
                r->model = Model::gaussian_offset;
                r->names = model_parameters(Model::gaussian_offset);
            }
        }
        out.rows.push_back(std::move(row));
        out.spectra.push_back(std::move(spectrum));
    }
    return out;
}

ZeemanResult run_zeeman_series(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                               const ZeemanConfig& base, const Vec3& field_direction,
                               const std::vector<double>& ple_offsets, double peak_width,
                               std::uint64_t seed) {
    plan.validate(ScanAxis::magnetic_field);
    const double norm = std::sqrt(field_direction[0] * field_direction[0] +
                                  field_direction[1] * field_direction[1] +
                                  field_direction[2] * field_direction[2]);
    if (!(norm > 0.0)) throw DomainError("field direction must be non-zero");
    ZeemanResult out;
    for (double b : plan.grid) {
        ZeemanConfig z = base;
        for (int k = 0; k < 3; ++k) z.b_applied[k] = b * field_direction[k] / norm;
        Setup s = setup;
        s.zeeman = z;
        ScanPlan sub;
        sub.axis = ScanAxis::laser_frequency;
        sub.grid = ple_offsets;
        sub.pulses_per_point = plan.pulses_per_point;
        sub.co_scan = plan.co_scan;
        sub.frequency_origin = ion.f0;
        sub.full_mc = plan.full_mc;
        auto spectrum = run_ple_scan(sub, {ion}, s, splitmix64(seed ^ stream_key(b)));

        ZeemanRow row;
        row.field = b;
        row.model_splitting = zeeman_splitting(z);
        std::vector<double> x, y;
        for (const auto& p : spectrum.points) {
            x.push_back(p.axis);
            y.push_back(p.mean);
        }
        if (x.size() >= 3 && std::is_sorted(x.begin(), x.end())) {
            const double n = static_cast<double>(plan.pulses_per_point);
            PeakCountOptions po;
            po.fixed_width = peak_width;
            po.baseline = dark_per_pulse(s) +
                          background_ion_rate(input_photon_number(s, s.seq.input_power, 0.0),
                                              s.background_coeff);
            // shot noise of the expected counts at each point
            for (const auto& p : spectrum.points) po.point_sigma.push_back(std::sqrt(std::max(p.expected * n, 1.0)) / n);
            auto peaks = count_peaks(x, y, po).list.peaks;
            row.n_peaks = peaks.size();
            if (peaks.size() >= 2) {
                std::partial_sort(peaks.begin(), peaks.begin() + 2, peaks.end(),
                                  [](const Peak& a, const Peak& c) { return a.amplitude > c.amplitude; });
                row.separation = std::abs(peaks[0].center - peaks[1].center);
            }
        }
        out.rows.push_back(row);
        out.spectra.push_back(std::move(spectrum));
    }
    return out;
}

G2Result run_g2(const IonRecord& ion, const Setup& setup, const G2Options& opts, std::uint64_t seed) {
    setup.validate();
    const DetectorConfig det = detector_for(setup);
    const double n_ph = input_photon_number(setup, setup.seq.input_power, 0.0);
    const auto ld = line_drive(ion, setup, ion.f0, ion.f0, ion.f0, n_ph);
    const double rho = n_ph > 0.0 ? excitation(setup, ld.drive) : 0.0;

    G2Result out;
    out.signal_per_pulse = rho * ld.cavity_fraction * det.eta_total *
                           window_capture(ld.drive.gamma, det.gate_start - setup.seq.excite_duration,
                                          det.gate_duration);
    const double dark = dark_per_pulse(setup);
    EmissionModel model;
    model.emission_start = setup.seq.excite_duration;
    model.rep_period = setup.seq.rep_period;
    model.emitters.push_back({rho, ld.drive.gamma, ld.cavity_fraction});
    if (opts.target_a > 0.0) {
        const double coeff = calibrate_background_coeff(opts.target_a, out.signal_per_pulse, dark, n_ph);
        model.background_per_pulse = background_ion_rate(n_ph, coeff);
    } else {
        model.background_per_pulse = background_ion_rate(n_ph, setup.background_coeff);
    }
    out.background_per_pulse = dark + model.background_per_pulse;
    out.floor = out.background_per_pulse > 0.0
                    ? g2_background_floor(out.signal_per_pulse / out.background_per_pulse)
                    : 0.0;
    const auto stream = simulate_clicks(model, det, opts.blink, opts.n_pulses, seed, setup.threads);
    out.rate = click_rate(stream);
    out.g2 = g2_pulsed(stream, opts.max_offset);
    return out;
}

std::vector<SpinT1Row> run_spin_t1(const SpinRelaxParams& base, const std::vector<double>& temperatures) {
    std::vector<SpinT1Row> rows;
    for (double t : temperatures) {
        SpinRelaxParams p = base;
        p.temperature = t;
        rows.push_back({t, spin_t1(p)});
    }
    return rows;
}

std::vector<PurcellStatsRow> run_purcell_stats(const EnsembleConfig& cfg, const Setup& setup,
                                               const std::vector<double>& fractions) {
    const double p_max = purcell_factor(setup.cavity.g_if, setup.cavity.kappa, setup.emitter.gamma0);
    std::vector<PurcellStatsRow> rows;
    for (double f : fractions) rows.push_back({f, f * p_max, ions_above_purcell(cfg, setup.cavity, f)});
    return rows;
}

} // namespace cavion
