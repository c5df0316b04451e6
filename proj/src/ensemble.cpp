#include "cavion/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cavion/errors.hpp"
#include "cavion/rng.hpp"

namespace cavion {

EnsembleConfig EnsembleConfig::from_ppm(double ppm) {
    EnsembleConfig cfg;
    cfg.density = ppm * 1e-6 * yttrium_site_density;
    return cfg;
}

double EnsembleConfig::mean_separation() const {
    return std::cbrt(1.0 / site1_density());
}

double EnsembleConfig::inhomogeneous_fwhm() const {
    return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma_inh;
}

void EnsembleConfig::validate() const {
    if (!(density >= 0.0) || !std::isfinite(density)) throw DomainError("density must be >= 0");
    if (!(site1_fraction >= 0.0 && site1_fraction <= 1.0))
        throw DomainError("site1_fraction must lie in [0, 1]");
    if (!(sigma_inh > 0.0)) throw DomainError("sigma_inh must be > 0");
    if (!(region.x > 0.0 && region.y > 0.0 && region.z > 0.0))
        throw DomainError("region dimensions must be > 0");
    if (!std::isfinite(f_center)) throw DomainError("f_center must be finite");
}

std::vector<IonRecord> sample_ensemble(const EnsembleConfig& cfg, const CavityParams& cavity,
                                       const EmitterConstants& emitter) {
    cfg.validate();
    cavity.validate();
    const double mean = cfg.expected_count();
    if (mean > static_cast<double>(cfg.max_count)) {
        throw CapacityError("expected ion count " + std::to_string(mean) +
                            " exceeds max_count " + std::to_string(cfg.max_count));
    }
    std::vector<IonRecord> ions;
    if (mean <= 0.0) return ions;

    Rng rng(splitmix64(cfg.rng_seed));
    const auto n = std::poisson_distribution<std::size_t>(mean)(rng);
    if (n > cfg.max_count) throw CapacityError("sampled ion count exceeds max_count");

    std::uniform_real_distribution<double> ux(-0.5 * cfg.region.x, 0.5 * cfg.region.x);
    std::uniform_real_distribution<double> uy(-0.5 * cfg.region.y, 0.5 * cfg.region.y);
    std::uniform_real_distribution<double> uz(0.0, cfg.region.z);
    std::normal_distribution<double> freq(cfg.f_center, cfg.sigma_inh);

    ions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        IonRecord ion;
        ion.position = {ux(rng), uy(rng), uz(rng)};
        ion.f0 = freq(rng);
        ion.g = coupling_at(cavity, ion.position);
        ion.purcell = purcell_factor(ion.g, cavity.kappa, emitter.gamma0);
        ion.delta_g_spin = cfg.delta_g;
        ions.push_back(ion);
    }
    return ions;
}

namespace {

// integral_0^x sqrt(1 - s^2/a^2) ds for 0 <= x <= a
double half_chord_integral(double x, double a) {
    const double r = std::clamp(x / a, 0.0, 1.0);
    return 0.5 * a * (r * std::sqrt(1.0 - r * r) + std::asin(r));
}

// Area of the ellipse x^2/a^2 + y^2/b^2 <= 1 clipped to |x| <= hx, |y| <= hy.
double clipped_ellipse_area(double a, double b, double hx, double hy) {
    const double xm = std::min(a, hx);
    if (b <= hy) return 4.0 * b * half_chord_integral(xm, a);
    // the chord height b sqrt(1 - x^2/a^2) exceeds hy for |x| < xc
    const double xc = a * std::sqrt(1.0 - (hy * hy) / (b * b));
    const double x1 = std::min(xc, xm);
    return 4.0 * (hy * x1 + b * (half_chord_integral(xm, a) - half_chord_integral(x1, a)));
}

} // namespace

double ions_above_purcell(const EnsembleConfig& cfg, const CavityParams& cavity,
                          double p_star_fraction, double depth_step) {
    cfg.validate();
    cavity.validate();
    if (!(p_star_fraction > 0.0 && p_star_fraction <= 1.0))
        throw DomainError("p_star_fraction must lie in (0, 1]");
    if (!(depth_step > 0.0)) throw DomainError("depth_step must be > 0");

    const double wx = cavity.envelope.waist_x;
    const double wy = cavity.envelope.waist_y;
    const auto slices = static_cast<std::size_t>(std::ceil(cfg.region.z / depth_step));
    const double dz = cfg.region.z / static_cast<double>(slices);

    double volume = 0.0;
    for (std::size_t k = 0; k < slices; ++k) {
        const double z = (static_cast<double>(k) + 0.5) * dz;
        // transverse intensity needed at this depth for P >= fraction * P_max
        const double t = p_star_fraction * std::exp2(z / cavity.z_half);
        if (t >= 1.0) break;
        const double r = std::sqrt(0.5 * std::log(1.0 / t));
        volume += clipped_ellipse_area(wx * r, wy * r, 0.5 * cfg.region.x, 0.5 * cfg.region.y) * dz;
    }
    return cfg.site1_density() * volume;
}

std::size_t count_above_purcell(const std::vector<IonRecord>& ions, double threshold) {
    return static_cast<std::size_t>(std::count_if(
        ions.begin(), ions.end(), [threshold](const IonRecord& i) { return i.purcell >= threshold; }));
}

void ZeemanConfig::validate() const {
    if (!(delta_g >= 0.0)) throw DomainError("delta_g must be >= 0");
    if (include_spin_flip && !(spin_flip_strength >= 0.0))
        throw DomainError("spin_flip_strength must be >= 0");
}

namespace {

double total_field(const ZeemanConfig& z) {
    const double bx = z.b_applied[0] + z.b_offset[0];
    const double by = z.b_applied[1] + z.b_offset[1];
    const double bz = z.b_applied[2] + z.b_offset[2];
    return std::sqrt(bx * bx + by * by + bz * bz);
}

} // namespace

double zeeman_splitting(const ZeemanConfig& z) {
    z.validate();
    return z.delta_g * constants::bohr_magneton * total_field(z) / constants::planck;
}

std::pair<double, double> zeeman_frequencies(double f0, const ZeemanConfig& z) {
    const double half = 0.5 * zeeman_splitting(z);
    return {f0 - half, f0 + half};
}

std::vector<SpectralLine> zeeman_lines(double f0, const ZeemanConfig& z) {
    const auto [lo, hi] = zeeman_frequencies(f0, z);
    const double flip = z.include_spin_flip ? z.spin_flip_strength : 0.0;
    const double w_cons = 0.5 / (1.0 + flip);
    std::vector<SpectralLine> lines{{lo, w_cons}, {hi, w_cons}};
    if (flip > 0.0) {
        const double half =
            0.5 * z.sum_g * constants::bohr_magneton * total_field(z) / constants::planck;
        lines.push_back({f0 - half, w_cons * flip});
        lines.push_back({f0 + half, w_cons * flip});
    }
    return lines;
}

double background_ion_rate(double n_ph, double coeff) {
    if (!(n_ph >= 0.0)) throw DomainError("photon number must be >= 0");
    if (!(coeff >= 0.0)) throw DomainError("background coefficient must be >= 0");
    return coeff * n_ph;
}

double calibrate_background_coeff(double target_a, double ion_signal_per_pulse,
                                  double dark_per_pulse, double n_ph) {
    if (!(target_a > 0.0)) throw DomainError("target signal-to-background must be > 0");
    if (!(n_ph > 0.0)) throw DomainError("photon number must be > 0");
    const double total_bg = ion_signal_per_pulse / target_a;
    if (total_bg < dark_per_pulse)
        throw DomainError("dark counts alone exceed the requested background level");
    return (total_bg - dark_per_pulse) / n_ph;
}

nlohmann::json ensemble_to_json(const std::vector<IonRecord>& ions, double f_center) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& ion : ions) {
        arr.push_back({{"x_nm", ion.position[0] * 1e9},
                       {"y_nm", ion.position[1] * 1e9},
                       {"z_nm", ion.position[2] * 1e9},
                       {"f0_ghz", (ion.f0 - f_center) * 1e-9},
                       {"g_mhz", hertz(ion.g) * 1e-6},
                       {"purcell", ion.purcell},
                       {"delta_g", ion.delta_g_spin},
                       {"site", ion.site == Site::site1 ? "site1" : "site2"}});
    }
    return {{"schema", "cavion.ensemble/1"},
            {"f_center_hz", f_center},
            {"count", ions.size()},
            {"ions", std::move(arr)}};
}

std::vector<IonRecord> ensemble_from_json(const nlohmann::json& j, double* f_center) {
    if (j.value("schema", "") != "cavion.ensemble/1")
        throw InputError("schema", "expected cavion.ensemble/1");
    const double fc = j.at("f_center_hz").get<double>();
    if (f_center) *f_center = fc;
    std::vector<IonRecord> ions;
    for (const auto& e : j.at("ions")) {
        IonRecord ion;
        ion.position = {e.at("x_nm").get<double>() * 1e-9, e.at("y_nm").get<double>() * 1e-9,
                        e.at("z_nm").get<double>() * 1e-9};
        ion.f0 = fc + e.at("f0_ghz").get<double>() * 1e9;
        ion.g = angular(e.at("g_mhz").get<double>() * 1e6);
        ion.purcell = e.at("purcell").get<double>();
        ion.delta_g_spin = e.at("delta_g").get<double>();
        const auto site = e.at("site").get<std::string>();
        if (site != "site1" && site != "site2") throw InputError("site", "unknown site " + site);
        ion.site = site == "site1" ? Site::site1 : Site::site2;
        ions.push_back(ion);
    }
    return ions;
}

} // namespace cavion
