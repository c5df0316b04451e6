#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cavion/physics_core.hpp"

namespace cavion {

using Vec3 = std::array<double, 3>;

enum class Site { site1, site2 };

struct IonRecord {
    Vec3 position{};      // m; x along the cavity, y across, z >= 0 into the substrate
    double f0 = 0.0;      // Hz, bare optical transition
    double g = 0.0;       // rad/s
    double purcell = 0.0;
    double delta_g_spin = 1.55;
    Site site = Site::site1;
};

// Sampling box centred on the mode in x and y, starting at the interface in z.
struct Region {
    double x = 1e-6;
    double y = 1e-6;
    double z = 0.2e-6;

    double volume() const { return x * y * z; }
};

struct EnsembleConfig {
    static constexpr double yttrium_site_density = 1.87e28; // m^-3

    double density = 3e-6 * yttrium_site_density; // all sites, m^-3
    double site1_fraction = 0.5;
    double f_center = 195.118e12;                  // Hz
    double sigma_inh = 2.9e9;                      // Hz, standard deviation
    Region region{};
    std::uint64_t rng_seed = 1;
    std::size_t max_count = 10'000'000;
    double delta_g = 1.55;

    static EnsembleConfig from_ppm(double ppm);

    double site1_density() const { return density * site1_fraction; }
    double expected_count() const { return site1_density() * region.volume(); }
    // density^(-1/3) of the cavity-resonant site.
    double mean_separation() const;
    double inhomogeneous_fwhm() const;
    void validate() const;
};

// Poisson-distributed site-1 population, uniform in the region, Gaussian in
// frequency. Deterministic in cfg.rng_seed.
std::vector<IonRecord> sample_ensemble(const EnsembleConfig& cfg, const CavityParams& cavity,
                                       const EmitterConstants& emitter);

// Expected number of ions with P >= fraction * P_max, where P_max is the
// Purcell factor at the interface on the mode axis. Depth is integrated with
// a midpoint rule of step `depth_step`; each slice's cross-section is exact.
double ions_above_purcell(const EnsembleConfig& cfg, const CavityParams& cavity,
                          double p_star_fraction, double depth_step = 1e-9);

std::size_t count_above_purcell(const std::vector<IonRecord>& ions, double threshold);

struct ZeemanConfig {
    Vec3 b_applied{};       // T
    Vec3 b_offset{};        // T
    double delta_g = 1.55;  // g_ground - g_excited for the field orientation
    // Spin-flip lines at f0 +/- sum_g muB |B| / 2h, each with relative weight
    // spin_flip_strength. Off unless enabled.
    bool include_spin_flip = false;
    double spin_flip_strength = 0.0;
    double sum_g = 0.0;

    void validate() const;
};

double zeeman_splitting(const ZeemanConfig& z);

// Spin-conserving pair (lower, upper).
std::pair<double, double> zeeman_frequencies(double f0, const ZeemanConfig& z);

struct SpectralLine {
    double frequency = 0.0; // Hz
    double weight = 0.0;    // fraction of the ground-state population addressed
};

// All lines the ion shows in the field, weights summing to one.
std::vector<SpectralLine> zeeman_lines(double f0, const ZeemanConfig& z);

// Counts per pulse from the weakly coupled, unsaturated background ions.
double background_ion_rate(double n_ph, double coeff);

// Coefficient placing the total background (dark + ions) at ion_signal / A.
double calibrate_background_coeff(double target_a, double ion_signal_per_pulse,
                                  double dark_per_pulse, double n_ph);

// Positions in nm, frequencies in GHz relative to f_center, couplings in 2pi x MHz.
nlohmann::json ensemble_to_json(const std::vector<IonRecord>& ions, double f_center);
std::vector<IonRecord> ensemble_from_json(const nlohmann::json& j, double* f_center = nullptr);

} // namespace cavion
