#pragma once

// Synthetic experiments: PLE scans, lifetime histograms, cavity sweeps,
// saturation and Zeeman series, pulsed g2 runs, and the tabulated models.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cavion/analysis.hpp"
#include "cavion/detection.hpp"
#include "cavion/dynamics.hpp"
#include "cavion/ensemble.hpp"
#include "cavion/physics_core.hpp"

namespace cavion {

enum class ScanAxis { laser_frequency, cavity_detuning, power, magnetic_field };

struct ScanPlan {
    ScanAxis axis = ScanAxis::laser_frequency;
    // laser_frequency: Hz relative to `frequency_origin`; cavity_detuning: Hz,
    // cavity minus ion; power: W at the cavity input; magnetic_field: T
    std::vector<double> grid;
    std::uint64_t pulses_per_point = 1000;
    double cavity_drift_rate = 0.0; // Hz/s, positive values redshift the cavity
    bool co_scan = true;            // cavity follows the laser
    std::vector<std::pair<double, double>> masked; // excluded laser intervals, relative Hz
    bool full_mc = false;
    double frequency_origin = 195.118e12;

    void validate(ScanAxis expected) const;
};

// Everything shared by the experiments besides the ions themselves.
struct Setup {
    CavityParams cavity{};
    EmitterConstants emitter = EmitterConstants::erbium_yso();
    PulseSequence seq{};
    DetectorConfig det{};
    double gamma_d = angular(3.1e6);   // pure dephasing, rad/s
    double background_coeff = 0.0;     // clicks/pulse per intracavity photon
    std::optional<ZeemanConfig> zeeman; // split each ion into its Zeeman lines
    double adiabatic_threshold = 1e-3;
    unsigned threads = 1;

    void validate() const;
};

// Ion with the requested Purcell factor, at the field maximum.
IonRecord make_single_ion(const Setup& setup, double purcell, double f0);

double input_photon_number(const Setup& setup, double power, double laser_minus_cavity);

// Deterministic detected clicks per pulse from one ion for the given laser and
// cavity frequencies (Hz).
double ion_clicks_per_pulse(const IonRecord& ion, const Setup& setup, double f_laser,
                            double f_cavity, double power);

struct SpectrumPoint {
    double axis = 0.0;
    double mean = 0.0;      // clicks/pulse
    double stderr_ = 0.0;
    double expected = 0.0;  // noiseless model value
    double cavity_offset = 0.0; // Hz, accumulated drift at the start of the point
    double time = 0.0;      // s, scan clock at the start of the point
};

struct Spectrum {
    ScanAxis axis = ScanAxis::laser_frequency;
    double origin = 0.0;
    double power = 0.0;
    std::vector<SpectrumPoint> points;
};

Spectrum run_ple_scan(const ScanPlan& plan, const std::vector<IonRecord>& ions, const Setup& setup,
                      std::uint64_t seed);

struct LifetimeOptions {
    std::uint64_t n_pulses = 100000;
    double bin_width = 1e-6;
    double laser_detuning = 0.0;  // Hz, laser minus ion
    double cavity_detuning = 0.0; // Hz, cavity minus ion
    std::optional<double> cavity_fraction; // replaces eta_Er, e.g. for free-space collection
};

struct LifetimeResult {
    std::vector<double> bin_start;  // s after the end of the excitation pulse
    std::vector<double> counts;
    FitResult fit;                  // exponential_offset over bin centers
    double gamma = 0.0;             // rad/s, simulated total decay rate
    double tau = 0.0;               // s, 1/gamma
    double excitation = 0.0;
    std::size_t clicks = 0;
};

LifetimeResult run_lifetime(const IonRecord& ion, const Setup& setup, const LifetimeOptions& opts,
                            std::uint64_t seed);

struct SweepPoint {
    double detuning = 0.0;    // Hz
    double enhancement = 0.0; // fitted Gamma / Gamma0
    double stderr_ = 0.0;
    double expected = 0.0;    // P(delta) + 1
    bool converged = false;
};

struct CavitySweepResult {
    std::vector<SweepPoint> points;
    FitResult lorentzian; // over the converged points, weighted by 1/stderr^2
};

// Each point runs a lifetime measurement whose gate spans `gate_lifetimes`
// expected lifetimes, histogrammed into `bins` bins.
CavitySweepResult run_cavity_sweep(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                                   std::uint64_t seed, double gate_lifetimes = 8.0, int bins = 80);

struct SaturationRow {
    double power = 0.0;
    double n_photons = 0.0;
    FitResult mc;    // gaussian_offset of the simulated spectrum
    FitResult model; // same fit of the noiseless spectrum
};

struct SaturationResult {
    std::vector<Spectrum> spectra;
    std::vector<SaturationRow> rows;
};

// `ple_offsets` are laser frequencies relative to the ion line.
SaturationResult run_saturation_series(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                                       const std::vector<double>& ple_offsets, std::uint64_t seed);

struct ZeemanRow {
    double field = 0.0;           // T, applied magnitude
    double model_splitting = 0.0; // Hz
    double separation = 0.0;      // Hz between the two strongest fitted peaks, 0 if unresolved
    std::size_t n_peaks = 0;
};

struct ZeemanResult {
    std::vector<Spectrum> spectra;
    std::vector<ZeemanRow> rows;
};

ZeemanResult run_zeeman_series(const ScanPlan& plan, const IonRecord& ion, const Setup& setup,
                               const ZeemanConfig& base, const Vec3& field_direction,
                               const std::vector<double>& ple_offsets, double peak_width,
                               std::uint64_t seed);

struct G2Options {
    std::uint64_t n_pulses = 10'000'000;
    int max_offset = 20;
    double target_a = 5.5; // signal-to-background; <= 0 disables the background
    BlinkConfig blink{};
};

struct G2Result {
    std::vector<G2Point> g2;
    double signal_per_pulse = 0.0;     // expected ion clicks
    double background_per_pulse = 0.0; // expected dark plus background clicks
    double floor = 0.0;                // background-limited g2(0)
    RateEstimate rate{};
};

G2Result run_g2(const IonRecord& ion, const Setup& setup, const G2Options& opts, std::uint64_t seed);

struct SpinT1Row {
    double temperature = 0.0;
    SpinT1Result result;
};

std::vector<SpinT1Row> run_spin_t1(const SpinRelaxParams& base, const std::vector<double>& temperatures);

struct PurcellStatsRow {
    double fraction = 0.0; // P* / P_max
    double p_star = 0.0;
    double expected_ions = 0.0;
};

std::vector<PurcellStatsRow> run_purcell_stats(const EnsembleConfig& cfg, const Setup& setup,
                                               const std::vector<double>& fractions);

} // namespace cavion
