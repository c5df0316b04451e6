#pragma once

// Least-squares fitting of the standard line and decay shapes, greedy peak
// counting in dense spectra, and correlation post-processing.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cavion/detection.hpp"

namespace cavion {

enum class Model { exponential_offset, lorentzian_offset, gaussian_offset, linear };

// exponential_offset  A exp(-x/tau) + c
// lorentzian_offset   A / (1 + 4 (x - x0)^2 / fwhm^2) + c
// gaussian_offset     A exp(-(x - x0)^2 / (2 sigma^2)) + c
// linear              a + b x
const std::vector<std::string>& model_parameters(Model m);
std::string model_name(Model m);
Model model_from_name(const std::string& name);

double model_value(Model m, const std::vector<double>& p, double x);
std::vector<double> model_jacobian(Model m, const std::vector<double>& p, double x);

using ParamMap = std::map<std::string, double>;

struct FitOptions {
    std::vector<std::string> fixed; // parameter names held at their initial values
    int max_iter = 200;
    double tolerance = 1e-8;        // relative parameter change
};

struct FitResult {
    Model model = Model::linear;
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> stderr_;     // empty unless converged
    double residual_norm = 0.0;      // weighted sum of squared residuals
    bool converged = false;
    int n_iter = 0;
    std::vector<double> chi2_history; // objective after each accepted step

    double param(const std::string& name) const;
    double error(const std::string& name) const;
};

// Levenberg-Marquardt. Empty `weights` means uniform; missing entries of
// `init` are filled by the shape-specific heuristic.
FitResult fit_curve(Model m, const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& weights = {}, const ParamMap& init = {},
                    const FitOptions& opts = {});

ParamMap initial_guess(Model m, const std::vector<double>& x, const std::vector<double>& y);

// 1 / max(y, 1)
std::vector<double> poisson_weights(const std::vector<double>& y);

// Fit of Poisson-distributed data: y = counts / exposure. Starts from the
// 1/max(y, 1) weighted fit, then reweights with the fitted model until the
// parameters settle, which approaches the maximum-likelihood estimate and removes
// the low-count bias of data-derived weights.
FitResult fit_poisson(Model m, const std::vector<double>& x, const std::vector<double>& y, double exposure = 1.0,
                      const ParamMap& init = {}, const FitOptions& opts = {});

struct Peak {
    double center = 0.0; // Hz
    double amplitude = 0.0;
    double width = 0.0;  // Hz, FWHM held fixed
};

struct PeakList {
    std::vector<Peak> peaks;
    double threshold_sigma = 3.0;
    long total_count = 0; // detected plus envelope interpolation over masked intervals
};

struct PeakCountOptions {
    double fixed_width = 6e6;   // Hz
    double noise_sigma = 0.0;   // same units as the spectrum
    std::vector<double> point_sigma; // optional per-point noise, overrides noise_sigma
    double threshold_sigma = 3.0;
    double baseline = 0.0;      // subtracted before the search
    double histogram_bin = 0.5e9;
    std::vector<std::pair<double, double>> masked; // excluded frequency intervals
    std::size_t max_peaks = 100000;
};

struct PeakCountResult {
    PeakList list;
    std::vector<double> bin_centers;
    std::vector<double> bin_counts;
    FitResult envelope;            // gaussian_offset with c = 0 over unmasked bins
    double masked_estimate = 0.0;  // envelope peaks expected inside masked intervals
    std::vector<double> residual;  // spectrum minus the fitted peaks
};

PeakCountResult count_peaks(const std::vector<double>& x, const std::vector<double>& y,
                            const PeakCountOptions& opts);

// Per-point sigma of the mean dark level after `pulses_per_point` pulses.
double dark_noise_sigma(double dark_per_pulse, double pulses_per_point);

struct Ratio {
    double value = 0.0;
    double stderr_ = 0.0;
};

// A = (on - detuned) / detuned.
Ratio signal_to_background(const RateEstimate& on_peak, const RateEstimate& detuned);

struct BunchingFit {
    double amplitude = 0.0;
    double amplitude_err = 0.0;
    double time_constant = 0.0; // s
    double time_constant_err = 0.0;
    FitResult fit;
};

// 1 + a exp(-m T_rep / tau_b) over the supplied offsets m >= 1.
BunchingFit fit_bunching(const std::vector<G2Point>& g2, double rep_period,
                         double tau_guess = 0.0);

nlohmann::json fit_to_json(const FitResult& r);
nlohmann::json peaks_to_json(const PeakList& p);

} // namespace cavion
