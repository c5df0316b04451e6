#pragma once

// Closed-form cavity-QED relations for a single emitter evanescently coupled to
// a nanophotonic cavity. All rates are angular (rad/s).

#include <array>

#include "cavion/constants.hpp"

namespace cavion {

// In-plane field envelope of the cavity mode at the substrate interface.
// Intensity falls off as exp(-2x^2/wx^2 - 2y^2/wy^2); x runs along the cavity axis.
struct TransverseEnvelope {
    double waist_x = 1.0e-6; // m
    double waist_y = 0.3e-6; // m

    // Gaussian with the same integrated intensity along x as a flat mode of
    // length `mode_length`.
    static TransverseEnvelope from_mode_length(double mode_length, double waist_y);

    double mode_length() const;
    double intensity(double x, double y) const;
    double amplitude(double x, double y) const;
};

struct CavityParams {
    double f_cav = 195.118e12;           // Hz
    double kappa = angular(3.85e9);      // rad/s, total energy decay rate
    double eta_cav = 0.16;               // kappa_wg / kappa
    double g_if = angular(2.62e6);       // rad/s, peak coupling at the interface
    double z_half = 45e-9;               // m, intensity halving depth
    double interface_intensity_fraction = 0.36;
    TransverseEnvelope envelope{};

    double quality_factor() const;
    // Coupling an emitter would see at the global field maximum inside the silicon.
    double g_field_max() const;
    // Throws DomainError if an invariant is violated.
    void validate() const;

    static CavityParams from_quality_factor(double f_cav, double q);
};

struct EmitterConstants {
    double gamma0 = 0.0; // rad/s
    double beta = 0.21;
    double n_host = 1.80;
    double omega = 0.0;  // rad/s
    double tau0 = 0.0;   // s

    static EmitterConstants from_lifetime(double tau0, double beta, double n_host, double omega);
    static EmitterConstants from_rate(double gamma0, double beta, double n_host, double omega);
    // Er:YSO site 1, Y1-Z1.
    static EmitterConstants erbium_yso();

    void validate() const;
};

struct EfficiencyChain {
    double eta_cav = 0.16;
    double eta_wg = 0.46;
    double eta_fib = 0.8;
    double eta_det = 0.67;

    double total() const;
    void validate() const;
};

// P = 4 g^2 / (kappa Gamma0). The total decay rate is (P + 1) Gamma0.
double purcell_factor(double g, double kappa, double gamma0);

// tau0 / (P + 1)
double enhanced_lifetime(double purcell, double tau0);

// Probability that a decay goes into the cavity mode.
double eta_emitter(double purcell);

// Amplitude coupling at depth z below the interface (intensity halves every z_half).
double coupling_at_depth(double g_if, double z, double z_half);

// Coupling at a position (x, y in-plane about the mode centre, z depth).
double coupling_at(const CavityParams& cavity, const std::array<double, 3>& position);

// Electric dipole moment (C m) from the bare decay rate, with a local-field
// correction for the host index.
double dipole_from_lifetime(double gamma0, double beta, double n_host, double omega);

// Forward relation of dipole_from_lifetime.
double rate_from_dipole(double dipole, double beta, double n_host, double omega);

// Reflectance of a single-sided cavity, |1 - 2 eta / (1 + 2 i delta / kappa)|^2.
double cavity_reflection(double delta, double kappa, double eta_cav);

// Inverts the on-resonance contrast C = (1 - 2 eta)^2 on the chosen branch.
double eta_cav_from_contrast(double contrast, bool undercoupled);

// Lorentzian dependence of the Purcell factor on emitter-cavity detuning.
double purcell_vs_detuning(double p_max, double delta, double kappa);

double efficiency_total(const EfficiencyChain& chain);

} // namespace cavion

