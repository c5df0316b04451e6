#include "cavion/physics_core.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "cavion/errors.hpp"

namespace cavion {
namespace {

void require_finite_nonneg(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
        throw DomainError(std::string(name) + " must be finite and non-negative, got " +
                          std::to_string(v));
    }
}

void require_positive(double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw DomainError(std::string(name) + " must be finite and positive, got " +
                          std::to_string(v));
    }
}

void require_unit_interval(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DomainError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
    }
}

} // namespace

TransverseEnvelope TransverseEnvelope::from_mode_length(double mode_length, double waist_y) {
    require_positive(mode_length, "mode_length");
    require_positive(waist_y, "waist_y");
    // integral of exp(-2x^2/w^2) dx = w sqrt(pi/2)
    return {mode_length / std::sqrt(constants::pi / 2.0), waist_y};
}

double TransverseEnvelope::mode_length() const {
    return waist_x * std::sqrt(constants::pi / 2.0);
}

double TransverseEnvelope::intensity(double x, double y) const {
    return std::exp(-2.0 * x * x / (waist_x * waist_x) - 2.0 * y * y / (waist_y * waist_y));
}

double TransverseEnvelope::amplitude(double x, double y) const {
    return std::exp(-x * x / (waist_x * waist_x) - y * y / (waist_y * waist_y));
}

double CavityParams::quality_factor() const {
    return constants::two_pi * f_cav / kappa;
}

double CavityParams::g_field_max() const {
    return g_if / std::sqrt(interface_intensity_fraction);
}

void CavityParams::validate() const {
    require_positive(f_cav, "f_cav");
    require_positive(kappa, "kappa");
    require_unit_interval(eta_cav, "eta_cav");
    require_finite_nonneg(g_if, "g_if");
    require_positive(z_half, "z_half");
    require_positive(envelope.waist_x, "envelope.waist_x");
    require_positive(envelope.waist_y, "envelope.waist_y");
    if (!(interface_intensity_fraction > 0.0 && interface_intensity_fraction <= 1.0)) {
        throw DomainError("interface_intensity_fraction must lie in (0, 1]");
    }
}

CavityParams CavityParams::from_quality_factor(double f_cav, double q) {
    require_positive(f_cav, "f_cav");
    require_positive(q, "q");
    CavityParams c;
    c.f_cav = f_cav;
    c.kappa = constants::two_pi * f_cav / q;
    return c;
}

EmitterConstants EmitterConstants::from_lifetime(double tau0, double beta, double n_host,
                                                 double omega) {
    require_positive(tau0, "tau0");
    EmitterConstants e{1.0 / tau0, beta, n_host, omega, tau0};
    e.validate();
    return e;
}

EmitterConstants EmitterConstants::from_rate(double gamma0, double beta, double n_host,
                                             double omega) {
    require_positive(gamma0, "gamma0");
    EmitterConstants e{gamma0, beta, n_host, omega, 1.0 / gamma0};
    e.validate();
    return e;
}

EmitterConstants EmitterConstants::erbium_yso() {
    return from_lifetime(11.4e-3, 0.21, 1.80, angular(195e12));
}

void EmitterConstants::validate() const {
    require_positive(gamma0, "gamma0");
    require_positive(tau0, "tau0");
    require_positive(omega, "omega");
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("beta must lie in (0, 1]");
    if (!(n_host >= 1.0)) throw DomainError("n_host must be >= 1");
    if (std::abs(gamma0 * tau0 - 1.0) > 1e-9) throw DomainError("gamma0 * tau0 must equal 1");
}

double EfficiencyChain::total() const {
    return eta_cav * eta_wg * eta_fib * eta_det;
}

void EfficiencyChain::validate() const {
    require_unit_interval(eta_cav, "eta_cav");
    require_unit_interval(eta_wg, "eta_wg");
    require_unit_interval(eta_fib, "eta_fib");
    require_unit_interval(eta_det, "eta_det");
}

double purcell_factor(double g, double kappa, double gamma0) {
    require_finite_nonneg(g, "g");
    require_positive(kappa, "kappa");
    require_positive(gamma0, "gamma0");
    return 4.0 * g * g / (kappa * gamma0);
}

double enhanced_lifetime(double purcell, double tau0) {
    require_finite_nonneg(purcell, "purcell");
    require_positive(tau0, "tau0");
    return tau0 / (purcell + 1.0);
}

double eta_emitter(double purcell) {
    require_finite_nonneg(purcell, "purcell");
    return purcell / (purcell + 1.0);
}

double coupling_at_depth(double g_if, double z, double z_half) {
    require_finite_nonneg(g_if, "g_if");
    require_positive(z_half, "z_half");
    if (!std::isfinite(z) || z < 0.0) throw DomainError("depth z must be >= 0");
    return g_if * std::exp2(-z / (2.0 * z_half));
}

double coupling_at(const CavityParams& cavity, const std::array<double, 3>& position) {
    return coupling_at_depth(cavity.g_if, position[2], cavity.z_half) *
           cavity.envelope.amplitude(position[0], position[1]);
}

namespace {

double local_field_factor(double n) {
    const double l = 3.0 * n * n / (2.0 * n * n + 1.0);
    return l * l * n;
}

} // namespace

double rate_from_dipole(double dipole, double beta, double n_host, double omega) {
    using namespace constants;
    return local_field_factor(n_host) / beta * dipole * dipole * omega * omega * omega /
           (3.0 * pi * epsilon0 * hbar * speed_of_light * speed_of_light * speed_of_light);
}

double dipole_from_lifetime(double gamma0, double beta, double n_host, double omega) {
    using namespace constants;
    require_positive(gamma0, "gamma0");
    require_positive(omega, "omega");
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("beta must lie in (0, 1]");
    if (!(n_host >= 1.0)) throw DomainError("n_host must be >= 1");
    const double c3 = speed_of_light * speed_of_light * speed_of_light;
    const double d2 = gamma0 * beta * 3.0 * pi * epsilon0 * hbar * c3 /
                      (local_field_factor(n_host) * omega * omega * omega);
    return std::sqrt(d2);
}

double cavity_reflection(double delta, double kappa, double eta_cav) {
    require_positive(kappa, "kappa");
    require_unit_interval(eta_cav, "eta_cav");
    if (std::isinf(delta)) return 1.0;
    const std::complex<double> denom(1.0, 2.0 * delta / kappa);
    return std::norm(1.0 - 2.0 * eta_cav / denom);
}

double eta_cav_from_contrast(double contrast, bool undercoupled) {
    require_unit_interval(contrast, "contrast");
    const double s = std::sqrt(contrast);
    return undercoupled ? 0.5 * (1.0 - s) : 0.5 * (1.0 + s);
}

double purcell_vs_detuning(double p_max, double delta, double kappa) {
    require_finite_nonneg(p_max, "p_max");
    require_positive(kappa, "kappa");
    const double u = 2.0 * delta / kappa;
    return p_max / (1.0 + u * u);
}

double efficiency_total(const EfficiencyChain& chain) {
    chain.validate();
    return chain.total();
}

} // namespace cavion
