#include "cavion/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cavion/constants.hpp"
#include "cavion/errors.hpp"

namespace cavion {

bool BlochState::physical(double tol) const {
    if (!(std::isfinite(rho_ee) && std::isfinite(coh_re) && std::isfinite(coh_im))) return false;
    if (rho_ee < -1e-12 || rho_ee > 1.0 + 1e-12) return false;
    return coh_re * coh_re + coh_im * coh_im <= rho_ee * (1.0 - rho_ee) + tol;
}

void DriveParams::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("decay rate must be > 0");
    if (!(gamma_d >= 0.0) || !std::isfinite(gamma_d)) throw DomainError("dephasing must be >= 0");
    if (!std::isfinite(omega_rabi) || omega_rabi < 0.0)
        throw DomainError("Rabi frequency must be finite and >= 0");
    if (!std::isfinite(detuning)) throw DomainError("detuning must be finite");
}

void PulseSequence::validate() const {
    if (!(excite_duration > 0.0)) throw DomainError("excite_duration must be > 0");
    if (!(gate_start >= 0.0)) throw DomainError("gate_start must be >= 0");
    if (!(gate_duration > 0.0)) throw DomainError("gate_duration must be > 0");
    if (!(rep_period > 0.0)) throw DomainError("rep_period must be > 0");
    if (!(input_power >= 0.0)) throw DomainError("input_power must be >= 0");
    if (excite_duration > rep_period || gate_end() > rep_period * (1.0 + 1e-12))
        throw DomainError("pulse and collection gate must fit inside the repetition period");
}

BlochState bloch_rhs(const BlochState& s, const DriveParams& d) {
    const double g2 = d.gamma2();
    const double om = d.omega_rabi;
    // d rho_ge/dt = -(gamma2 + i delta) rho_ge - i (Omega/2)(2 rho_ee - 1)
    return {-d.gamma * s.rho_ee + om * s.coh_im,
            -g2 * s.coh_re + d.detuning * s.coh_im,
            -d.detuning * s.coh_re - g2 * s.coh_im - 0.5 * om * (2.0 * s.rho_ee - 1.0)};
}

namespace {

BlochState axpy(const BlochState& x, double h, const BlochState& k) {
    return {x.rho_ee + h * k.rho_ee, x.coh_re + h * k.coh_re, x.coh_im + h * k.coh_im};
}

BlochState rk4_step(const BlochState& s, const DriveParams& d, double h) {
    const BlochState k1 = bloch_rhs(s, d);
    const BlochState k2 = bloch_rhs(axpy(s, 0.5 * h, k1), d);
    const BlochState k3 = bloch_rhs(axpy(s, 0.5 * h, k2), d);
    const BlochState k4 = bloch_rhs(axpy(s, h, k3), d);
    return {s.rho_ee + h / 6.0 * (k1.rho_ee + 2.0 * k2.rho_ee + 2.0 * k3.rho_ee + k4.rho_ee),
            s.coh_re + h / 6.0 * (k1.coh_re + 2.0 * k2.coh_re + 2.0 * k3.coh_re + k4.coh_re),
            s.coh_im + h / 6.0 * (k1.coh_im + 2.0 * k2.coh_im + 2.0 * k3.coh_im + k4.coh_im)};
}

double max_rate(const DriveParams& d) {
    return std::max({d.gamma, d.gamma2(), std::abs(d.detuning), d.omega_rabi});
}

} // namespace

BlochTrajectory evolve_bloch(const BlochState& initial, const DriveParams& drive,
                             double duration, double dt_max, std::size_t sample_stride,
                             int max_refinements) {
    drive.validate();
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw DomainError("duration must be >= 0");
    if (!(dt_max > 0.0)) throw DomainError("dt_max must be > 0");
    if (!initial.physical()) throw DomainError("initial Bloch state is unphysical");
    sample_stride = std::max<std::size_t>(sample_stride, 1);

    const double h_cap = std::min(dt_max, 1.0 / (50.0 * max_rate(drive)));
    for (int refine = 0; refine <= max_refinements; ++refine) {
        const double h_target = h_cap / std::ldexp(1.0, refine);
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(duration / h_target)));
        const double h = duration / static_cast<double>(n);

        BlochTrajectory traj;
        traj.step = h;
        traj.refinements = refine;
        traj.time.reserve(n / sample_stride + 2);
        traj.states.reserve(n / sample_stride + 2);
        traj.time.push_back(0.0);
        traj.states.push_back(initial);
        if (duration == 0.0) return traj;

        BlochState s = initial;
        bool ok = true;
        for (std::size_t i = 1; i <= n; ++i) {
            s = rk4_step(s, drive, h);
            if (!s.physical()) {
                ok = false;
                break;
            }
            if (i % sample_stride == 0 || i == n) {
                traj.time.push_back(static_cast<double>(i) * h);
                traj.states.push_back(s);
            }
        }
        if (ok) return traj;
        if (refine == max_refinements) {
            std::ostringstream msg;
            msg << "Bloch integration left the physical region after " << max_refinements
                << " step refinements (step " << h << " s, state rho_ee=" << s.rho_ee
                << " coh=(" << s.coh_re << ", " << s.coh_im << "))";
            throw IntegrationError(msg.str());
        }
    }
    throw IntegrationError("unreachable");
}

double steady_state_excitation(const DriveParams& d) {
    d.validate();
    const double g2 = d.gamma2();
    const double s = d.omega_rabi * d.omega_rabi / (d.gamma * g2) * g2 * g2 /
                     (d.detuning * d.detuning + g2 * g2);
    return 0.5 * s / (1.0 + s);
}

namespace {

struct LinearSystem {
    Eigen::Matrix3d m;
    Eigen::Vector3d b;
};

LinearSystem linear_system(const DriveParams& d) {
    const double g2 = d.gamma2();
    LinearSystem sys;
    sys.m << -d.gamma, 0.0, d.omega_rabi,
             0.0, -g2, d.detuning,
             -d.omega_rabi, -d.detuning, -g2;
    sys.b << 0.0, 0.0, 0.5 * d.omega_rabi;
    return sys;
}

Eigen::Vector3d to_vec(const BlochState& s) { return {s.rho_ee, s.coh_re, s.coh_im}; }

} // namespace

BlochState propagate_exact(const BlochState& initial, const DriveParams& drive, double t) {
    drive.validate();
    const auto sys = linear_system(drive);
    const Eigen::Vector3d xss = -sys.m.partialPivLu().solve(sys.b);
    const Eigen::Matrix3d e = (sys.m * t).exp();
    const Eigen::Vector3d x = xss + e * (to_vec(initial) - xss);
    return {x[0], x[1], x[2]};
}

double integrated_excitation(const BlochState& initial, const DriveParams& drive, double t) {
    drive.validate();
    const auto sys = linear_system(drive);
    const auto lu = sys.m.partialPivLu();
    const Eigen::Vector3d xss = -lu.solve(sys.b);
    const Eigen::Matrix3d e = (sys.m * t).exp();
    const Eigen::Vector3d integral =
        xss * t + lu.solve((e - Eigen::Matrix3d::Identity()) * (to_vec(initial) - xss));
    return integral[0];
}

double pulse_excitation_adiabatic(const DriveParams& d, double duration) {
    const double g2 = d.gamma2();
    const double pump =
        d.omega_rabi * d.omega_rabi * g2 / (2.0 * (g2 * g2 + d.detuning * d.detuning));
    const double total = d.gamma + 2.0 * pump;
    return pump / total * -std::expm1(-total * duration);
}

double pulse_excitation(const DriveParams& d, double duration, double adiabatic_threshold) {
    d.validate();
    if (d.omega_rabi == 0.0) return 0.0;
    const double g2 = d.gamma2();
    const double pump =
        d.omega_rabi * d.omega_rabi * g2 / (2.0 * (g2 * g2 + d.detuning * d.detuning));
    const double coherence_rate = std::hypot(g2, d.detuning);
    const bool far = std::abs(d.detuning) > 10.0 * (g2 + d.omega_rabi);
    if (far && (d.gamma + 2.0 * pump) < adiabatic_threshold * coherence_rate) {
        return pulse_excitation_adiabatic(d, duration);
    }
    return std::clamp(propagate_exact(BlochState{}, d, duration).rho_ee, 0.0, 1.0);
}

double window_capture(double gamma, double start, double duration) {
    if (!(gamma > 0.0)) throw DomainError("decay rate must be > 0");
    if (!(start >= 0.0) || !(duration >= 0.0)) throw DomainError("window must be non-negative");
    return std::exp(-gamma * start) * -std::expm1(-gamma * duration);
}

double emitted_photons_per_pulse(const DriveParams& drive, const PulseSequence& pulse) {
    drive.validate();
    pulse.validate();
    if (drive.omega_rabi == 0.0) return 0.0;
    const double t_exc = pulse.excite_duration;
    double photons = 0.0;
    // emission while the drive is on and the gate is already open
    if (pulse.gate_start < t_exc) {
        const double a = pulse.gate_start;
        const double b = std::min(pulse.gate_end(), t_exc);
        photons += drive.gamma * (integrated_excitation(BlochState{}, drive, b) -
                                  integrated_excitation(BlochState{}, drive, a));
    }
    if (pulse.gate_end() > t_exc) {
        const double rho_end = pulse_excitation(drive, t_exc);
        const double start = std::max(pulse.gate_start, t_exc) - t_exc;
        photons += rho_end * window_capture(drive.gamma, start, pulse.gate_end() - t_exc - start);
    }
    return photons;
}

double intracavity_photon_number(double p_in, double eta_cav, double kappa, double omega) {
    if (!(p_in >= 0.0)) throw DomainError("input power must be >= 0");
    if (!(eta_cav >= 0.0 && eta_cav <= 1.0)) throw DomainError("eta_cav must lie in [0, 1]");
    if (!(kappa > 0.0) || !(omega > 0.0)) throw DomainError("kappa and omega must be > 0");
    return 4.0 * eta_cav * (p_in / (constants::hbar * omega)) / kappa;
}

double rabi_frequency(double n_ph, double g) {
    if (!(n_ph >= 0.0)) throw DomainError("photon number must be >= 0");
    if (!(g >= 0.0)) throw DomainError("coupling must be >= 0");
    return std::sqrt(n_ph) * g;
}

void SpinRelaxParams::validate() const {
    if (!(a_direct >= 0.0 && a_raman >= 0.0 && a_orbach >= 0.0 && delta_orbach >= 0.0))
        throw DomainError("spin relaxation coefficients must be >= 0");
    if (!(spin_splitting >= 0.0)) throw DomainError("spin splitting must be >= 0");
    if (!(temperature > 0.0)) throw DomainError("temperature must be > 0");
}

SpinT1Result spin_t1(const SpinRelaxParams& p) {
    using namespace constants;
    p.validate();
    SpinT1Result r;
    const double kt = boltzmann * p.temperature;
    const double nu = p.spin_splitting; // GHz, matching the units of a_direct
    if (nu > 0.0) {
        const double x = planck * nu * 1e9 / (2.0 * kt);
        const double nu5 = nu * nu * nu * nu * nu;
        // coth(x) -> 1/x for small x; the product nu^5 coth stays finite
        r.direct = p.a_direct * nu5 / std::tanh(x);
    }
    r.raman = p.a_raman * std::pow(p.temperature, 9);
    r.orbach = p.a_orbach * std::exp(-p.delta_orbach * millielectronvolt / kt);
    r.rate = r.direct + r.raman + r.orbach;
    if (r.rate > 0.0 && std::isfinite(r.rate)) {
        r.t1 = 1.0 / r.rate;
        r.infinite = !std::isfinite(r.t1);
    } else {
        r.t1 = std::numeric_limits<double>::infinity();
        r.infinite = true;
    }
    return r;
}

void write_trajectory_csv(std::ostream& os, const BlochTrajectory& traj) {
    os << "time_s,rho_ee,coh_re,coh_im\n";
    char buf[128];
    for (std::size_t i = 0; i < traj.time.size(); ++i) {
        const auto& s = traj.states[i];
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", traj.time[i], s.rho_ee,
                      s.coh_re, s.coh_im);
        os << buf;
    }
}

} // namespace cavion
