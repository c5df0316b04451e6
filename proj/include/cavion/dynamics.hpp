#pragma once

// Driven two-level optical Bloch equations with pure dephasing, the drive
// calibration from input power, and the phonon-limited spin T1 model.

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace cavion {

struct BlochState {
    double rho_ee = 0.0;
    double coh_re = 0.0; // Re rho_ge
    double coh_im = 0.0; // Im rho_ge

    // 0 <= rho_ee <= 1 and |rho_ge|^2 <= rho_ee (1 - rho_ee) + tol
    bool physical(double tol = 1e-9) const;
};

struct DriveParams {
    double omega_rabi = 0.0; // rad/s
    double detuning = 0.0;   // rad/s, laser minus transition
    double gamma = 0.0;      // rad/s, total population decay
    double gamma_d = 0.0;    // rad/s, pure dephasing (half the quoted 2 Gamma_d)

    // Coherence decay rate Gamma/2 + Gamma_d.
    double gamma2() const { return 0.5 * gamma + gamma_d; }
    void validate() const;
};

// Pulse timing of one repetition. Times are relative to the start of the
// excitation pulse.
struct PulseSequence {
    double excite_duration = 10e-6;
    double gate_start = 10e-6;
    double gate_duration = 82e-6;
    double rep_period = 100e-6;
    double input_power = 1e-9; // W, at the cavity input

    double gate_end() const { return gate_start + gate_duration; }
    void validate() const;
};

struct BlochTrajectory {
    std::vector<double> time;
    std::vector<BlochState> states;
    double step = 0.0;        // step actually used
    int refinements = 0;      // step halvings forced by invariant violations

    const BlochState& final_state() const { return states.back(); }
};

// Fixed-step RK4 at step min(dt_max, 1/(50 max rate)). Every `sample_stride`-th
// step is recorded, plus the final state. A step that leaves the physical
// state space triggers a restart at half the step; after `max_refinements`
// halvings an IntegrationError is thrown.
BlochTrajectory evolve_bloch(const BlochState& initial, const DriveParams& drive,
                             double duration, double dt_max, std::size_t sample_stride = 1,
                             int max_refinements = 6);

// Time derivative of the state under the drive.
BlochState bloch_rhs(const BlochState& s, const DriveParams& drive);

// Closed-form steady-state excited population (s/2)/(1+s).
double steady_state_excitation(const DriveParams& drive);

// Exact propagation of the linear Bloch system by matrix exponential.
BlochState propagate_exact(const BlochState& initial, const DriveParams& drive, double t);

// Exact integral of rho_ee over [0, t].
double integrated_excitation(const BlochState& initial, const DriveParams& drive, double t);

// Excited population at the end of a pulse starting in the ground state.
// Uses the exact propagator, or the adiabatically eliminated rate equation when
// the population rate is below `adiabatic_threshold` times |gamma2 + i delta|
// and the detuning is far outside the power-broadened line.
double pulse_excitation(const DriveParams& drive, double duration,
                        double adiabatic_threshold = 1e-6);

// Rate-equation excitation after adiabatic elimination of the coherence.
double pulse_excitation_adiabatic(const DriveParams& drive, double duration);

// Fraction of decays from a state prepared at t = 0 that land in [start, start + duration].
double window_capture(double gamma, double start, double duration);

// Expected photons emitted (into all channels) inside the collection gate.
double emitted_photons_per_pulse(const DriveParams& drive, const PulseSequence& pulse);

// Mean intracavity photon number 4 eta_cav (P_in / hbar omega) / kappa.
double intracavity_photon_number(double p_in, double eta_cav, double kappa, double omega);

double rabi_frequency(double n_ph, double g);

struct SpinRelaxParams {
    double a_direct = 5.0e-5;     // s^-1 GHz^-5
    double a_raman = 1.3e-3;      // s^-1 K^-9
    double a_orbach = 2.5e10;     // s^-1
    double delta_orbach = 6.4;    // meV
    double spin_splitting = 9.0;  // GHz, g muB B / h
    double temperature = 4.0;     // K

    void validate() const;
};

struct SpinT1Result {
    double t1 = 0.0;       // s; +inf when the rate underflows
    double rate = 0.0;     // s^-1
    double direct = 0.0;
    double raman = 0.0;
    double orbach = 0.0;
    bool infinite = false;
};

SpinT1Result spin_t1(const SpinRelaxParams& p);

// CSV columns: time_s, rho_ee, coh_re, coh_im
void write_trajectory_csv(std::ostream& os, const BlochTrajectory& traj);

} // namespace cavion
