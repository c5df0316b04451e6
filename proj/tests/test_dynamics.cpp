#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cavion/constants.hpp"
#include "cavion/dynamics.hpp"
#include "cavion/errors.hpp"

using namespace cavion;

namespace {

// Operating point of the single-ion experiments: P = 125, 1 nW input.
DriveParams operating_point() {
    DriveParams d;
    d.gamma = 126.0 / 11.4e-3;
    d.gamma_d = angular(3.1e6);
    d.omega_rabi = std::sqrt(0.2046) * angular(1.3e6);
    return d;
}

double ss_oracle(const DriveParams& d) {
    const double g2 = d.gamma / 2 + d.gamma_d;
    const double s = d.omega_rabi * d.omega_rabi / (d.gamma * g2) * g2 * g2 / (d.detuning * d.detuning + g2 * g2);
    return 0.5 * s / (1 + s);
}

} // namespace

TEST_CASE("free decay") {
    DriveParams d;
    d.gamma = 1e5;
    const auto tr = evolve_bloch({1.0, 0, 0}, d, 3.0 / d.gamma, 1e-7);
    CHECK(tr.final_state().rho_ee == doctest::Approx(std::exp(-3.0)).epsilon(1e-6));
    CHECK(tr.time.back() == doctest::Approx(3.0 / d.gamma));
    CHECK(propagate_exact({1.0, 0, 0}, d, 3.0 / d.gamma).rho_ee == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("steady state matches the closed form over a random grid") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lg(3.0, 6.0), ud(-3.0, 3.0);
    for (int i = 0; i < 30; ++i) {
        DriveParams d;
        d.gamma = std::pow(10.0, lg(rng));
        d.gamma_d = std::pow(10.0, lg(rng));
        d.omega_rabi = std::pow(10.0, lg(rng));
        d.detuning = ud(rng) * (d.gamma2() + d.omega_rabi);
        const double expect = ss_oracle(d);
        CHECK(steady_state_excitation(d) == doctest::Approx(expect).epsilon(1e-12));
        const double t = 40.0 / d.gamma;
        const auto tr = evolve_bloch({}, d, t, t / 2e4, 1u << 30);
        INFO("case " << i);
        CHECK(std::abs(tr.final_state().rho_ee - expect) < 1e-4);
        CHECK(std::abs(propagate_exact({}, d, t).rho_ee - expect) < 1e-4);
    }
}

TEST_CASE("step halving converges at the operating point") {
    const auto d = operating_point();
    const double a = evolve_bloch({}, d, 10e-6, 0.5e-9, 1u << 30).final_state().rho_ee;
    const auto fine = evolve_bloch({}, d, 10e-6, 0.25e-9, 1u << 30);
    const double b = fine.final_state().rho_ee;
    CHECK(fine.step < evolve_bloch({}, d, 10e-6, 0.5e-9, 1u << 30).step);
    CHECK(std::abs(a - b) < 1e-6);
    CHECK(std::abs(b - propagate_exact({}, d, 10e-6).rho_ee) < 1e-6);
}

TEST_CASE("trajectories stay physical") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> lg(3.0, 7.0), ud(-2.0, 2.0), u(0, 1);
    for (int i = 0; i < 40; ++i) {
        DriveParams d;
        d.gamma = std::pow(10.0, lg(rng));
        d.gamma_d = u(rng) < 0.3 ? 0.0 : std::pow(10.0, lg(rng));
        d.omega_rabi = std::pow(10.0, lg(rng));
        d.detuning = ud(rng) * d.omega_rabi;
        const auto tr = evolve_bloch({u(rng), 0, 0}, d, 5.0 / d.gamma, 1.0 / d.gamma, 50);
        for (const auto& s : tr.states) CHECK(s.physical());
    }
}

TEST_CASE("strong dephased drive saturates at one half") {
    DriveParams d;
    d.gamma = angular(1.8e3);
    d.gamma_d = angular(3.1e6);
    d.omega_rabi = angular(30e6);
    const double r = evolve_bloch({}, d, 10e-6, 1e-9, 1u << 30).final_state().rho_ee;
    CHECK(std::abs(r - 0.5) < 0.005);
    CHECK(pulse_excitation(d, 10e-6) == doctest::Approx(r).epsilon(1e-6));
}

TEST_CASE("integrated excitation agrees with quadrature of the trajectory") {
    const auto d = operating_point();
    const double t = 10e-6;
    const auto tr = evolve_bloch({}, d, t, 1e-9);
    double area = 0.0;
    for (std::size_t i = 1; i < tr.time.size(); ++i)
        area += 0.5 * (tr.states[i].rho_ee + tr.states[i - 1].rho_ee) * (tr.time[i] - tr.time[i - 1]);
    CHECK(integrated_excitation({}, d, t) == doctest::Approx(area).epsilon(1e-5));
}

TEST_CASE("adiabatic elimination matches exact propagation far from resonance") {
    auto d = operating_point();
    d.detuning = angular(200e6);
    const double exact = propagate_exact({}, d, 10e-6).rho_ee;
    CHECK(pulse_excitation_adiabatic(d, 10e-6) == doctest::Approx(exact).epsilon(1e-2));
    CHECK(pulse_excitation(d, 10e-6, 1e-3) == doctest::Approx(exact).epsilon(1e-2));
}

TEST_CASE("photon budget per pulse") {
    CHECK(emitted_photons_per_pulse(DriveParams{0, 0, 1e4, 1e6}, PulseSequence{}) == 0.0);
    DriveParams d;
    d.gamma = angular(1.8e3);
    d.gamma_d = angular(3.1e6);
    d.omega_rabi = angular(30e6);
    PulseSequence seq;
    const double capture = 1 - std::exp(-d.gamma * 82e-6);
    CHECK(emitted_photons_per_pulse(d, seq) == doctest::Approx(0.5 * capture).epsilon(0.01));
    seq.gate_duration = 100.0 / d.gamma;
    seq.rep_period = seq.gate_end();
    CHECK(emitted_photons_per_pulse(d, seq) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(window_capture(1e4, 0, 1e-4) == doctest::Approx(1 - std::exp(-1.0)));
    CHECK(window_capture(1e4, 1e-4, INFINITY) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("low-power fluorescence lineshape width") {
    DriveParams d;
    d.gamma = 126.0 / 11.4e-3;
    d.gamma_d = angular(3.1e6);
    d.omega_rabi = angular(10e3);
    PulseSequence seq;
    const double peak = emitted_photons_per_pulse(d, seq);
    // bisect for the half-maximum detuning
    double lo = 0, hi = angular(50e6);
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        d.detuning = mid;
        (emitted_photons_per_pulse(d, seq) > 0.5 * peak ? lo : hi) = mid;
    }
    const double fwhm = 2 * hertz(lo);
    CHECK(fwhm == doctest::Approx(6.2e6).epsilon(0.02));
}

TEST_CASE("drive calibration from input power") {
    CHECK(intracavity_photon_number(0, 0.16, angular(3.85e9), angular(195e12)) == 0.0);
    const double n = intracavity_photon_number(1e-9, 0.16, angular(3.85e9), angular(195e12));
    CHECK(n == doctest::Approx(0.2046).epsilon(1e-3));
    CHECK(intracavity_photon_number(2e-9, 0.16, angular(3.85e9), angular(195e12)) == doctest::Approx(2 * n));
    CHECK(rabi_frequency(4, angular(1.3e6)) == doctest::Approx(angular(2.6e6)));
    CHECK(rabi_frequency(0, 1.0) == 0.0);
    CHECK_THROWS_AS(rabi_frequency(-1, 1.0), DomainError);
}

TEST_CASE("spin relaxation model") {
    SpinRelaxParams p;
    auto r = spin_t1(p);
    CHECK(r.t1 == doctest::Approx(1.64e-3).epsilon(0.01));
    CHECK(std::abs(r.t1 - 1.5e-3) < 0.2 * 1.5e-3);
    CHECK(r.rate == doctest::Approx(r.direct + r.raman + r.orbach));
    p.temperature = 6.0;
    r = spin_t1(p);
    CHECK(r.t1 == doctest::Approx(8.4e-6).epsilon(0.02));
    CHECK(std::abs(r.t1 - 7.5e-6) < 0.2 * 7.5e-6);
    p.temperature = 0.9;
    p.spin_splitting = 0.1;
    r = spin_t1(p);
    CHECK(r.t1 > 1e3);
    CHECK(r.t1 == doctest::Approx(2.0e3).epsilon(0.05));

    SpinRelaxParams q;
    double prev = INFINITY;
    for (double t = 1.0; t <= 10.0; t += 0.25) {
        q.temperature = t;
        const double v = spin_t1(q).t1;
        CHECK(v < prev);
        prev = v;
    }
    q.temperature = 4.0;
    prev = INFINITY;
    for (double nu = 1.0; nu <= 20.0; nu += 1.0) {
        q.spin_splitting = nu;
        const double v = spin_t1(q).t1;
        CHECK(v < prev);
        prev = v;
    }
    // coth -> 1 as T -> 0: the direct rate approaches A nu^5
    q.spin_splitting = 9.0;
    q.temperature = 0.01;
    CHECK(spin_t1(q).direct == doctest::Approx(5e-5 * std::pow(9.0, 5)).epsilon(1e-9));
    q.temperature = 1e-40;
    q.spin_splitting = 0.0;
    r = spin_t1(q);
    CHECK(r.infinite);
    CHECK(std::isinf(r.t1));
}

TEST_CASE("input validation") {
    DriveParams d;
    d.gamma = -1;
    CHECK_THROWS_AS(d.validate(), DomainError);
    CHECK_THROWS_AS(evolve_bloch({}, DriveParams{0, 0, 1, 0}, -1.0, 1e-6), DomainError);
    CHECK_THROWS_AS(evolve_bloch({}, DriveParams{0, 0, 1, 0}, 1.0, 0.0), DomainError);
    PulseSequence s;
    s.gate_duration = 95e-6;
    CHECK_THROWS_AS(s.validate(), DomainError);
    SpinRelaxParams p;
    p.temperature = -1;
    CHECK_THROWS_AS(spin_t1(p), DomainError);
}

TEST_CASE("trajectory CSV export") {
    DriveParams d;
    d.gamma = 1e5;
    const auto tr = evolve_bloch({1.0, 0, 0}, d, 1e-5, 1e-6);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "time_s,rho_ee,coh_re,coh_im");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == static_cast<int>(tr.states.size()));
}
