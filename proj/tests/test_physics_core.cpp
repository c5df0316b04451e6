#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cavion/errors.hpp"
#include "cavion/physics_core.hpp"

using namespace cavion;

TEST_CASE("purcell factor from coupling, linewidth and bulk rate") {
    CHECK(purcell_factor(angular(2.08e6), angular(3.85e9), angular(14.0)) == doctest::Approx(321.07).epsilon(1e-4));
    CHECK(purcell_factor(angular(2.62e6), angular(3.85e9), angular(14.0)) == doctest::Approx(509.42).epsilon(1e-4));
    CHECK(purcell_factor(0.0, 1.0, 1.0) == 0.0);
    CHECK_THROWS_AS(purcell_factor(1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(purcell_factor(1.0, 1.0, -1.0), DomainError);
    CHECK_THROWS_AS(purcell_factor(-1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("purcell factor scales with g squared") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e5, 1e8);
    for (int i = 0; i < 50; ++i) {
        const double g = u(rng), k = u(rng) * 100, g0 = u(rng) * 1e-5;
        CHECK(purcell_factor(2 * g, k, g0) == doctest::Approx(4 * purcell_factor(g, k, g0)).epsilon(1e-12));
    }
}

TEST_CASE("enhanced lifetime and cavity emission fraction") {
    CHECK(enhanced_lifetime(252, 11.4e-3) == doctest::Approx(45.059e-6).epsilon(1e-4));
    CHECK(enhanced_lifetime(0, 11.4e-3) == doctest::Approx(11.4e-3));
    CHECK(eta_emitter(125) == doctest::Approx(0.99206).epsilon(1e-4));
    CHECK(eta_emitter(0) == 0.0);
    CHECK_THROWS_AS(enhanced_lifetime(-1, 1.0), DomainError);
    CHECK_THROWS_AS(eta_emitter(-0.1), DomainError);
}

TEST_CASE("coupling falls by sqrt(2) every intensity halving depth") {
    const double g = angular(2.62e6);
    CHECK(coupling_at_depth(g, 0.0, 45e-9) == doctest::Approx(g));
    CHECK(coupling_at_depth(g, 45e-9, 45e-9) == doctest::Approx(g / std::sqrt(2.0)));
    CHECK(coupling_at_depth(g, 90e-9, 45e-9) == doctest::Approx(g / 2.0));
    CHECK_THROWS_AS(coupling_at_depth(g, -1e-9, 45e-9), DomainError);
    double prev = g;
    for (int i = 1; i < 100; ++i) {
        const double v = coupling_at_depth(g, i * 2e-9, 45e-9);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("transverse envelope") {
    TransverseEnvelope e;
    CHECK(e.amplitude(0, 0) == 1.0);
    CHECK(e.intensity(e.waist_x, 0) == doctest::Approx(std::exp(-2.0)));
    CHECK(e.amplitude(0, e.waist_y) == doctest::Approx(std::exp(-1.0)));
    const auto f = TransverseEnvelope::from_mode_length(e.mode_length(), e.waist_y);
    CHECK(f.waist_x == doctest::Approx(e.waist_x));
    CavityParams c;
    CHECK(coupling_at(c, {0, 0, 0}) == doctest::Approx(c.g_if));
    CHECK(coupling_at(c, {c.envelope.waist_x, 0, c.z_half}) ==
          doctest::Approx(c.g_if * std::exp(-1.0) / std::sqrt(2.0)));
}

TEST_CASE("dipole moment with local-field correction") {
    const auto em = EmitterConstants::erbium_yso();
    const double d = dipole_from_lifetime(em.gamma0, em.beta, em.n_host, em.omega);
    CHECK(d == doctest::Approx(2.80e-32).epsilon(0.01));
    CHECK(rate_from_dipole(d, em.beta, em.n_host, em.omega) == doctest::Approx(em.gamma0).epsilon(1e-12));
    // no local-field correction at n = 1: Gamma = d^2 w^3 / (3 pi eps0 hbar c^3) / beta
    const double c3 = std::pow(constants::speed_of_light, 3);
    const double bare = d * d * std::pow(em.omega, 3) / (3 * constants::pi * constants::epsilon0 * constants::hbar * c3);
    CHECK(rate_from_dipole(d, 1.0, 1.0, em.omega) == doctest::Approx(bare).epsilon(1e-12));
    CHECK_THROWS_AS(dipole_from_lifetime(0.0, 0.2, 1.8, 1.0), DomainError);
    CHECK_THROWS_AS(dipole_from_lifetime(1.0, 1.5, 1.8, 1.0), DomainError);
}

TEST_CASE("cavity reflection and contrast inversion") {
    const double k = angular(3.85e9);
    CHECK(cavity_reflection(0, k, 0.16) == doctest::Approx(0.4624));
    CHECK(cavity_reflection(0, k, 0.5) == doctest::Approx(0.0));
    CHECK(cavity_reflection(INFINITY, k, 0.16) == 1.0);
    CHECK(cavity_reflection(1e6 * k, k, 0.16) == doctest::Approx(1.0).epsilon(1e-6));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-10, 10), ue(0, 1);
    for (int i = 0; i < 200; ++i) {
        const double r = cavity_reflection(ud(rng) * k, k, ue(rng));
        CHECK(r >= 0.0);
        CHECK(r <= 1.0 + 1e-12);
    }
    CHECK(eta_cav_from_contrast(0.46, true) == doctest::Approx(0.1609).epsilon(1e-3));
    CHECK(eta_cav_from_contrast(0.46, false) == doctest::Approx(0.8391).epsilon(1e-3));
    for (double eta : {0.05, 0.16, 0.3, 0.49}) {
        CHECK(eta_cav_from_contrast(cavity_reflection(0, k, eta), true) == doctest::Approx(eta));
        CHECK(eta_cav_from_contrast(cavity_reflection(0, k, 1 - eta), false) == doctest::Approx(1 - eta));
    }
    CHECK_THROWS_AS(eta_cav_from_contrast(1.2, true), DomainError);
}

TEST_CASE("purcell factor versus cavity detuning") {
    const double k = angular(3.85e9);
    CHECK(purcell_vs_detuning(320, 0, k) == 320.0);
    CHECK(purcell_vs_detuning(320, k / 2, k) == doctest::Approx(160.0));
    CHECK(purcell_vs_detuning(320, -k / 2, k) == doctest::Approx(160.0));
    CHECK(purcell_vs_detuning(320, 1e4 * k, k) < 1e-5);
}

TEST_CASE("efficiency budget") {
    CHECK(efficiency_total(EfficiencyChain{}) == doctest::Approx(0.03945).epsilon(1e-3));
    CHECK_THROWS_AS(efficiency_total(EfficiencyChain{1.2, 0.5, 0.5, 0.5}), DomainError);
}

TEST_CASE("parameter types") {
    CavityParams c;
    CHECK(c.quality_factor() == doctest::Approx(195.118e12 / 3.85e9));
    CHECK_NOTHROW(c.validate());
    c.eta_cav = 1.5;
    CHECK_THROWS_AS(c.validate(), DomainError);
    const auto q = CavityParams::from_quality_factor(195e12, 5e4);
    CHECK(hertz(q.kappa) == doctest::Approx(3.9e9));
    const auto em = EmitterConstants::erbium_yso();
    CHECK(em.gamma0 == doctest::Approx(1.0 / 11.4e-3));
    CHECK_THROWS_AS(EmitterConstants::from_lifetime(-1, 0.2, 1.8, 1), DomainError);
    CHECK_THROWS_AS(EmitterConstants::from_rate(1, 0.2, 0.5, 1), DomainError);
}
