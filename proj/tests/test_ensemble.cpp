#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cavion/ensemble.hpp"
#include "cavion/errors.hpp"

using namespace cavion;

namespace {

double normal_cdf(double x, double mu, double s) { return 0.5 * std::erfc(-(x - mu) / (s * std::sqrt(2.0))); }

} // namespace

TEST_CASE("default density and ion separation") {
    EnsembleConfig cfg;
    CHECK(cfg.site1_density() == doctest::Approx(2.805e22).epsilon(1e-3));
    CHECK(cfg.mean_separation() == doctest::Approx(32.9e-9).epsilon(0.01));
    CHECK(cfg.expected_count() == doctest::Approx(2.805e22 * 2e-19).epsilon(1e-3));
    CHECK(cfg.inhomogeneous_fwhm() == doctest::Approx(6.829e9).epsilon(1e-3));
    CHECK(EnsembleConfig::from_ppm(3.0).density == doctest::Approx(cfg.density));
}

TEST_CASE("sampling is reproducible and respects the region") {
    EnsembleConfig cfg;
    CavityParams cav;
    const auto em = EmitterConstants::erbium_yso();
    const auto a = sample_ensemble(cfg, cav, em);
    const auto b = sample_ensemble(cfg, cav, em);
    REQUIRE(a.size() == b.size());
    CHECK(std::abs(double(a.size()) - cfg.expected_count()) < 5 * std::sqrt(cfg.expected_count()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].f0 == b[i].f0);
        CHECK(a[i].position == b[i].position);
    }
    const double p_max = purcell_factor(cav.g_if, cav.kappa, em.gamma0);
    for (const auto& ion : a) {
        CHECK(std::abs(ion.position[0]) <= 0.5 * cfg.region.x);
        CHECK(std::abs(ion.position[1]) <= 0.5 * cfg.region.y);
        CHECK(ion.position[2] >= 0.0);
        CHECK(ion.position[2] <= cfg.region.z);
        CHECK(ion.purcell <= p_max * (1 + 1e-12));
        CHECK(ion.purcell == doctest::Approx(purcell_factor(ion.g, cav.kappa, em.gamma0)));
    }
    cfg.rng_seed = 2;
    const auto c = sample_ensemble(cfg, cav, em);
    CHECK((c.size() != a.size() || c.front().f0 != a.front().f0));
}

TEST_CASE("capacity guard") {
    EnsembleConfig cfg;
    cfg.max_count = 100;
    CHECK_THROWS_AS(sample_ensemble(cfg, CavityParams{}, EmitterConstants::erbium_yso()), CapacityError);
    cfg.density = 0;
    CHECK(sample_ensemble(cfg, CavityParams{}, EmitterConstants::erbium_yso()).empty());
    cfg.sigma_inh = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("transition frequencies are Gaussian (Kolmogorov-Smirnov)") {
    EnsembleConfig cfg;
    cfg.region = {10e-6, 10e-6, 0.2e-6};
    cfg.density = 1e5 / cfg.region.volume() / cfg.site1_fraction;
    cfg.rng_seed = 42;
    const auto ions = sample_ensemble(cfg, CavityParams{}, EmitterConstants::erbium_yso());
    REQUIRE(ions.size() > 90000);
    std::vector<double> f;
    for (const auto& i : ions) f.push_back(i.f0);
    std::sort(f.begin(), f.end());
    const double n = static_cast<double>(f.size());
    double d = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double c = normal_cdf(f[i], cfg.f_center, cfg.sigma_inh);
        d = std::max({d, std::abs(c - i / n), std::abs(c - (i + 1) / n)});
    }
    // 1% critical value
    CHECK(d < 1.63 / std::sqrt(n));
}

TEST_CASE("ion count above threshold: quadrature against Monte Carlo") {
    CavityParams cav;
    const auto em = EmitterConstants::erbium_yso();
    const double p_max = purcell_factor(cav.g_if, cav.kappa, em.gamma0);
    EnsembleConfig cfg;
    // a 2x2 um window contains the whole transverse mode
    cfg.region = {2e-6, 2e-6, 0.2e-6};
    for (double frac : {0.1, 0.3, 0.5}) {
        const double expect = ions_above_purcell(cfg, cav, frac);
        double total = 0.0;
        const int seeds = 100;
        for (int s = 0; s < seeds; ++s) {
            cfg.rng_seed = 1000 + s;
            total += static_cast<double>(count_above_purcell(sample_ensemble(cfg, cav, em), frac * p_max));
        }
        const double mean = total / seeds;
        const double se = std::sqrt(expect / seeds);
        INFO("fraction " << frac << " quadrature " << expect << " mc " << mean);
        CHECK(std::abs(mean - expect) < 3.0 * se);
    }
}

TEST_CASE("ion count above threshold is monotone in the threshold") {
    EnsembleConfig cfg;
    CavityParams cav;
    double prev = INFINITY;
    for (double f = 0.02; f <= 1.0; f += 0.02) {
        const double v = ions_above_purcell(cfg, cav, f);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        prev = v;
    }
    CHECK(ions_above_purcell(cfg, cav, 1.0) < 1e-6);
    CHECK_THROWS_AS(ions_above_purcell(cfg, cav, 0.0), DomainError);
}

TEST_CASE("Zeeman splitting with offset field") {
    const double slope = 1.55 * constants::bohr_magneton / constants::planck;
    CHECK(slope == doctest::Approx(21.694e9).epsilon(1e-4));
    ZeemanConfig z;
    z.b_offset = {0, constants::gauss, 0};
    CHECK(zeeman_splitting(z) == doctest::Approx(2.1694e6).epsilon(1e-4));
    z.b_applied = {0, 0, 1.0};
    ZeemanConfig z2 = z;
    z2.b_applied = {0, 0, 0.9};
    CHECK((zeeman_splitting(z) - zeeman_splitting(z2)) / 0.1 == doctest::Approx(slope).epsilon(1e-4));

    // perpendicular offset: sqrt(B^2 + B0^2), curved near zero
    auto split_at = [&](double b, Vec3 offset) {
        ZeemanConfig c;
        c.b_offset = offset;
        c.b_applied = {0, 0, b};
        return zeeman_splitting(c);
    };
    const Vec3 perp{0, constants::gauss, 0}, para{0, 0, constants::gauss};
    const double b = 2 * constants::gauss;
    CHECK(split_at(b, perp) == doctest::Approx(slope * std::sqrt(5.0) * constants::gauss));
    const double mid_perp = split_at(b / 2, perp) - 0.5 * (split_at(0, perp) + split_at(b, perp));
    const double mid_para = split_at(b / 2, para) - 0.5 * (split_at(0, para) + split_at(b, para));
    CHECK(std::abs(mid_perp) > 1e4);
    CHECK(std::abs(mid_para) < 1e-3);

    const auto [lo, hi] = zeeman_frequencies(195e12, z);
    CHECK(hi - lo == doctest::Approx(zeeman_splitting(z)));
    CHECK(0.5 * (hi + lo) == doctest::Approx(195e12));
}

TEST_CASE("Zeeman line weights") {
    ZeemanConfig z;
    z.b_applied = {0, 0, 1e-3};
    auto lines = zeeman_lines(0.0, z);
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].weight == 0.5);
    z.include_spin_flip = true;
    z.spin_flip_strength = 0.2;
    z.sum_g = 15.0;
    lines = zeeman_lines(0.0, z);
    REQUIRE(lines.size() == 4);
    double w = 0;
    for (const auto& l : lines) w += l.weight;
    CHECK(w == doctest::Approx(1.0));
    CHECK(lines[3].frequency - lines[2].frequency ==
          doctest::Approx(15.0 * constants::bohr_magneton * 1e-3 / constants::planck));
}

TEST_CASE("background ions and calibration") {
    CHECK(background_ion_rate(0.2, 0.01) == doctest::Approx(0.002));
    CHECK(background_ion_rate(0.0, 0.01) == 0.0);
    CHECK_THROWS_AS(background_ion_rate(-1, 0.01), DomainError);
    const double coeff = calibrate_background_coeff(5.5, 0.011, 0.0008, 0.2);
    const double bg = 0.0008 + background_ion_rate(0.2, coeff);
    CHECK(0.011 / bg == doctest::Approx(5.5));
    CHECK_THROWS_AS(calibrate_background_coeff(5.5, 0.001, 0.01, 0.2), DomainError);
}

TEST_CASE("ensemble JSON round trip") {
    EnsembleConfig cfg;
    cfg.region = {0.3e-6, 0.3e-6, 0.1e-6};
    const auto ions = sample_ensemble(cfg, CavityParams{}, EmitterConstants::erbium_yso());
    const auto j = ensemble_to_json(ions, cfg.f_center);
    CHECK(j["schema"] == "cavion.ensemble/1");
    double fc = 0;
    const auto back = ensemble_from_json(nlohmann::json::parse(j.dump()), &fc);
    CHECK(fc == cfg.f_center);
    REQUIRE(back.size() == ions.size());
    for (std::size_t i = 0; i < ions.size(); ++i) {
        CHECK(back[i].f0 == doctest::Approx(ions[i].f0).epsilon(1e-15));
        CHECK(back[i].position[2] == doctest::Approx(ions[i].position[2]));
        CHECK(back[i].purcell == ions[i].purcell);
    }
    auto bad = j;
    bad["schema"] = "other";
    CHECK_THROWS_AS(ensemble_from_json(bad), InputError);
}
