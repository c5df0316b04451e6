#include "cavion/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cavion/errors.hpp"

namespace cavion {

const std::vector<std::string>& model_parameters(Model m) {
    static const std::vector<std::string> exp_p{"A", "tau", "c"};
    static const std::vector<std::string> lor_p{"A", "x0", "fwhm", "c"};
    static const std::vector<std::string> gau_p{"A", "x0", "sigma", "c"};
    static const std::vector<std::string> lin_p{"a", "b"};
    switch (m) {
    case Model::exponential_offset: return exp_p;
    case Model::lorentzian_offset: return lor_p;
    case Model::gaussian_offset: return gau_p;
    case Model::linear: return lin_p;
    }
    return lin_p;
}

std::string model_name(Model m) {
    switch (m) {
    case Model::exponential_offset: return "exponential";
    case Model::lorentzian_offset: return "lorentzian";
    case Model::gaussian_offset: return "gaussian";
    case Model::linear: return "linear";
    }
    return "linear";
}

Model model_from_name(const std::string& name) {
    if (name == "exponential" || name == "exponential_offset") return Model::exponential_offset;
    if (name == "lorentzian" || name == "lorentzian_offset") return Model::lorentzian_offset;
    if (name == "gaussian" || name == "gaussian_offset") return Model::gaussian_offset;
    if (name == "linear") return Model::linear;
    throw InputError("model", "unknown model '" + name + "'");
}

double model_value(Model m, const std::vector<double>& p, double x) {
    switch (m) {
    case Model::exponential_offset: return p[0] * std::exp(-x / p[1]) + p[2];
    case Model::lorentzian_offset: {
        const double d = x - p[1];
        return p[0] / (1.0 + 4.0 * d * d / (p[2] * p[2])) + p[3];
    }
    case Model::gaussian_offset: {
        const double d = x - p[1];
        return p[0] * std::exp(-d * d / (2.0 * p[2] * p[2])) + p[3];
    }
    case Model::linear: return p[0] + p[1] * x;
    }
    return 0.0;
}

std::vector<double> model_jacobian(Model m, const std::vector<double>& p, double x) {
    switch (m) {
    case Model::exponential_offset: {
        const double e = std::exp(-x / p[1]);
        return {e, p[0] * e * x / (p[1] * p[1]), 1.0};
    }
    case Model::lorentzian_offset: {
        const double d = x - p[1];
        const double w2 = p[2] * p[2];
        const double l = 1.0 / (1.0 + 4.0 * d * d / w2);
        return {l, p[0] * l * l * 8.0 * d / w2, p[0] * l * l * 8.0 * d * d / (w2 * p[2]), 1.0};
    }
    case Model::gaussian_offset: {
        const double d = x - p[1];
        const double s2 = p[2] * p[2];
        const double g = std::exp(-d * d / (2.0 * s2));
        return {g, p[0] * g * d / s2, p[0] * g * d * d / (s2 * p[2]), 1.0};
    }
    case Model::linear: return {1.0, x};
    }
    return {};
}

double FitResult::param(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params[i];
    throw DomainError("no fit parameter named " + name);
}

double FitResult::error(const std::string& name) const {
    if (stderr_.empty()) throw DomainError("fit did not converge; no standard errors");
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return stderr_[i];
    throw DomainError("no fit parameter named " + name);
}

std::vector<double> poisson_weights(const std::vector<double>& y) {
    std::vector<double> w(y.size());
    std::transform(y.begin(), y.end(), w.begin(), [](double v) { return 1.0 / std::max(v, 1.0); });
    return w;
}

namespace {

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<std::size_t> sorted_order(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    return idx;
}

ParamMap guess_exponential(const std::vector<double>& x, const std::vector<double>& y) {
    const auto idx = sorted_order(x);
    const double c = percentile(y, 0.05);
    const double top = *std::max_element(y.begin(), y.end()) - c;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto i : idx) {
        const double v = y[i] - c;
        if (v <= 0.1 * top) continue;
        const double w = v; // log-space variance falls as the signal grows
        const double l = std::log(v);
        sw += w;
        sx += w * x[i];
        sy += w * l;
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * l;
    }
    const double span = x[idx.back()] - x[idx.front()];
    const double det = sw * sxx - sx * sx;
    double tau = span / 3.0;
    double amp = top;
    if (sw > 0.0 && det > 0.0) {
        const double slope = (sw * sxy - sx * sy) / det;
        const double icpt = (sy - slope * sx) / sw;
        if (slope < 0.0) {
            tau = -1.0 / slope;
            amp = std::exp(icpt);
        }
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) tau = span > 0.0 ? span / 3.0 : 1.0;
    return {{"A", amp}, {"tau", tau}, {"c", c}};
}

ParamMap guess_peak(Model m, const std::vector<double>& x, const std::vector<double>& y) {
    const auto idx = sorted_order(x);
    const double c = percentile(y, 0.1);
    std::size_t k = 0;
    for (std::size_t j = 0; j < idx.size(); ++j)
        if (y[idx[j]] > y[idx[k]]) k = j;
    const double amp = y[idx[k]] - c;
    const double half = c + 0.5 * amp;
    const double span = x[idx.back()] - x[idx.front()];
    double xl = x[idx.front()], xr = x[idx.back()];
    for (std::size_t j = k; j-- > 0;) {
        if (y[idx[j]] < half) {
            xl = x[idx[j]];
            break;
        }
    }
    for (std::size_t j = k + 1; j < idx.size(); ++j) {
        if (y[idx[j]] < half) {
            xr = x[idx[j]];
            break;
        }
    }
    double fwhm = xr - xl;
    if (!(fwhm > 0.0)) fwhm = span > 0.0 ? span / 10.0 : 1.0;
    if (m == Model::lorentzian_offset)
        return {{"A", amp}, {"x0", x[idx[k]]}, {"fwhm", fwhm}, {"c", c}};
    return {{"A", amp}, {"x0", x[idx[k]]}, {"sigma", fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)))},
            {"c", c}};
}

ParamMap guess_linear(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double b = sxx > 0.0 ? sxy / sxx : 0.0;
    return {{"a", my - b * mx}, {"b", b}};
}

// Parameter magnitude implied by the data ranges: x-like for centres and widths,
// y-like for heights.
double natural_scale(Model m, std::size_t j, double xspan, double ymag) {
    const std::string& name = model_parameters(m)[j];
    if (name == "x0" || name == "fwhm" || name == "sigma" || name == "tau") return xspan;
    if (name == "b") return xspan > 0.0 ? ymag / xspan : ymag;
    return ymag;
}

} // namespace

ParamMap initial_guess(Model m, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || x.size() != y.size()) throw DomainError("x and y must be non-empty and equal length");
    switch (m) {
    case Model::exponential_offset: return guess_exponential(x, y);
    case Model::lorentzian_offset:
    case Model::gaussian_offset: return guess_peak(m, x, y);
    case Model::linear: return guess_linear(x, y);
    }
    return {};
}

FitResult fit_curve(Model m, const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& weights, const ParamMap& init, const FitOptions& opts) {
    const auto& names = model_parameters(m);
    const std::size_t np = names.size();
    const std::size_t n = x.size();
    if (y.size() != n) throw DomainError("x and y must have equal length");
    if (!weights.empty() && weights.size() != n) throw DomainError("weights must match the data length");
    if (n < np + 1) throw DomainError("need at least " + std::to_string(np + 1) + " data points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("data must be finite");
        if (!weights.empty() && !(weights[i] >= 0.0)) throw DomainError("weights must be >= 0");
    }
    for (const auto& [k, v] : init) {
        (void)v;
        if (std::find(names.begin(), names.end(), k) == names.end())
            throw DomainError("unknown initial parameter " + k);
    }

    ParamMap start = init;
    if (start.size() < np) {
        const auto guess = initial_guess(m, x, y);
        for (const auto& [k, v] : guess) start.emplace(k, v);
    }
    std::vector<double> p(np);
    std::vector<bool> is_free(np, true);
    for (std::size_t j = 0; j < np; ++j) p[j] = start.at(names[j]);
    for (const auto& f : opts.fixed) {
        auto it = std::find(names.begin(), names.end(), f);
        if (it == names.end()) throw DomainError("unknown fixed parameter " + f);
        is_free[static_cast<std::size_t>(it - names.begin())] = false;
    }
    std::vector<std::size_t> free_idx;
    for (std::size_t j = 0; j < np; ++j)
        if (is_free[j]) free_idx.push_back(j);
    const std::size_t k = free_idx.size();

    FitResult res;
    res.model = m;
    res.names = names;

    auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
    auto chi2_of = [&](const std::vector<double>& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - model_value(m, q, x[i]);
            s += weight(i) * r * r;
        }
        return s;
    };
    auto normal_equations = [&](const std::vector<double>& q, Eigen::MatrixXd& h, Eigen::VectorXd& g) {
        h.setZero(k, k);
        g.setZero(k);
        for (std::size_t i = 0; i < n; ++i) {
            const auto jac = model_jacobian(m, q, x[i]);
            const double r = y[i] - model_value(m, q, x[i]);
            const double w = weight(i);
            for (std::size_t a = 0; a < k; ++a) {
                const double ja = jac[free_idx[a]];
                g(a) += w * ja * r;
                for (std::size_t b = 0; b <= a; ++b) h(a, b) += w * ja * jac[free_idx[b]];
            }
        }
        h = h.selfadjointView<Eigen::Lower>();
    };

    // Step sizes are judged against max(|p|, natural scale of the data), so a
    // centre that starts at exactly zero can still converge.
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    double ymag = 0.0;
    for (double v : y) ymag = std::max(ymag, std::abs(v));
    const double xspan = *xmax - *xmin;
    std::vector<double> scale(np);
    for (std::size_t j = 0; j < np; ++j) scale[j] = std::max(std::abs(p[j]), natural_scale(m, j, xspan, ymag));

    double chi2 = chi2_of(p);
    if (!std::isfinite(chi2)) {
        res.params = p;
        res.residual_norm = chi2;
        return res;
    }
    res.chi2_history.push_back(chi2);
    double lambda = 1e-3;
    bool converged = false;
    Eigen::MatrixXd h;
    Eigen::VectorXd g;
    int iter = 0;
    if (k == 0) converged = true;
    while (!converged && iter < opts.max_iter) {
        ++iter;
        normal_equations(p, h, g);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = h;
            const double dmax = h.diagonal().maxCoeff();
            for (std::size_t j = 0; j < k; ++j)
                a(j, j) += lambda * std::max(h(j, j), 1e-15 * std::max(dmax, 1e-300));
            Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
            if (ldlt.info() != Eigen::Success) break;
            const Eigen::VectorXd step = ldlt.solve(g);
            if (!step.allFinite()) break;
            auto trial = p;
            for (std::size_t j = 0; j < k; ++j) trial[free_idx[j]] += step(j);
            const double c2 = chi2_of(trial);
            if (std::isfinite(c2) && c2 <= chi2) {
                double rel = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::size_t q = free_idx[j];
                    const double s = std::max({std::abs(trial[q]), 1e-6 * scale[q], 1e-300});
                    rel = std::max(rel, std::abs(step(j)) / s);
                }
                p = trial;
                chi2 = c2;
                res.chi2_history.push_back(chi2);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel < opts.tolerance || chi2 == 0.0) converged = true;
            } else {
                lambda *= 10.0;
                if (lambda > 1e16) break;
            }
        }
        if (!accepted) {
            // no downhill step exists at machine precision: p is stationary
            converged = lambda > 1e16;
            break;
        }
    }
    res.params = p;
    res.residual_norm = chi2;
    res.n_iter = iter;
    if (!converged) return res;

    if (k > 0) {
        normal_equations(p, h, g);
        Eigen::VectorXd d(k);
        for (std::size_t j = 0; j < k; ++j) {
            if (!(h(j, j) > 0.0) || !std::isfinite(h(j, j))) return res;
            d(j) = 1.0 / std::sqrt(h(j, j));
        }
        const Eigen::MatrixXd hs = d.asDiagonal() * h * d.asDiagonal();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) return res;
        const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hs).eigenvalues();
        if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff())) return res;
        const Eigen::MatrixXd cov_s = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
        const double dof = static_cast<double>(n - k);
        res.stderr_.assign(np, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            res.stderr_[free_idx[j]] = std::sqrt(std::max(0.0, cov_s(j, j)) * chi2 / dof) * d(j);
    } else {
        res.stderr_.assign(np, 0.0);
    }
    res.converged = true;
    return res;
}

FitResult fit_poisson(Model m, const std::vector<double>& x, const std::vector<double>& y, double exposure,
                      const ParamMap& init, const FitOptions& opts) {
    if (!(exposure > 0.0)) throw DomainError("exposure must be > 0");
    auto weights_from = [&](auto&& mu) {
        std::vector<double> w(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) w[i] = exposure / std::max(mu(i), 0.1 / exposure);
        return w;
    };
    auto fit = fit_curve(m, x, y, weights_from([&](std::size_t i) { return std::max(y[i], 1.0 / exposure); }), init,
                         opts);
    for (int pass = 0; pass < 5 && fit.converged; ++pass) {
        ParamMap start;
        for (std::size_t j = 0; j < fit.names.size(); ++j) start[fit.names[j]] = fit.params[j];
        const auto& p = fit.params;
        auto next = fit_curve(m, x, y, weights_from([&](std::size_t i) { return model_value(m, p, x[i]); }), start,
                              opts);
        if (!next.converged) break;
        bool settled = true;
        for (std::size_t j = 0; j < p.size(); ++j)
            if (std::abs(next.params[j] - p[j]) > 1e-3 * next.stderr_[j]) settled = false;
        fit = std::move(next);
        if (settled) break;
    }
    return fit;
}

double dark_noise_sigma(double dark_per_pulse, double pulses_per_point) {
    if (!(dark_per_pulse >= 0.0)) throw DomainError("dark level must be >= 0");
    if (!(pulses_per_point > 0.0)) throw DomainError("pulses_per_point must be > 0");
    return std::sqrt(dark_per_pulse / pulses_per_point);
}

PeakCountResult count_peaks(const std::vector<double>& x, const std::vector<double>& y,
                            const PeakCountOptions& opts) {
    if (x.size() != y.size() || x.size() < 3) throw DomainError("spectrum needs at least 3 points");
    if (!std::is_sorted(x.begin(), x.end())) throw DomainError("spectrum frequencies must be ascending");
    if (!(opts.fixed_width > 0.0)) throw DomainError("fixed_width must be > 0");
    std::vector<double> sigma = opts.point_sigma;
    if (sigma.empty()) {
        if (!(opts.noise_sigma > 0.0)) throw DomainError("noise_sigma must be > 0");
        sigma.assign(y.size(), opts.noise_sigma);
    }
    if (sigma.size() != y.size()) throw DomainError("point_sigma must match the spectrum length");
    for (double v : sigma)
        if (!(v > 0.0)) throw DomainError("point_sigma values must be > 0");
    if (!(opts.histogram_bin > 0.0)) throw DomainError("histogram_bin must be > 0");

    const double w = opts.fixed_width;
    const double lo = x.front(), hi = x.back();
    PeakCountResult out;
    out.list.threshold_sigma = opts.threshold_sigma;
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - opts.baseline;

    FitOptions fo;
    fo.fixed = {"fwhm", "c"};
    fo.max_iter = 50;
    // Amplitude of a fixed-width Lorentzian centred on each grid point, fitted by
    // weighted least squares over +-2 widths. The largest significant one is
    // taken, refined with a free centre, subtracted, and the search repeats.
    std::vector<std::size_t> first(r.size()), last(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        first[i] = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), x[i] - 2.0 * w) - x.begin());
        last[i] = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), x[i] + 2.0 * w) - x.begin());
    }
    auto kernel = [w](double d) { return 1.0 / (1.0 + 4.0 * d * d / (w * w)); };
    auto amplitude_at = [&](std::size_t i) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = first[i]; k < last[i]; ++k) {
            const double u = kernel(x[k] - x[i]);
            const double wt = 1.0 / (sigma[k] * sigma[k]);
            num += wt * u * r[k];
            den += wt * u * u;
        }
        return num / den;
    };
    std::vector<double> amp_map(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) amp_map[i] = amplitude_at(i);

    while (out.list.peaks.size() < opts.max_peaks) {
        std::size_t imax = 0;
        for (std::size_t i = 1; i < r.size(); ++i)
            if (amp_map[i] / sigma[i] > amp_map[imax] / sigma[imax]) imax = i;
        const double threshold = opts.threshold_sigma * sigma[imax];
        if (amp_map[imax] < threshold) break;
        double center = x[imax], amp = amp_map[imax];
        if (last[imax] - first[imax] >= 4) {
            std::vector<double> wx(x.begin() + first[imax], x.begin() + last[imax]);
            std::vector<double> wy(r.begin() + first[imax], r.begin() + last[imax]);
            std::vector<double> ww;
            for (auto k = first[imax]; k < last[imax]; ++k) ww.push_back(1.0 / (sigma[k] * sigma[k]));
            const auto f = fit_curve(Model::lorentzian_offset, wx, wy, ww,
                                     {{"A", amp}, {"x0", center}, {"fwhm", w}, {"c", 0.0}}, fo);
            if (f.converged && f.params[0] >= threshold && std::abs(f.params[1] - x[imax]) <= 0.5 * w) {
                center = f.params[1];
                amp = f.params[0];
            }
        }
        out.list.peaks.push_back({center, amp, w});
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= amp * kernel(x[i] - center);
        for (std::size_t i = 0; i < r.size(); ++i) amp_map[i] = amplitude_at(i);
    }
    out.residual.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out.residual[i] = r[i] + opts.baseline;

    // density histogram and Gaussian envelope
    const auto nbins = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / opts.histogram_bin)));
    out.bin_centers.resize(nbins);
    out.bin_counts.assign(nbins, 0.0);
    for (std::size_t b = 0; b < nbins; ++b) out.bin_centers[b] = lo + (b + 0.5) * opts.histogram_bin;
    for (const auto& pk : out.list.peaks) {
        auto b = static_cast<std::size_t>(std::max(0.0, (pk.center - lo) / opts.histogram_bin));
        out.bin_counts[std::min(b, nbins - 1)] += 1.0;
    }
    auto overlaps_mask = [&](double a, double bnd) {
        for (const auto& [m0, m1] : opts.masked)
            if (m0 < bnd && m1 > a) return true;
        return false;
    };
    std::vector<double> hx, hy;
    for (std::size_t b = 0; b < nbins; ++b) {
        const double a = lo + b * opts.histogram_bin;
        if (overlaps_mask(a, a + opts.histogram_bin)) continue;
        hx.push_back(out.bin_centers[b]);
        hy.push_back(out.bin_counts[b]);
    }
    out.envelope.model = Model::gaussian_offset;
    out.envelope.names = model_parameters(Model::gaussian_offset);
    if (out.list.peaks.size() >= 5 && hx.size() >= 5) {
        FitOptions eo;
        eo.fixed = {"c"};
        auto guess = initial_guess(Model::gaussian_offset, hx, hy);
        guess["c"] = 0.0;
        out.envelope = fit_curve(Model::gaussian_offset, hx, hy, poisson_weights(hy), guess, eo);
    }
    if (out.envelope.converged) {
        const double a = out.envelope.params[0], mu = out.envelope.params[1];
        const double s = std::abs(out.envelope.params[2]);
        for (const auto& [m0, m1] : opts.masked) {
            const double c0 = std::clamp(m0, lo, hi), c1 = std::clamp(m1, lo, hi);
            if (c1 <= c0) continue;
            const double phi = 0.5 * (std::erf((c1 - mu) / (s * std::sqrt(2.0))) -
                                      std::erf((c0 - mu) / (s * std::sqrt(2.0))));
            out.masked_estimate += a * s * std::sqrt(2.0 * M_PI) * phi / opts.histogram_bin;
        }
    }
    out.list.total_count =
        static_cast<long>(out.list.peaks.size()) + std::lround(out.masked_estimate);
    return out;
}

Ratio signal_to_background(const RateEstimate& on_peak, const RateEstimate& detuned) {
    if (detuned.mean == 0.0) throw NormalizationError("detuned rate is zero; signal-to-background undefined");
    const double q = on_peak.mean / detuned.mean;
    double rel2 = std::pow(detuned.stderr_ / detuned.mean, 2);
    if (on_peak.mean != 0.0) rel2 += std::pow(on_peak.stderr_ / on_peak.mean, 2);
    return {q - 1.0, std::abs(q) * std::sqrt(rel2)};
}

BunchingFit fit_bunching(const std::vector<G2Point>& g2, double rep_period, double tau_guess) {
    if (!(rep_period > 0.0)) throw DomainError("rep_period must be > 0");
    std::vector<double> x, y, w;
    bool all_errors = true;
    for (const auto& pt : g2) {
        if (pt.offset < 1) continue;
        x.push_back(pt.offset * rep_period);
        y.push_back(pt.value);
        w.push_back(pt.stderr_ > 0.0 ? 1.0 / (pt.stderr_ * pt.stderr_) : 0.0);
        all_errors = all_errors && pt.stderr_ > 0.0;
    }
    if (x.size() < 3) throw DomainError("bunching fit needs at least 3 offsets >= 1");
    if (!all_errors) w.clear();

    const double a0 = std::max(y.front() - 1.0, 1e-3);
    double tau0 = tau_guess;
    if (!(tau0 > 0.0)) {
        tau0 = 5.0 * rep_period;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (y[i] - 1.0 < a0 / std::exp(1.0)) {
                tau0 = x[i];
                break;
            }
        }
    }
    FitOptions fo;
    fo.fixed = {"c"};
    BunchingFit out;
    out.fit = fit_curve(Model::exponential_offset, x, y, w, {{"A", a0}, {"tau", tau0}, {"c", 1.0}}, fo);
    out.amplitude = out.fit.params[0];
    out.time_constant = out.fit.params[1];
    if (out.fit.converged) {
        out.amplitude_err = out.fit.stderr_[0];
        out.time_constant_err = out.fit.stderr_[1];
    }
    return out;
}

nlohmann::json fit_to_json(const FitResult& r) {
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        nlohmann::json e{{"value", r.params.empty() ? 0.0 : r.params[i]}};
        if (!r.stderr_.empty()) e["stderr"] = r.stderr_[i];
        params[r.names[i]] = e;
    }
    return {{"model", model_name(r.model)},
            {"params", params},
            {"residual_norm", r.residual_norm},
            {"converged", r.converged},
            {"n_iter", r.n_iter}};
}

nlohmann::json peaks_to_json(const PeakList& p) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pk : p.peaks)
        arr.push_back({{"center_hz", pk.center}, {"amplitude", pk.amplitude}, {"width_hz", pk.width}});
    return {{"threshold_sigma", p.threshold_sigma}, {"total_count", p.total_count}, {"peaks", arr}};
}

} // namespace cavion
