#include "cavion/detection.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <thread>

#include "cavion/errors.hpp"
#include "cavion/rng.hpp"

namespace cavion {

void DetectorConfig::validate(double rep_period) const {
    if (!(eta_total >= 0.0 && eta_total <= 1.0)) throw DomainError("eta_total must lie in [0, 1]");
    if (!(dark_rate >= 0.0)) throw DomainError("dark_rate must be >= 0");
    if (!(gate_start >= 0.0 && gate_duration > 0.0)) throw DomainError("gate must have positive length");
    if (gate_end() > rep_period * (1.0 + 1e-12))
        throw DomainError("detector gate must lie within the repetition period");
    if (!(dead_time >= 0.0)) throw DomainError("dead_time must be >= 0");
}

void BlinkConfig::validate() const {
    if (!enabled) return;
    if (!(p_bright > 0.0 && p_bright <= 1.0)) throw DomainError("p_bright must lie in (0, 1]");
    if (!(switch_time > 0.0)) throw DomainError("switch_time must be > 0");
}

namespace {

constexpr std::uint64_t kBlinkStreamBase = 0xB11B0000'00000000ull;

std::vector<std::uint8_t> telegraph(const BlinkConfig& blink, double rep_period,
                                    std::uint64_t n_pulses, Rng rng) {
    std::vector<std::uint8_t> bright(n_pulses);
    const double keep = std::exp(-rep_period / blink.switch_time);
    const double p = blink.p_bright;
    const double stay_bright = p + (1.0 - p) * keep;
    const double turn_bright = p * (1.0 - keep);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool state = u(rng) < p;
    for (std::uint64_t i = 0; i < n_pulses; ++i) {
        bright[i] = state ? 1 : 0;
        state = u(rng) < (state ? stay_bright : turn_bright);
    }
    return bright;
}

struct ChunkContext {
    const EmissionModel& model;
    const DetectorConfig& det;
    const std::vector<std::vector<std::uint8_t>>& bright;
    std::uint64_t seed;
    std::uint64_t n_pulses;
};

std::vector<Click> simulate_chunk(const ChunkContext& ctx, std::uint64_t chunk) {
    Rng rng = substream(ctx.seed, chunk);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> in_gate(ctx.det.gate_start, ctx.det.gate_end());
    const double dark_mean = ctx.det.dark_rate * ctx.det.gate_duration;
    const double bg_mean = ctx.model.background_per_pulse;
    std::poisson_distribution<int> dark(dark_mean > 0.0 ? dark_mean : 1.0);
    std::poisson_distribution<int> background(bg_mean > 0.0 ? bg_mean : 1.0);

    const std::uint64_t begin = chunk * kPulsesPerChunk;
    const std::uint64_t end = std::min(ctx.n_pulses, begin + kPulsesPerChunk);
    std::vector<Click> out;
    std::vector<double> times;
    for (std::uint64_t pulse = begin; pulse < end; ++pulse) {
        times.clear();
        for (std::size_t e = 0; e < ctx.model.emitters.size(); ++e) {
            const auto& em = ctx.model.emitters[e];
            double p = em.excite_probability;
            if (!ctx.bright.empty() && !ctx.bright[e][pulse]) p = 0.0;
            if (p <= 0.0 || u(rng) >= p) continue;
            const double t =
                ctx.model.emission_start + std::exponential_distribution<double>(em.decay_rate)(rng);
            if (t < ctx.det.gate_start || t > ctx.det.gate_end()) continue;
            if (u(rng) < em.cavity_fraction * ctx.det.eta_total) times.push_back(t);
        }
        if (dark_mean > 0.0) {
            for (int k = dark(rng); k > 0; --k) times.push_back(in_gate(rng));
        }
        if (bg_mean > 0.0) {
            for (int k = background(rng); k > 0; --k) times.push_back(in_gate(rng));
        }
        if (times.empty()) continue;
        std::sort(times.begin(), times.end());
        double last = -1.0;
        for (double t : times) {
            if (last >= 0.0 && t - last < ctx.det.dead_time) continue;
            out.push_back({pulse, t});
            last = t;
        }
    }
    return out;
}

} // namespace

ClickStream simulate_clicks(const EmissionModel& model, const DetectorConfig& det,
                            const BlinkConfig& blink, std::uint64_t n_pulses, std::uint64_t seed,
                            unsigned threads) {
    if (n_pulses < 1) throw DomainError("n_pulses must be >= 1");
    det.validate(model.rep_period);
    blink.validate();
    for (const auto& em : model.emitters) {
        if (!(em.excite_probability >= 0.0 && em.excite_probability <= 1.0))
            throw DomainError("excite_probability must lie in [0, 1]");
        if (!(em.decay_rate > 0.0)) throw DomainError("emitter decay rate must be > 0");
        if (!(em.cavity_fraction >= 0.0 && em.cavity_fraction <= 1.0))
            throw DomainError("cavity_fraction must lie in [0, 1]");
    }
    if (!(model.background_per_pulse >= 0.0)) throw DomainError("background must be >= 0");

    std::vector<std::vector<std::uint8_t>> bright;
    if (blink.enabled) {
        for (std::size_t e = 0; e < model.emitters.size(); ++e)
            bright.push_back(telegraph(blink, model.rep_period, n_pulses,
                                       substream(seed, kBlinkStreamBase + e)));
    }

    const std::uint64_t n_chunks = (n_pulses + kPulsesPerChunk - 1) / kPulsesPerChunk;
    std::vector<std::vector<Click>> chunks(n_chunks);
    const ChunkContext ctx{model, det, bright, seed, n_pulses};
    const unsigned workers =
        static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, n_chunks));
    if (workers == 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) chunks[c] = simulate_chunk(ctx, c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::uint64_t c = next++; c < n_chunks; c = next++)
                    chunks[c] = simulate_chunk(ctx, c);
            });
        }
    }

    ClickStream stream;
    stream.n_pulses = n_pulses;
    stream.seed = seed;
    std::size_t total = 0;
    for (const auto& c : chunks) total += c.size();
    stream.clicks.reserve(total);
    for (auto& c : chunks) stream.clicks.insert(stream.clicks.end(), c.begin(), c.end());
    return stream;
}

namespace {

struct PulseCount {
    std::uint64_t pulse;
    double n;
};

std::vector<PulseCount> sparse_counts(const ClickStream& s) {
    std::vector<PulseCount> counts;
    for (const auto& c : s.clicks) {
        if (!counts.empty() && counts.back().pulse == c.pulse) {
            counts.back().n += 1.0;
        } else {
            if (!counts.empty() && c.pulse < counts.back().pulse)
                throw DomainError("click stream pulse indices must be non-decreasing");
            counts.push_back({c.pulse, 1.0});
        }
    }
    return counts;
}

} // namespace

std::vector<G2Point> g2_pulsed(const ClickStream& stream, int max_offset) {
    if (stream.n_pulses == 0 || stream.clicks.empty())
        throw NormalizationError("g2 is undefined for a stream without clicks");
    if (max_offset < 0 || static_cast<std::uint64_t>(max_offset) >= stream.n_pulses)
        throw DomainError("max_offset must lie in [0, n_pulses)");

    const auto counts = sparse_counts(stream);
    const std::uint64_t n_pulses = stream.n_pulses;
    const std::uint64_t batches = std::min<std::uint64_t>(kG2Batches, n_pulses);
    const std::uint64_t batch_len = (n_pulses + batches - 1) / batches;
    auto batch_of = [&](std::uint64_t pulse) { return static_cast<std::size_t>(pulse / batch_len); };
    auto batch_pulses = [&](std::size_t b, std::uint64_t upto) {
        const std::uint64_t lo = b * batch_len;
        const std::uint64_t hi = std::min(upto, lo + batch_len);
        return hi > lo ? static_cast<double>(hi - lo) : 0.0;
    };

    std::vector<double> sn(batches, 0.0);
    for (const auto& c : counts) sn[batch_of(c.pulse)] += c.n;
    double sum_n = 0.0;
    for (double v : sn) sum_n += v;
    const double n_total = static_cast<double>(n_pulses);
    const double mean = sum_n / n_total;

    std::vector<G2Point> out;
    out.reserve(static_cast<std::size_t>(max_offset) + 1);
    std::vector<double> sx(batches);
    for (int m = 0; m <= max_offset; ++m) {
        std::fill(sx.begin(), sx.end(), 0.0);
        if (m == 0) {
            for (const auto& c : counts) sx[batch_of(c.pulse)] += c.n * (c.n - 1.0);
        } else {
            std::size_t k = 0;
            for (const auto& c : counts) {
                const std::uint64_t target = c.pulse + static_cast<std::uint64_t>(m);
                while (k < counts.size() && counts[k].pulse < target) ++k;
                if (k == counts.size()) break;
                if (counts[k].pulse == target) sx[batch_of(c.pulse)] += c.n * counts[k].n;
            }
        }
        const std::uint64_t pair_end = n_pulses - static_cast<std::uint64_t>(m);
        const double n_pairs = static_cast<double>(pair_end);
        double sum_x = 0.0;
        for (double v : sx) sum_x += v;
        const double xbar = sum_x / n_pairs;
        const double m2 = mean * mean;
        const double g = xbar / m2;

        // first-order influence of each contiguous batch on g = xbar / mean^2
        double var_g = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const double z = (sx[b] - xbar * batch_pulses(b, pair_end)) / (n_pairs * m2) -
                             2.0 * xbar * (sn[b] - mean * batch_pulses(b, n_pulses)) / (n_total * m2 * mean);
            var_g += z * z;
        }
        if (batches > 1) var_g *= static_cast<double>(batches) / static_cast<double>(batches - 1);
        out.push_back({m, g, std::sqrt(var_g)});
    }
    return out;
}

double g2_background_floor(double a) {
    if (!(a >= 0.0)) throw DomainError("signal-to-background ratio must be >= 0");
    if (std::isinf(a)) return 0.0;
    return (2.0 * a + 1.0) / ((a + 1.0) * (a + 1.0));
}

std::vector<G2Point> bunching_profile(const BlinkConfig& blink, double rep_period, int max_offset) {
    if (!blink.enabled) throw DomainError("bunching profile requires blinking to be enabled");
    blink.validate();
    if (!(rep_period > 0.0)) throw DomainError("rep_period must be > 0");
    std::vector<G2Point> out;
    const double excess = (1.0 - blink.p_bright) / blink.p_bright;
    for (int m = 1; m <= max_offset; ++m)
        out.push_back({m, 1.0 + excess * std::exp(-m * rep_period / blink.switch_time), 0.0});
    return out;
}

RateEstimate click_rate(const ClickStream& stream) {
    if (stream.n_pulses == 0) throw NormalizationError("stream has no pulses");
    const double k = static_cast<double>(stream.clicks.size());
    const double n = static_cast<double>(stream.n_pulses);
    return {k / n, std::sqrt(k) / n};
}

void write_clicks_csv(std::ostream& os, const ClickStream& stream) {
    os << "# n_pulses=" << stream.n_pulses << "\n# seed=" << stream.seed
       << "\npulse_index,t_in_pulse_ns\n";
    char buf[64];
    for (const auto& c : stream.clicks) {
        std::snprintf(buf, sizeof buf, "%llu,%.12g\n", static_cast<unsigned long long>(c.pulse),
                      c.t * 1e9);
        os << buf;
    }
}

ClickStream read_clicks_csv(std::istream& is) {
    ClickStream s;
    bool have_pulses = false, have_header = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line[0] == '#') {
            if (std::sscanf(line.c_str(), "# n_pulses=%llu",
                            reinterpret_cast<unsigned long long*>(&s.n_pulses)) == 1)
                have_pulses = true;
            std::sscanf(line.c_str(), "# seed=%llu", reinterpret_cast<unsigned long long*>(&s.seed));
            continue;
        }
        if (!have_header) {
            if (line.rfind("pulse_index,t_in_pulse_ns", 0) != 0)
                throw InputError(where, "expected header pulse_index,t_in_pulse_ns");
            have_header = true;
            continue;
        }
        unsigned long long pulse = 0;
        double ns = 0.0;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%llu,%lf%c", &pulse, &ns, &extra) != 2)
            throw InputError(where, "malformed click record");
        s.clicks.push_back({pulse, ns * 1e-9});
    }
    if (!have_pulses) throw InputError("header", "missing '# n_pulses=' line");
    return s;
}

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_le(std::istream& is, std::uint64_t& bits) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

} // namespace

void write_clicks_binary(std::ostream& os, const ClickStream& stream) {
    for (const auto& c : stream.clicks) {
        put_le<std::uint64_t>(os, c.pulse);
        put_le<double>(os, c.t * 1e9);
    }
}

ClickStream read_clicks_binary(std::istream& is, std::uint64_t n_pulses, std::uint64_t seed) {
    ClickStream s;
    s.n_pulses = n_pulses;
    s.seed = seed;
    std::uint64_t pulse = 0, ns_bits = 0;
    while (get_le(is, pulse)) {
        if (!get_le(is, ns_bits)) throw InputError("binary clicks", "truncated record");
        s.clicks.push_back({pulse, std::bit_cast<double>(ns_bits) * 1e-9});
    }
    if (is.gcount() != 0) throw InputError("binary clicks", "truncated record");
    return s;
}

} // namespace cavion
