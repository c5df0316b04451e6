#pragma once

// Monte Carlo photon-detection chain for a pulsed, gated single-photon
// detector, and pulse-binned intensity correlations.

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cavion {

struct DetectorConfig {
    double eta_total = 0.04;  // cavity photon -> click
    double dark_rate = 0.0;   // counts/s while the gate is open
    double gate_start = 10e-6;
    double gate_duration = 82e-6;
    double dead_time = 0.0;

    double gate_end() const { return gate_start + gate_duration; }
    void validate(double rep_period) const;
};

// One radiating ion as seen by the detector.
struct EmitterChannel {
    double excite_probability = 0.0; // excited population at the end of the pulse
    double decay_rate = 0.0;         // rad/s, total
    double cavity_fraction = 1.0;    // eta_Er
};

struct EmissionModel {
    std::vector<EmitterChannel> emitters;
    double emission_start = 10e-6;      // end of the excitation pulse
    double background_per_pulse = 0.0;  // weakly coupled ions, flat within the gate
    double rep_period = 100e-6;
};

// Bright/dark telegraph modulating the excitation probability.
struct BlinkConfig {
    bool enabled = false;
    double p_bright = 1.0;
    double switch_time = 800e-6;

    void validate() const;
};

struct Click {
    std::uint64_t pulse = 0;
    double t = 0.0; // s after the start of the pulse

    bool operator==(const Click&) const = default;
};

struct ClickStream {
    std::vector<Click> clicks;
    std::uint64_t n_pulses = 0;
    std::uint64_t seed = 0;

    bool operator==(const ClickStream&) const = default;
};

// Pulses are processed in fixed-size chunks, each with its own RNG substream,
// so the result does not depend on `threads`.
ClickStream simulate_clicks(const EmissionModel& model, const DetectorConfig& det,
                            const BlinkConfig& blink, std::uint64_t n_pulses, std::uint64_t seed,
                            unsigned threads = 1);

inline constexpr std::uint64_t kPulsesPerChunk = 1u << 16;

struct G2Point {
    int offset = 0;
    double value = 0.0;
    double stderr_ = 0.0;
};

// g2(0) = <n(n-1)>/<n>^2 and g2(m) = <n_i n_{i+m}>/<n>^2 over per-pulse counts.
// Standard errors by first-order propagation, with the moment covariances
// estimated from kG2Batches contiguous blocks of pulses so that pulse-to-pulse
// correlations (blinking) are included.
inline constexpr std::uint64_t kG2Batches = 200;
std::vector<G2Point> g2_pulsed(const ClickStream& stream, int max_offset);

// g2(0) floor set by uncorrelated background at signal-to-background A.
double g2_background_floor(double a);

// Telegraph-model g2(m), m = 1..max_offset.
std::vector<G2Point> bunching_profile(const BlinkConfig& blink, double rep_period, int max_offset);

// Mean clicks per pulse with its Poisson standard error.
struct RateEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};
RateEstimate click_rate(const ClickStream& stream);

// CSV: two comment lines (n_pulses, seed), header pulse_index,t_in_pulse_ns.
void write_clicks_csv(std::ostream& os, const ClickStream& stream);
ClickStream read_clicks_csv(std::istream& is);

// Records of little-endian u64 pulse index followed by little-endian f64 ns.
void write_clicks_binary(std::ostream& os, const ClickStream& stream);
ClickStream read_clicks_binary(std::istream& is, std::uint64_t n_pulses, std::uint64_t seed);

} // namespace cavion
