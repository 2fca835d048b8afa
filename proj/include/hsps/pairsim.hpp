#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hsps/tagstream.hpp"

namespace hsps {

enum class PhotonStatistics { Thermal, Poissonian };

struct SourceModel {
    double mean_pairs_per_pulse = 0.0;
    PhotonStatistics statistics = PhotonStatistics::Thermal;
    double repetition_rate_hz = 10e6;
    double pulse_jitter_ps = 0.0;

    void validate() const;
    double pulse_period_ps() const { return 1e12 / repetition_rate_hz; }
};

// Path transmissions exclude the detectors; detector efficiencies and the
// per-gate noise probabilities are indexed by Channel (S, I1, I2).
struct ChannelModel {
    double signal_transmission = 1.0;
    double idler_transmission = 1.0;
    // Fraction of idler photons routed to I1.
    double splitter_ratio = 0.5;
    std::array<double, 3> detector_efficiency{1.0, 1.0, 1.0};
    // Dark-count probability per detection gate.
    std::array<double, 3> dark_count_prob{0.0, 0.0, 0.0};
    // Uncorrelated background (e.g. residual pump) click probability per gate.
    std::array<double, 3> background_prob{0.0, 0.0, 0.0};
    // Width of the detection gate centred on the pulse in which noise clicks
    // are placed.
    double gate_width_ps = 2500.0;

    void validate() const;
    // Combined dark + background click probability of one detector.
    double noise_prob(Channel c) const;
    // Per-photon probabilities of a click on S, I1, I2.
    double signal_detection() const { return signal_transmission * detector_efficiency[0]; }
    double idler1_detection() const {
        return idler_transmission * splitter_ratio * detector_efficiency[1];
    }
    double idler2_detection() const {
        return idler_transmission * (1.0 - splitter_ratio) * detector_efficiency[2];
    }
};

inline constexpr double kMaxTruncatedTail = 1e-12;

// P(n) for n = 0..n_max, renormalized after checking the truncated tail mass.
Eigen::VectorXd pair_number_distribution(const SourceModel& source, int n_max);

struct ClickProbabilities {
    double s = 0.0;
    double i1 = 0.0;
    double i2 = 0.0;
    double s_i1 = 0.0;
    double s_i2 = 0.0;
    double i1_i2 = 0.0;
    double s_i1_i2 = 0.0;

    std::array<double, 7> as_array() const { return {s, i1, i2, s_i1, s_i2, i1_i2, s_i1_i2}; }
};

// Exact per-pulse click probabilities of the three threshold detectors:
// enumeration over the pair number with binomial thinning, noise OR-ed in.
ClickProbabilities click_probabilities(const SourceModel& source, const ChannelModel& channel,
                                       int n_max = 400);

struct PulseOutcome {
    std::uint64_t pulse_index = 0;
    bool s = false;
    bool i1 = false;
    bool i2 = false;
};

struct SimulationOptions {
    std::uint64_t block_size = 1u << 20;
    // Worker threads; 0 picks hardware concurrency. Output does not depend on it.
    unsigned threads = 0;
};

// Seed of block (or sweep point) `index`, derived from the master seed with
// SplitMix64 finalizers.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

// Pulses with at least one click, in pulse order.
std::vector<PulseOutcome> simulate_outcomes(const SourceModel& source, const ChannelModel& channel,
                                            std::uint64_t n_pulses, std::uint64_t seed,
                                            const SimulationOptions& options = {});

// Counts of the seven joint click events over all simulated pulses.
struct OutcomeTally {
    std::uint64_t n_pulses = 0;
    std::array<std::uint64_t, 7> counts{};  // order of ClickProbabilities::as_array
};

OutcomeTally tally_outcomes(const SourceModel& source, const ChannelModel& channel,
                            std::uint64_t n_pulses, std::uint64_t seed,
                            const SimulationOptions& options = {});

TagStream simulate_stream(const SourceModel& source, const ChannelModel& channel,
                          std::uint64_t n_pulses, std::uint64_t seed,
                          const SimulationOptions& options = {});

std::string describe(const SourceModel& source, const ChannelModel& channel);

}  // namespace hsps
