#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hsps/tagstream.hpp"

namespace hsps {

enum class Matching {
    // Earliest-first, one partner per event and channel pair.
    Greedy,
    // Every pair inside the window counts; for cross-checks only.
    AllPairs,
};

struct CoincidenceConfig {
    std::int64_t window_ps = 5000;
    std::array<std::int64_t, 3> delays_ps{0, 0, 0};
    std::int64_t repetition_time_ps = 100000;
    std::vector<int> shifts{1, 2};
    Matching matching = Matching::Greedy;
    // Overrides the stream duration; needed for streams read from binary files.
    std::optional<double> duration_s;

    void validate() const;
};

struct CountSummary {
    double duration_s = 0.0;
    std::array<std::uint64_t, 3> singles{};
    std::uint64_t s_i1 = 0;
    std::uint64_t s_i2 = 0;
    std::uint64_t i1_i2 = 0;
    std::uint64_t s_i1_i2 = 0;
    // Signal-idler coincidences (both idlers summed) with the idlers delayed
    // by m repetition periods.
    std::map<int, std::uint64_t> shifted;
    bool empty_stream = false;

    std::uint64_t s_i() const { return s_i1 + s_i2; }
    double rate(std::uint64_t counts) const { return duration_s > 0.0 ? double(counts) / duration_s : 0.0; }
    double r_s() const { return rate(singles[0]); }
    double r_i1() const { return rate(singles[1]); }
    double r_i2() const { return rate(singles[2]); }
    double r_s_i1() const { return rate(s_i1); }
    double r_s_i2() const { return rate(s_i2); }
    double r_i1_i2() const { return rate(i1_i2); }
    double r_s_i1_i2() const { return rate(s_i1_i2); }
};

// Windowed coincidence counting. Two events coincide iff
// |t_a + d_a - (t_b + d_b)| <= window / 2. Triples need all three pairs to
// coincide. Unsorted input is sorted per channel first.
CountSummary count(const TagStream& stream, const CoincidenceConfig& config);

// (R_s&i1 + R_s&i2) / (R_s eta_det_i).
double heralding_efficiency(const CountSummary& summary, double idler_detector_efficiency);

// 4 R_s R_s&i1&i2 / (R_s&i1 + R_s&i2)^2.
double heralded_g2(const CountSummary& summary);

struct CarResult {
    double value = 0.0;  // +inf when no accidental coincidences were seen
    std::uint64_t coincidences = 0;
    std::uint64_t accidentals = 0;

    bool infinite() const { return accidentals == 0; }
};

// R_s&i(0) / R_s&i(m tau_rep).
CarResult car_rep(const CountSummary& summary, int m);

struct KlyshkoEstimate {
    double signal_path = 0.0;  // eta_s eta_filter,s (includes the signal detector)
    double idler_path = 0.0;   // eta_i eta_filter,i (includes the idler detectors)
    double pair_rate_hz = 0.0;
};

// Inverts R_s = e_s R, R_i = e_i R, R_s&i = e_s e_i R with R_i = R_i1 + R_i2
// and R_s&i = R_s&i1 + R_s&i2.
KlyshkoEstimate klyshko_infer(const CountSummary& summary);

}  // namespace hsps
