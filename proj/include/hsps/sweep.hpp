#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hsps/pairsim.hpp"
#include "hsps/tagmetrics.hpp"

namespace hsps {

struct SweepPoint {
    double mu = 0.0;
    // Pump power label; mu = kappa * power when built from powers.
    std::optional<double> power;
    std::uint64_t n_pulses = 0;
};

// Points from pump powers with a user-supplied brightness kappa (pairs per
// pulse per unit power).
std::vector<SweepPoint> points_from_powers(std::span<const double> powers, double kappa,
                                           std::uint64_t n_pulses);
std::vector<SweepPoint> points_from_mu(std::span<const double> mu, std::uint64_t n_pulses);

struct SweepRow {
    SweepPoint point;
    std::uint64_t seed = 0;
    CountSummary summary;
    // NaN when the metric is undefined for the point.
    double heralding_efficiency = 0.0;
    double heralded_g2 = 0.0;
    std::vector<CarResult> car;  // one per configured shift
};

// Detector efficiency of the split idler arm as seen by the heralding
// estimator: r eta_det,i1 + (1 - r) eta_det,i2.
double effective_idler_detector_efficiency(const ChannelModel& channel);

// Point i is simulated with seed derive_seed(master_seed, i), so any point can
// be reproduced by a single simulate_stream call.
std::vector<SweepRow> power_sweep(const SourceModel& source_template, const ChannelModel& channel,
                                  std::span<const SweepPoint> points, std::uint64_t master_seed,
                                  const CoincidenceConfig& coincidence,
                                  const SimulationOptions& options = {});

SweepRow analyze_point(const SweepPoint& point, std::uint64_t seed, const TagStream& stream,
                       const ChannelModel& channel, const CoincidenceConfig& coincidence);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows,
                     const CoincidenceConfig& coincidence);

}  // namespace hsps
