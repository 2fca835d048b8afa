#include "hsps/sweep.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "hsps/error.hpp"

namespace hsps {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class F>
double or_nan(F&& f) {
    try {
        return f();
    } catch (const UndefinedMetricError&) {
        return kNaN;
    }
}

void put(std::ostream& out, double v) {
    if (std::isnan(v))
        out << "nan";
    else if (std::isinf(v))
        out << "inf";
    else
        out << v;
}

}  // namespace

std::vector<SweepPoint> points_from_powers(std::span<const double> powers, double kappa,
                                           std::uint64_t n_pulses) {
    if (!(kappa > 0.0)) throw ConfigError("kappa must be > 0 when sweeping pump power");
    std::vector<SweepPoint> out;
    for (double p : powers) {
        if (!(p >= 0.0)) throw ConfigError("pump powers must be >= 0");
        out.push_back({kappa * p, p, n_pulses});
    }
    return out;
}

std::vector<SweepPoint> points_from_mu(std::span<const double> mu, std::uint64_t n_pulses) {
    std::vector<SweepPoint> out;
    for (double m : mu) out.push_back({m, std::nullopt, n_pulses});
    return out;
}

double effective_idler_detector_efficiency(const ChannelModel& channel) {
    const double r = channel.splitter_ratio;
    return r * channel.detector_efficiency[1] + (1.0 - r) * channel.detector_efficiency[2];
}

SweepRow analyze_point(const SweepPoint& point, std::uint64_t seed, const TagStream& stream,
                       const ChannelModel& channel, const CoincidenceConfig& coincidence) {
    SweepRow row;
    row.point = point;
    row.seed = seed;
    row.summary = count(stream, coincidence);
    const double eta_det_i = effective_idler_detector_efficiency(channel);
    row.heralding_efficiency =
        or_nan([&] { return heralding_efficiency(row.summary, eta_det_i); });
    row.heralded_g2 = or_nan([&] { return heralded_g2(row.summary); });
    for (int m : coincidence.shifts) row.car.push_back(car_rep(row.summary, m));
    return row;
}

std::vector<SweepRow> power_sweep(const SourceModel& source_template, const ChannelModel& channel,
                                  std::span<const SweepPoint> points, std::uint64_t master_seed,
                                  const CoincidenceConfig& coincidence,
                                  const SimulationOptions& options) {
    coincidence.validate();
    std::vector<SweepRow> rows;
    rows.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        SourceModel source = source_template;
        source.mean_pairs_per_pulse = points[i].mu;
        const auto seed = derive_seed(master_seed, i);
        const auto stream = simulate_stream(source, channel, points[i].n_pulses, seed, options);
        rows.push_back(analyze_point(points[i], seed, stream, channel, coincidence));
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows,
                     const CoincidenceConfig& coincidence) {
    out << "power,mu,n_pulses,seed,R_s_hz,R_i1_hz,R_i2_hz,coincidences,triples,eta_h,g2_h";
    for (int m : coincidence.shifts) out << ",car_rep_" << m;
    out << '\n';
    const auto old = out.precision(10);
    for (const auto& r : rows) {
        if (r.point.power)
            put(out, *r.point.power);
        else
            out << "nan";
        out << ',' << r.point.mu << ',' << r.point.n_pulses << ',' << r.seed << ',';
        put(out, r.summary.r_s());
        out << ',';
        put(out, r.summary.r_i1());
        out << ',';
        put(out, r.summary.r_i2());
        out << ',' << r.summary.s_i() << ',' << r.summary.s_i1_i2 << ',';
        put(out, r.heralding_efficiency);
        out << ',';
        put(out, r.heralded_g2);
        for (const auto& c : r.car) {
            out << ',';
            put(out, c.value);
        }
        out << '\n';
    }
    out.precision(old);
}

}  // namespace hsps
