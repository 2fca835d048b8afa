#include "hsps/tagmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "hsps/error.hpp"

namespace hsps {

namespace {

using Times = std::vector<std::int64_t>;

std::uint64_t match_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                          std::int64_t offset_b, std::int64_t window, Matching matching) {
    // Integer form of |ta - tb| <= window / 2.
    auto close = [window](std::int64_t d) { return 2 * std::abs(d) <= window; };
    std::uint64_t n = 0;
    if (matching == Matching::Greedy) {
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            const std::int64_t d = (b[j] + offset_b) - a[i];
            if (close(d)) {
                ++n;
                ++i;
                ++j;
            } else if (d < 0) {
                ++j;
            } else {
                ++i;
            }
        }
        return n;
    }
    std::size_t lo = 0;
    for (std::int64_t ta : a) {
        while (lo < b.size() && !close(b[lo] + offset_b - ta) && b[lo] + offset_b < ta) ++lo;
        for (std::size_t j = lo; j < b.size(); ++j) {
            const std::int64_t d = b[j] + offset_b - ta;
            if (close(d))
                ++n;
            else if (d > 0)
                break;
        }
    }
    return n;
}

std::uint64_t match_triples(const Times& s, const Times& i1, const Times& i2, std::int64_t window,
                            Matching matching) {
    auto close = [window](std::int64_t d) { return 2 * std::abs(d) <= window; };
    std::vector<char> used1(i1.size(), 0), used2(i2.size(), 0);
    std::size_t lo1 = 0, lo2 = 0;
    std::uint64_t n = 0;
    for (std::int64_t ts : s) {
        while (lo1 < i1.size() && i1[lo1] < ts && !close(i1[lo1] - ts)) ++lo1;
        while (lo2 < i2.size() && i2[lo2] < ts && !close(i2[lo2] - ts)) ++lo2;
        bool found = false;
        for (std::size_t j = lo1; j < i1.size() && close(i1[j] - ts) && !found; ++j) {
            if (matching == Matching::Greedy && used1[j]) continue;
            for (std::size_t k = lo2; k < i2.size() && close(i2[k] - ts); ++k) {
                if (matching == Matching::Greedy && used2[k]) continue;
                if (!close(i2[k] - i1[j])) continue;
                ++n;
                if (matching == Matching::Greedy) {
                    used1[j] = used2[k] = 1;
                    found = true;
                    break;
                }
            }
        }
    }
    return n;
}

double inferred_duration_s(const TagStream& stream, const CoincidenceConfig& config) {
    if (config.duration_s) return *config.duration_s;
    if (stream.header.duration_s > 0.0) return stream.header.duration_s;
    if (stream.events.empty()) return 0.0;
    // Whole repetition periods from t = 0 up to the period of the last event.
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    for (const auto& e : stream.events) last = std::max(last, e.timestamp_ps);
    const std::int64_t periods = std::max<std::int64_t>(0, last) / config.repetition_time_ps + 1;
    return double(periods) * double(config.repetition_time_ps) * 1e-12;
}

}  // namespace

void CoincidenceConfig::validate() const {
    if (window_ps <= 0) throw ConfigError("coincidence window must be > 0 ps");
    if (repetition_time_ps <= window_ps)
        throw ConfigError("repetition time must exceed the coincidence window");
    for (int m : shifts)
        if (m < 1) throw ConfigError("pulse shifts must be positive integers");
    if (duration_s && !(*duration_s > 0.0)) throw ConfigError("duration_s must be > 0");
}

CountSummary count(const TagStream& stream, const CoincidenceConfig& config) {
    config.validate();
    CountSummary out;
    out.duration_s = inferred_duration_s(stream, config);
    for (int m : config.shifts) out.shifted[m] = 0;
    if (stream.events.empty()) {
        out.empty_stream = true;
        return out;
    }

    std::array<Times, 3> t;
    for (const auto& e : stream.events) {
        const auto k = static_cast<std::size_t>(e.channel);
        t[k].push_back(e.timestamp_ps + config.delays_ps[k]);
    }
    for (auto& v : t) std::sort(v.begin(), v.end());
    for (int k = 0; k < 3; ++k) out.singles[k] = t[k].size();

    const auto w = config.window_ps;
    out.s_i1 = match_pairs(t[0], t[1], 0, w, config.matching);
    out.s_i2 = match_pairs(t[0], t[2], 0, w, config.matching);
    out.i1_i2 = match_pairs(t[1], t[2], 0, w, config.matching);
    out.s_i1_i2 = match_triples(t[0], t[1], t[2], w, config.matching);
    for (int m : config.shifts) {
        const std::int64_t shift = std::int64_t(m) * config.repetition_time_ps;
        out.shifted[m] = match_pairs(t[0], t[1], shift, w, config.matching) +
                         match_pairs(t[0], t[2], shift, w, config.matching);
    }

    if (config.matching == Matching::Greedy) {
        auto bounded = [](std::uint64_t c, std::uint64_t a, std::uint64_t b) {
            return c <= std::min(a, b);
        };
        if (!bounded(out.s_i1, out.singles[0], out.singles[1]) ||
            !bounded(out.s_i2, out.singles[0], out.singles[2]) ||
            !bounded(out.i1_i2, out.singles[1], out.singles[2]) ||
            out.s_i1_i2 > std::min({out.singles[0], out.singles[1], out.singles[2]}))
            throw Error("coincidence matching double-counted events");
    }
    return out;
}

double heralding_efficiency(const CountSummary& summary, double idler_detector_efficiency) {
    if (!(idler_detector_efficiency > 0.0 && idler_detector_efficiency <= 1.0))
        throw UndefinedMetricError("heralding efficiency needs an idler detector efficiency in (0, 1]");
    if (summary.singles[0] == 0)
        throw UndefinedMetricError("heralding efficiency undefined: no herald (signal) counts");
    return summary.r_s_i1() / (summary.r_s() * idler_detector_efficiency) +
           summary.r_s_i2() / (summary.r_s() * idler_detector_efficiency);
}

double heralded_g2(const CountSummary& summary) {
    if (summary.s_i() == 0)
        throw UndefinedMetricError("heralded g2 undefined: no signal-idler coincidences");
    const double pairs = double(summary.s_i());
    return 4.0 * double(summary.singles[0]) * double(summary.s_i1_i2) / (pairs * pairs);
}

CarResult car_rep(const CountSummary& summary, int m) {
    const auto it = summary.shifted.find(m);
    if (it == summary.shifted.end())
        throw UndefinedMetricError("no shifted coincidence count for m = " + std::to_string(m));
    CarResult out;
    out.coincidences = summary.s_i();
    out.accidentals = it->second;
    out.value = out.accidentals == 0 ? std::numeric_limits<double>::infinity()
                                     : double(out.coincidences) / double(out.accidentals);
    return out;
}

KlyshkoEstimate klyshko_infer(const CountSummary& summary) {
    const double rs = summary.r_s();
    const double ri = summary.r_i1() + summary.r_i2();
    const double rsi = summary.r_s_i1() + summary.r_s_i2();
    if (!(rs > 0.0) || !(ri > 0.0))
        throw UndefinedMetricError("Klyshko inference needs non-zero signal and idler rates");
    if (!(rsi > 0.0))
        throw UndefinedMetricError("Klyshko inference undefined: no signal-idler coincidences");
    return {rsi / ri, rsi / rs, rs * ri / rsi};
}

}  // namespace hsps
