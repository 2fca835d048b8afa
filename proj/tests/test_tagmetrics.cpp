#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsps/error.hpp"
#include "hsps/pairsim.hpp"
#include "hsps/tagmetrics.hpp"
#include "support.hpp"

using namespace hsps;

namespace {

constexpr std::int64_t kTau = 100000;

CoincidenceConfig config(std::int64_t window = 1000) {
    CoincidenceConfig c;
    c.window_ps = window;
    c.repetition_time_ps = kTau;
    return c;
}

TagStream stream_of(std::vector<TagEvent> events, double duration_s = 1.0) {
    TagStream s;
    s.header.repetition_rate_hz = 1e12 / double(kTau);
    s.header.duration_s = duration_s;
    s.events = std::move(events);
    return s;
}

// Per pulse, each channel clicks independently with probability p, jittered
// by up to +-200 ps around the pulse.
TagStream uncorrelated(test::Gen& gen, int pulses, double p) {
    std::vector<TagEvent> ev;
    for (int k = 0; k < pulses; ++k)
        for (int c = 0; c < 3; ++c)
            if (gen.uniform(0.0, 1.0) < p)
                ev.push_back({std::int64_t(k) * kTau + gen.integer(-200, 200), static_cast<Channel>(c)});
    return stream_of(std::move(ev), pulses * double(kTau) * 1e-12);
}

CountSummary summary_with(std::uint64_t s, std::uint64_t i1, std::uint64_t i2, std::uint64_t si1,
                          std::uint64_t si2, std::uint64_t s12) {
    CountSummary c;
    c.duration_s = 2.0;
    c.singles = {s, i1, i2};
    c.s_i1 = si1;
    c.s_i2 = si2;
    c.s_i1_i2 = s12;
    return c;
}

}  // namespace

TEST_CASE("coincidence window boundary") {
    const auto c = config(1000);
    CHECK(count(stream_of({{0, Channel::Signal}, {0, Channel::Idler1}}), c).s_i1 == 1);
    CHECK(count(stream_of({{0, Channel::Signal}, {500, Channel::Idler1}}), c).s_i1 == 1);
    CHECK(count(stream_of({{0, Channel::Signal}, {-500, Channel::Idler2}}), c).s_i2 == 1);
    CHECK(count(stream_of({{0, Channel::Signal}, {501, Channel::Idler1}}), c).s_i1 == 0);
    CHECK(count(stream_of({{0, Channel::Idler1}, {501, Channel::Idler2}}), c).i1_i2 == 0);
}

TEST_CASE("channel delays are applied before matching") {
    auto c = config(1000);
    const auto s = stream_of({{0, Channel::Signal}, {3000, Channel::Idler1}});
    CHECK(count(s, c).s_i1 == 0);
    c.delays_ps = {3000, 0, 0};
    CHECK(count(s, c).s_i1 == 1);
}

TEST_CASE("triples need every pair inside the window") {
    const auto c = config(1000);
    const auto ok = count(stream_of({{0, Channel::Signal}, {400, Channel::Idler1}, {-400, Channel::Idler2}}), c);
    CHECK(ok.s_i1_i2 == 0);
    CHECK(ok.s_i1 == 1);
    CHECK(ok.s_i2 == 1);
    CHECK(ok.i1_i2 == 0);
    const auto tight = count(stream_of({{0, Channel::Signal}, {200, Channel::Idler1}, {-200, Channel::Idler2}}), c);
    CHECK(tight.s_i1_i2 == 1);
}

TEST_CASE("greedy matching pairs each event at most once") {
    auto c = config(1000);
    const auto s = stream_of({{0, Channel::Signal}, {100, Channel::Idler1}, {200, Channel::Idler1}});
    CHECK(count(s, c).s_i1 == 1);
    c.matching = Matching::AllPairs;
    CHECK(count(s, c).s_i1 == 2);
}

TEST_CASE("counts are invariant under translation, reordering and idler swap") {
    test::Gen gen(41);
    const auto c = config(800);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = uncorrelated(gen, 2000, gen.uniform(0.05, 0.6));
        const auto base = count(s, c);

        auto moved = s;
        const std::int64_t shift = std::int64_t(gen.integer(1, 50)) * kTau;
        for (auto& e : moved.events) e.timestamp_ps += shift;
        const auto m = count(moved, c);
        CHECK(m.s_i1 == base.s_i1);
        CHECK(m.s_i2 == base.s_i2);
        CHECK(m.i1_i2 == base.i1_i2);
        CHECK(m.s_i1_i2 == base.s_i1_i2);
        CHECK(m.shifted == base.shifted);

        auto shuffled = s;
        std::shuffle(shuffled.events.begin(), shuffled.events.end(), gen.engine());
        const auto r = count(shuffled, c);
        CHECK(r.s_i1 == base.s_i1);
        CHECK(r.s_i1_i2 == base.s_i1_i2);
        CHECK(r.shifted == base.shifted);

        auto swapped = s;
        for (auto& e : swapped.events)
            if (e.channel != Channel::Signal)
                e.channel = e.channel == Channel::Idler1 ? Channel::Idler2 : Channel::Idler1;
        const auto w = count(swapped, c);
        CHECK(w.s_i1 == base.s_i2);
        CHECK(w.s_i2 == base.s_i1);
        CHECK(w.singles[1] == base.singles[2]);
        CHECK(w.s_i1_i2 == base.s_i1_i2);
        CHECK(w.i1_i2 == base.i1_i2);
    }
}

TEST_CASE("shifted coincidences pair signals with idlers from earlier pulses") {
    const auto c = config(1000);
    const auto s = stream_of({{kTau, Channel::Signal}, {0, Channel::Idler1}, {2 * kTau, Channel::Signal},
                              {0, Channel::Idler2}});
    const auto r = count(s, c);
    CHECK(r.s_i() == 0);
    CHECK(r.shifted.at(1) == 2);
    CHECK(r.shifted.at(2) == 2);
}

TEST_CASE("uncorrelated clicks give a coincidence-to-accidental ratio near one") {
    test::Gen gen(3);
    const auto s = uncorrelated(gen, 200000, 0.2);
    const auto summary = count(s, config(1000));
    for (int m : {1, 2}) {
        const auto car = car_rep(summary, m);
        CHECK(!car.infinite());
        const double sigma = std::sqrt(1.0 / double(car.coincidences) + 1.0 / double(car.accidentals));
        CHECK(std::abs(car.value - 1.0) < 4.0 * sigma);
    }
}

TEST_CASE("CAR without accidentals is infinite") {
    const auto s = stream_of({{0, Channel::Signal}, {0, Channel::Idler1}});
    const auto car = car_rep(count(s, config()), 1);
    CHECK(car.infinite());
    CHECK(car.value == std::numeric_limits<double>::infinity());
    CHECK(car.coincidences == 1);
}

TEST_CASE("heralding efficiency estimator") {
    const auto c = summary_with(1000, 300, 300, 40, 60, 1);
    CHECK(heralding_efficiency(c, 0.5) == doctest::Approx(100.0 / (1000.0 * 0.5)));
    const auto doubled = summary_with(1000, 300, 300, 80, 120, 1);
    CHECK(heralding_efficiency(doubled, 0.5) == doctest::Approx(2.0 * heralding_efficiency(c, 0.5)));
    CHECK(heralding_efficiency(c, 0.25) == doctest::Approx(2.0 * heralding_efficiency(c, 0.5)));
    CHECK_THROWS_AS(heralding_efficiency(c, 0.0), UndefinedMetricError);
    CHECK_THROWS_AS(heralding_efficiency(c, 1.5), UndefinedMetricError);
    CHECK_THROWS_AS(heralding_efficiency(summary_with(0, 1, 1, 0, 0, 0), 0.5), UndefinedMetricError);
}

TEST_CASE("heralded g2 estimator") {
    CHECK(heralded_g2(summary_with(1000, 300, 300, 40, 60, 0)) == 0.0);
    CHECK(heralded_g2(summary_with(1000, 300, 300, 40, 60, 2)) == doctest::Approx(4.0 * 1000 * 2 / 1e4));
    CHECK_THROWS_AS(heralded_g2(summary_with(1000, 300, 300, 0, 0, 0)), UndefinedMetricError);
}

TEST_CASE("Klyshko inference recovers ideal rates and is symmetric") {
    const double R = 1e6, es = 0.3, ei = 0.1;
    const auto c = summary_with(std::uint64_t(2 * es * R), std::uint64_t(2 * ei * R * 0.4),
                                std::uint64_t(2 * ei * R * 0.6), std::uint64_t(2 * es * ei * R * 0.4),
                                std::uint64_t(2 * es * ei * R * 0.6), 0);
    const auto k = klyshko_infer(c);
    CHECK(k.signal_path == doctest::Approx(es));
    CHECK(k.idler_path == doctest::Approx(ei));
    CHECK(k.pair_rate_hz == doctest::Approx(R));

    const auto swapped = summary_with(c.singles[1] + c.singles[2], c.singles[0], 0, c.s_i(), 0, 0);
    const auto ks = klyshko_infer(swapped);
    CHECK(ks.signal_path == doctest::Approx(k.idler_path));
    CHECK(ks.idler_path == doctest::Approx(k.signal_path));
    CHECK(ks.pair_rate_hz == doctest::Approx(k.pair_rate_hz));
    CHECK_THROWS_AS(klyshko_infer(summary_with(10, 10, 10, 0, 0, 0)), UndefinedMetricError);
}

TEST_CASE("simulated coincidences match the analytic joint probabilities") {
    SourceModel src;
    src.mean_pairs_per_pulse = 0.2;
    src.repetition_rate_hz = 1e12 / double(kTau);
    src.pulse_jitter_ps = 50.0;
    ChannelModel ch;
    ch.signal_transmission = 0.4;
    ch.idler_transmission = 0.3;
    ch.dark_count_prob = {1e-3, 1e-3, 1e-3};
    ch.gate_width_ps = 1000.0;
    const std::uint64_t n = 1'000'000;
    const auto stream = simulate_stream(src, ch, n, 2024);
    auto cfg = config(2000);
    const auto summary = count(stream, cfg);
    const auto p = click_probabilities(src, ch);
    auto near = [&](std::uint64_t got, double prob) {
        return std::abs(double(got) - prob * double(n)) <= 4.0 * double(n) * test::binomial_sigma(prob, double(n));
    };
    CHECK(near(summary.singles[0], p.s));
    CHECK(near(summary.s_i1, p.s_i1));
    CHECK(near(summary.s_i2, p.s_i2));
    CHECK(near(summary.i1_i2, p.i1_i2));
    CHECK(near(summary.s_i1_i2, p.s_i1_i2));
    CHECK(summary.duration_s == doctest::Approx(n * 1e-7));
}

TEST_CASE("duration falls back from config to header to the last timestamp") {
    auto s = stream_of({{0, Channel::Signal}, {5 * kTau / 2, Channel::Idler1}}, 0.0);
    auto c = config();
    CHECK(count(s, c).duration_s == doctest::Approx(3.0 * kTau * 1e-12));
    s.header.duration_s = 4.0;
    CHECK(count(s, c).duration_s == 4.0);
    c.duration_s = 7.0;
    CHECK(count(s, c).duration_s == 7.0);
    const auto empty = count(stream_of({}, 0.0), config());
    CHECK(empty.empty_stream);
}

TEST_CASE("coincidence configuration is validated") {
    auto c = config();
    c.window_ps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config();
    c.repetition_time_ps = c.window_ps;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config();
    c.shifts = {0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = config();
    c.duration_s = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(count(stream_of({}), c), ConfigError);
}
