#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hsps/error.hpp"
#include "hsps/sweep.hpp"

using namespace hsps;

namespace {

ChannelModel channel() {
    ChannelModel c;
    c.signal_transmission = 0.5;
    c.idler_transmission = 0.4;
    c.splitter_ratio = 0.3;
    c.detector_efficiency = {0.7, 0.8, 0.6};
    c.dark_count_prob = {1e-4, 1e-4, 1e-4};
    return c;
}

}  // namespace

TEST_CASE("each sweep point equals a single simulate-and-analyze run") {
    SourceModel src;
    src.pulse_jitter_ps = 20.0;
    const std::vector<double> mu{0.01, 0.1, 0.4};
    const auto points = points_from_mu(mu, 200000);
    CoincidenceConfig cfg;
    const auto rows = power_sweep(src, channel(), points, 555, cfg);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        SourceModel s = src;
        s.mean_pairs_per_pulse = mu[i];
        const auto seed = derive_seed(555, i);
        const auto single = analyze_point(points[i], seed, simulate_stream(s, channel(), 200000, seed), channel(), cfg);
        CHECK(rows[i].seed == seed);
        CHECK(rows[i].summary.singles == single.summary.singles);
        CHECK(rows[i].summary.s_i() == single.summary.s_i());
        CHECK(rows[i].summary.shifted == single.summary.shifted);
        CHECK(rows[i].heralding_efficiency == single.heralding_efficiency);
        CHECK(rows[i].heralded_g2 == single.heralded_g2);
    }
}

TEST_CASE("powers map to mean pair numbers through kappa") {
    const std::vector<double> powers{0.0, 1.5, 3.0};
    const auto pts = points_from_powers(powers, 0.02, 10);
    REQUIRE(pts.size() == 3);
    CHECK(pts[1].mu == doctest::Approx(0.03));
    CHECK(*pts[2].power == 3.0);
    CHECK(pts[0].n_pulses == 10);
    CHECK_THROWS_AS(points_from_powers(powers, 0.0, 10), ConfigError);
    const std::vector<double> negative{-1.0};
    CHECK_THROWS_AS(points_from_powers(negative, 0.1, 10), ConfigError);
}

TEST_CASE("effective idler detector efficiency weights the ports by the splitter") {
    CHECK(effective_idler_detector_efficiency(channel()) == doctest::Approx(0.3 * 0.8 + 0.7 * 0.6));
}

TEST_CASE("undefined metrics become NaN in the table") {
    SourceModel src;
    const std::vector<double> mu{0.0};
    const auto points = points_from_mu(mu, 1000);
    CoincidenceConfig cfg;
    const auto rows = power_sweep(src, ChannelModel{}, points, 1, cfg);
    CHECK(std::isnan(rows[0].heralding_efficiency));
    CHECK(std::isnan(rows[0].heralded_g2));
    std::ostringstream out;
    write_sweep_csv(out, rows, cfg);
    CHECK(out.str().find("power,mu,n_pulses,seed,R_s_hz") == 0);
    CHECK(out.str().find("car_rep_1,car_rep_2") != std::string::npos);
    CHECK(out.str().find("nan") != std::string::npos);
}
