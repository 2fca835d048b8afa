#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hsps/beamoptics.hpp"
#include "support.hpp"

using namespace hsps;

namespace {

// Brute-force overlap |<a|b>|^2 / (<a|a><b|b>) of the two field profiles on a
// 400 x 400 grid.
double numeric_overlap(const Mode& a, const Mode& b) {
    const int n = 400;
    const double wax = a.mfd_x_um / 2, way = a.mfd_y_um / 2;
    const double wbx = b.mfd_x_um / 2, wby = b.mfd_y_um / 2;
    const double hx = 4.0 * std::max(wax, wbx), hy = 4.0 * std::max(way, wby);
    const double dx = 2 * hx / (n - 1), dy = 2 * hy / (n - 1);
    double ab = 0, aa = 0, bb = 0;
    for (int i = 0; i < n; ++i) {
        const double x = -hx + i * dx;
        for (int j = 0; j < n; ++j) {
            const double y = -hy + j * dy;
            const double ea = std::exp(-(x * x) / (wax * wax) - (y * y) / (way * way));
            const double eb = std::exp(-(x * x) / (wbx * wbx) - (y * y) / (wby * wby));
            ab += ea * eb;
            aa += ea * ea;
            bb += eb * eb;
        }
    }
    return ab * ab / (aa * bb);
}

}  // namespace

TEST_CASE("mode overlap against the waveguide mode table") {
    const Mode ln_1550{8.9, 6.8}, pb_1550 = Mode::circular(6.4);
    const Mode ln_810{5.7, 3.9}, pb_810 = Mode::circular(3.4);
    CHECK(overlap_efficiency(ln_1550, pb_1550) == doctest::Approx(0.946251).epsilon(1e-5));
    CHECK(overlap_efficiency(ln_810, pb_810) == doctest::Approx(0.871692).epsilon(1e-5));
}

TEST_CASE("closed-form overlap matches brute-force integration") {
    test::Gen gen(2718);
    for (int i = 0; i < 50; ++i) {
        const Mode a{gen.uniform(2.0, 12.0), gen.uniform(2.0, 12.0)};
        const Mode b{gen.uniform(2.0, 12.0), gen.uniform(2.0, 12.0)};
        CAPTURE(a.mfd_x_um);
        CAPTURE(b.mfd_x_um);
        CHECK(std::abs(overlap_efficiency(a, b) - numeric_overlap(a, b)) < 1e-4);
    }
}

TEST_CASE("overlap is symmetric, scale invariant and maximal for identical modes") {
    test::Gen gen(11);
    for (int i = 0; i < 200; ++i) {
        const Mode a{gen.uniform(1.0, 15.0), gen.uniform(1.0, 15.0)};
        const Mode b{gen.uniform(1.0, 15.0), gen.uniform(1.0, 15.0)};
        const double s = gen.uniform(0.1, 10.0);
        const double eta = overlap_efficiency(a, b);
        CHECK(eta > 0.0);
        CHECK(eta <= 1.0);
        CHECK(overlap_efficiency(b, a) == doctest::Approx(eta).epsilon(1e-14));
        CHECK(overlap_efficiency(Mode{a.mfd_x_um * s, a.mfd_y_um * s},
                                 Mode{b.mfd_x_um * s, b.mfd_y_um * s}) ==
              doctest::Approx(eta).epsilon(1e-12));
        CHECK(overlap_efficiency(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("templated scalar works in single precision") {
    const GaussianMode<float> a{8.9f, 6.8f}, b = GaussianMode<float>::circular(6.4f);
    CHECK(overlap_efficiency(a, b) == doctest::Approx(0.946251).epsilon(1e-5));
}

TEST_CASE("invalid modes are rejected") {
    CHECK_THROWS_AS(overlap_efficiency(Mode{0.0, 1.0}, Mode::circular(1.0)), DomainError);
    CHECK_THROWS_AS(overlap_efficiency(Mode{1.0, -2.0}, Mode::circular(1.0)), DomainError);
}

TEST_CASE("decibel conversion") {
    CHECK(efficiency_to_db(0.015) == doctest::Approx(18.2391).epsilon(1e-5));
    CHECK(efficiency_to_db(1.0) == 0.0);
    CHECK(db_to_efficiency(3.0) == doctest::Approx(0.501187).epsilon(1e-6));
    CHECK_THROWS_AS(efficiency_to_db(0.0), DomainError);
    CHECK_THROWS_AS(efficiency_to_db(1.2), DomainError);
    CHECK_THROWS_AS(db_to_efficiency(-1.0), DomainError);
    test::Gen gen(5);
    for (int i = 0; i < 100; ++i) {
        const double eta = gen.uniform(1e-6, 1.0);
        CHECK(db_to_efficiency(efficiency_to_db(eta)) == doctest::Approx(eta).epsilon(1e-12));
    }
}

TEST_CASE("budgets add in decibels and multiply in transmission") {
    LossBudget b;
    b.add("a", 1.0);
    b.add("b", 2.5);
    CHECK(b.total_db() == doctest::Approx(3.5));
    CHECK(b.transmission() == doctest::Approx(db_to_efficiency(1.0) * db_to_efficiency(2.5)));
    CHECK_THROWS_AS(b.add("gain", -0.5), DomainError);
}

TEST_CASE("budget file parsing") {
    std::istringstream in("#@ wavelength: 1550 nm\n# comment\ncoupling 0.22  # inline\nfilter 1\n\n");
    const auto b = parse_budget(in, "mem");
    CHECK(b.wavelength_tag == "1550 nm");
    REQUIRE(b.entries.size() == 2);
    CHECK(b.entries[0].label == "coupling");
    CHECK(b.total_db() == doctest::Approx(1.22));

    std::istringstream bad("coupling\n");
    CHECK_THROWS_AS(parse_budget(bad, "bad"), ConfigError);
    std::istringstream neg("coupling -1\n");
    CHECK_THROWS_AS(parse_budget(neg, "neg"), ConfigError);
    CHECK_THROWS_AS(load_budget("/nonexistent.budget"), IoError);
}

TEST_CASE("shipped module budgets") {
    const auto idler = load_budget(test::data_dir() / "budgets" / "module_1550.budget");
    const auto signal = load_budget(test::data_dir() / "budgets" / "module_810.budget");
    CHECK(idler.total_db() == doctest::Approx(3.22));
    CHECK(signal.total_db() == doctest::Approx(4.2));
    // The coupling entries are the rounded decibel form of the mode overlaps.
    CHECK(idler.entries.front().loss_db ==
          doctest::Approx(efficiency_to_db(0.95)).epsilon(0.01));
    CHECK(signal.entries.front().loss_db ==
          doctest::Approx(efficiency_to_db(overlap_efficiency(Mode{5.7, 3.9}, Mode::circular(3.4))))
              .epsilon(0.01));
}
