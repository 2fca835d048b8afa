#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hsps/dispersion.hpp"
#include "support.hpp"

using namespace hsps;

namespace {

const SellmeierModel& linbo3() {
    static const SellmeierModel m = load_sellmeier(test::materials_dir() / "LiNbO3_e.sellmeier");
    return m;
}

// Forward-mode dual number, enough for the Sellmeier expression.
struct Dual {
    double v = 0.0;
    double d = 0.0;
    Dual(double value = 0.0, double deriv = 0.0) : v(value), d(deriv) {}
};
Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
Dual& operator+=(Dual& a, Dual b) { return a = a + b; }

// dn/dl from the exact derivative of n^2.
double analytic_dn_dl(const SellmeierModel& m, double l, double t) {
    const Dual n2 = sellmeier_index_squared<Dual>(m, Dual(l, 1.0), Dual(t, 0.0));
    return n2.d / (2.0 * std::sqrt(n2.v));
}

}  // namespace

TEST_CASE("congruent LiNbO3 extraordinary index matches high-precision reference values") {
    const auto& m = linbo3();
    CHECK(refractive_index(m, 0.810, 25.0) == doctest::Approx(2.1747080731775722).epsilon(1e-13));
    CHECK(refractive_index(m, 0.532, 25.0) == doctest::Approx(2.2342371819002949).epsilon(1e-13));
    CHECK(refractive_index(m, 1.550, 25.0) == doctest::Approx(2.1378801256208528).epsilon(1e-13));
}

TEST_CASE("index rises with temperature by the reference amounts") {
    const auto& m = linbo3();
    auto dn = [&](double l) { return refractive_index(m, l, 80.0) - refractive_index(m, l, 25.0); };
    CHECK(dn(0.532) == doctest::Approx(0.00328804444).epsilon(1e-8));
    CHECK(dn(0.810) == doctest::Approx(0.002613750615).epsilon(1e-8));
    CHECK(dn(1.550) == doctest::Approx(0.0022525069).epsilon(1e-7));
}

TEST_CASE("group index from central differences") {
    const auto& m = linbo3();
    CHECK(group_index(m, 0.810, 25.0) == doctest::Approx(2.2617730322611361).epsilon(1e-9));
    CHECK(group_index(m, 1.550, 25.0) == doctest::Approx(2.1824261694014838).epsilon(1e-9));
}

TEST_CASE("numeric dispersion agrees with the exact derivative across the valid domain") {
    test::Gen gen(0x5e11);
    const auto& m = linbo3();
    for (int i = 0; i < 200; ++i) {
        const double l = gen.uniform(0.45, 4.5);
        const double t = gen.uniform(20.0, 250.0);
        const double n = refractive_index(m, l, t);
        const double exact = n - l * analytic_dn_dl(m, l, t);
        CAPTURE(l);
        CAPTURE(t);
        CHECK(std::abs(group_index(m, l, t) - exact) / exact < 1e-6);
    }
}

TEST_CASE("normal dispersion: index decreases with wavelength in the visible and near infrared") {
    test::Gen gen(77);
    const auto& m = linbo3();
    for (int i = 0; i < 100; ++i) {
        const double l = gen.uniform(0.4, 3.0);
        const double t = gen.uniform(20.0, 250.0);
        CHECK(analytic_dn_dl(m, l, t) < 0.0);
        CHECK(group_index(m, l, t) > refractive_index(m, l, t));
    }
}

TEST_CASE("out-of-range queries name the violated bound") {
    const auto& m = linbo3();
    try {
        refractive_index(m, 0.3, 25.0);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("below minimum 0.4") != std::string::npos);
    }
    try {
        refractive_index(m, 1.0, 300.0);
        FAIL("expected RangeError");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("above maximum 250") != std::string::npos);
    }
    CHECK_THROWS_AS(refractive_index(m, 5.5, 25.0), RangeError);
    CHECK_THROWS_AS(refractive_index(m, std::nan(""), 25.0), RangeError);
    CHECK_THROWS_AS(group_index(m, 0.4, 25.0), RangeError);
    CHECK_NOTHROW(refractive_index(m, 0.4, 20.0));
}

TEST_CASE("fused silica three-term model") {
    const auto m = load_sellmeier(test::materials_dir() / "SiO2.sellmeier");
    CHECK(m.form == SellmeierForm::ThreeTerm);
    CHECK(refractive_index(m, 0.5876, 25.0) == doctest::Approx(1.4585).epsilon(1e-4));
    CHECK(refractive_index(m, 1.55, 25.0) == doctest::Approx(1.4440).epsilon(1e-4));
    CHECK(refractive_index(m, 1.55, 25.0) == refractive_index(m, 1.55, 150.0));
}

TEST_CASE("Sellmeier file parsing is strict") {
    const std::string header =
        "#@ name: test\n#@ form: three_term\n#@ wavelength_um: 0.3 2.0\n#@ temperature_c: 0 100\n";
    {
        std::istringstream in(header + "B1 1\nB2 0\nB3 0\nC1 0.01\nC2 0.02\nC3 100\n");
        const auto m = parse_sellmeier(in, "ok");
        CHECK(refractive_index(m, 1.0, 25.0) == doctest::Approx(std::sqrt(1.0 + 1.0 / (1.0 - 0.01))));
    }
    {
        std::istringstream in(header + "B1 1\nB2 0\nB3 0\nC1 0.01\nC2 0.02\n");
        CHECK_THROWS_AS(parse_sellmeier(in, "missing"), ConfigError);
    }
    {
        std::istringstream in(header + "B1 1\nB2 0\nB3 0\nC1 0.01\nC2 0.02\nC3 100\nB4 2\n");
        CHECK_THROWS_AS(parse_sellmeier(in, "unknown"), ConfigError);
    }
    {
        std::istringstream in("#@ form: three_term\nB1 1\n");
        CHECK_THROWS_AS(parse_sellmeier(in, "no range"), ConfigError);
    }
}

TEST_CASE("tabulated materials interpolate linearly and refuse extrapolation") {
    std::istringstream in("# wl n\n0.4 2.0\n0.6 1.8\n1.0 1.6\n");
    const auto table = parse_index_table(in, "t");
    const MaterialIndex mat("t", table);
    CHECK(mat.at(0.5) == doctest::Approx(1.9));
    CHECK(mat.at(0.8) == doctest::Approx(1.7));
    CHECK(mat.at(1.0) == doctest::Approx(1.6));
    CHECK_THROWS_AS(mat.at(0.39), RangeError);
    CHECK_THROWS_AS(mat.at(1.01), RangeError);

    std::istringstream bad("0.4 2.0\n0.4 1.9\n");
    CHECK_THROWS_AS(MaterialIndex("bad", parse_index_table(bad, "bad")), ConfigError);
}

TEST_CASE("material library resolves files, air and numeric literals") {
    const auto lib = MaterialLibrary::from_directory(test::materials_dir(), 80.0);
    CHECK(lib.contains("LiNbO3_e"));
    CHECK(lib.contains("TiO2"));
    CHECK(lib.resolve("air").at(1.0) == 1.0);
    CHECK(lib.resolve("1.45").at(0.8) == 1.45);
    CHECK(lib.resolve("PolyBoard").at(0.81) == doctest::Approx(1.45));
    CHECK(lib.resolve("LiNbO3_e").at(0.81) == refractive_index(linbo3(), 0.81, 80.0));
    CHECK(lib.resolve("TiO2").at(0.81) == doctest::Approx(2.178 + 0.0378 / (0.81 * 0.81)).epsilon(1e-3));
    CHECK_THROWS_AS(lib.resolve("unobtainium"), ConfigError);
    CHECK_THROWS_AS(lib.resolve("0.5"), ConfigError);
    CHECK_THROWS_AS(MaterialLibrary::from_directory("/nonexistent/dir"), IoError);
}
