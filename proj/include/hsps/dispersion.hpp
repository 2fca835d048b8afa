#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Core>

#include "hsps/error.hpp"

namespace hsps {

struct Interval {
    double min = 0.0;
    double max = 0.0;
    bool contains(double x) const { return x >= min && x <= max; }
};

// Functional forms understood by SellmeierModel.
//
//   Jundt:     n^2 = a1 + b1 f + (a2 + b2 f) / (l^2 - (a3 + b3 f)^2)
//                    + (a4 + b4 f) / (l^2 - a5^2) - a6 l^2,
//              f = (T - 24.5)(T + 570.82), l in um, T in degC.
//   ThreeTerm: n^2 = 1 + sum_i B_i l^2 / (l^2 - C_i), C_i in um^2,
//              temperature independent.
enum class SellmeierForm { Jundt, ThreeTerm };

struct SellmeierModel {
    std::string name;
    std::string source;
    SellmeierForm form = SellmeierForm::Jundt;
    std::map<std::string, double> coefficients;
    Interval wavelength_um;
    Interval temperature_c;

    // Packed copy of `coefficients` in form order, filled by finalize().
    std::array<double, 10> packed{};

    // Resolves named coefficients into `packed`; throws ConfigError when a
    // coefficient required by the form is missing or an unknown one is present.
    void finalize();
};

// Squared index of a Sellmeier model. Templated on the scalar so the same
// expression can be evaluated with automatic-differentiation scalars.
template <class Scalar>
Scalar sellmeier_index_squared(const SellmeierModel& model, const Scalar& wavelength_um,
                               const Scalar& temperature_c) {
    const auto& c = model.packed;
    const Scalar l2 = wavelength_um * wavelength_um;
    if (model.form == SellmeierForm::Jundt) {
        const Scalar f = (temperature_c - 24.5) * (temperature_c + 570.82);
        const Scalar pole = c[2] + c[8] * f;
        return c[0] + c[6] * f + (c[1] + c[7] * f) / (l2 - pole * pole) +
               (c[3] + c[9] * f) / (l2 - c[4] * c[4]) - c[5] * l2;
    }
    Scalar n2 = Scalar(1.0);
    for (int i = 0; i < 3; ++i) n2 += c[i] * l2 / (l2 - c[3 + i]);
    return n2;
}

// n_e(wavelength, temperature). Throws RangeError naming the violated bound.
double refractive_index(const SellmeierModel& model, double wavelength_um, double temperature_c);

inline constexpr double kGroupIndexStepUm = 1e-4;

// n_g = n - l dn/dl from a central difference with step kGroupIndexStepUm.
double group_index(const SellmeierModel& model, double wavelength_um, double temperature_c);

struct ConstantIndex {
    double n = 1.0;
};

// Sellmeier model frozen at one temperature.
struct SellmeierAtTemperature {
    SellmeierModel model;
    double temperature_c = 25.0;
};

// Tabulated (wavelength_um, n) with piecewise-linear interpolation.
struct IndexTable {
    Eigen::VectorXd wavelength_um;
    Eigen::VectorXd index;
};

class MaterialIndex {
public:
    using Source = std::variant<ConstantIndex, SellmeierAtTemperature, IndexTable>;

    MaterialIndex() : name_("vacuum"), source_(ConstantIndex{1.0}) {}
    MaterialIndex(std::string name, Source source);

    static MaterialIndex constant(double n);

    const std::string& name() const { return name_; }
    const Source& source() const { return source_; }
    bool is_constant() const { return std::holds_alternative<ConstantIndex>(source_); }

    // Index at a vacuum wavelength in um.
    double at(double wavelength_um) const;

private:
    std::string name_;
    Source source_;
};

SellmeierModel parse_sellmeier(std::istream& in, const std::string& origin);
SellmeierModel load_sellmeier(const std::filesystem::path& path);

IndexTable parse_index_table(std::istream& in, const std::string& origin);
IndexTable load_index_table(const std::filesystem::path& path);

// Named materials: every `*.sellmeier` and `*.nk` file in a directory, keyed by
// file stem, plus `air` (n = 1) and numeric literals such as `1.45`.
class MaterialLibrary {
public:
    MaterialLibrary();

    static MaterialLibrary from_directory(const std::filesystem::path& dir,
                                          double temperature_c = 25.0);

    void add(const MaterialIndex& material);
    bool contains(std::string_view name) const;
    MaterialIndex resolve(std::string_view name) const;

private:
    std::map<std::string, MaterialIndex, std::less<>> materials_;
};

}  // namespace hsps
