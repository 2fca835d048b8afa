#pragma once

#include <complex>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hsps/dispersion.hpp"

namespace hsps {

struct Layer {
    MaterialIndex material;
    double thickness_nm = 0.0;
};

inline constexpr double kMaxLayerThicknessNm = 10000.0;

// Dielectric layers between two semi-infinite media, listed from the
// incident side.
struct FilterStack {
    MaterialIndex incident;
    MaterialIndex exit;
    std::vector<Layer> layers;
    std::optional<double> design_reference_nm;

    void validate() const;
    FilterStack reversed() const;
};

struct TransmissionPoint {
    double transmittance = 0.0;
    double reflectance = 0.0;
};

struct TransmissionSpectrum {
    Eigen::VectorXd wavelength_nm;
    Eigen::VectorXd transmittance;
    Eigen::VectorXd reflectance;
};

template <class Scalar>
using CharacteristicMatrix = Eigen::Matrix<std::complex<Scalar>, 2, 2>;

// Characteristic matrix of one homogeneous layer at normal incidence:
//   [[cos d, i sin d / n], [i n sin d, cos d]],  d = 2 pi n t / l.
template <class Scalar>
CharacteristicMatrix<Scalar> characteristic_matrix(Scalar index, Scalar thickness,
                                                   Scalar wavelength) {
    using C = std::complex<Scalar>;
    const Scalar phase = Scalar(2) * std::numbers::pi_v<Scalar> * index * thickness / wavelength;
    const Scalar c = std::cos(phase);
    const Scalar s = std::sin(phase);
    CharacteristicMatrix<Scalar> m;
    m << C(c, 0), C(0, s / index), C(0, index * s), C(c, 0);
    return m;
}

// Power transmittance and reflectance of a lossless stack at normal
// incidence. Throws RangeError when a material is undefined at the wavelength.
TransmissionPoint stack_transmission(const FilterStack& stack, double wavelength_nm);

TransmissionSpectrum spectrum(const FilterStack& stack, const Eigen::VectorXd& grid_nm);

// Fresnel transmittance of a bare interface between two media.
double interface_transmittance(double n1, double n2);

struct InterfaceConfig {
    MaterialIndex incident;
    MaterialIndex exit;
};

// First-order substrate conversion: T_target = T_meas * E_target / E_meas with
// E the incoherent single-interface envelope 4 n1 n2 / (n1 + n2)^2. T is
// clipped to [0, 1] and R = 1 - T.
TransmissionSpectrum convert_substrate(const TransmissionSpectrum& measured,
                                       const InterfaceConfig& measurement,
                                       const InterfaceConfig& target);

// Stack files: `#@ incident:`, `#@ exit:` and optional `#@ reference_nm:`
// headers, then one `material thickness_nm` per line.
FilterStack parse_stack(std::istream& in, const MaterialLibrary& library,
                        const std::string& origin);
FilterStack load_stack(const std::filesystem::path& path, const MaterialLibrary& library);
void write_stack(std::ostream& out, const FilterStack& stack);

}  // namespace hsps
