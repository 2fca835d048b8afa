#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsps/error.hpp"

namespace hsps {

// Elliptical Gaussian mode described by its 1/e^2 intensity mode-field diameters.
template <class Scalar = double>
struct GaussianMode {
    Scalar mfd_x_um{};
    Scalar mfd_y_um{};

    static GaussianMode circular(Scalar mfd_um) { return {mfd_um, mfd_um}; }

    void validate() const {
        if (!(mfd_x_um > Scalar(0)) || !(mfd_y_um > Scalar(0)))
            throw DomainError("mode-field diameters must be positive");
    }
};

using Mode = GaussianMode<double>;

// Power coupling of two aligned, centered elliptical Gaussian modes:
//   eta = 4 / ((wax/wbx + wbx/wax) (way/wby + wby/way)).
// Only diameter ratios enter, so MFDs can be used in place of waists.
template <class Scalar>
Scalar overlap_efficiency(const GaussianMode<Scalar>& a, const GaussianMode<Scalar>& b) {
    a.validate();
    b.validate();
    const Scalar rx = a.mfd_x_um / b.mfd_x_um;
    const Scalar ry = a.mfd_y_um / b.mfd_y_um;
    return Scalar(4) / ((rx + Scalar(1) / rx) * (ry + Scalar(1) / ry));
}

double efficiency_to_db(double efficiency);
double db_to_efficiency(double loss_db);

struct LossEntry {
    std::string label;
    double loss_db = 0.0;
};

struct LossBudget {
    std::string wavelength_tag;
    std::vector<LossEntry> entries;

    void add(std::string label, double loss_db);
    double total_db() const;
    double transmission() const;
};

// One `label loss_dB` pair per line; `#` starts a comment. A `#@ wavelength:`
// header line sets the wavelength tag.
LossBudget parse_budget(std::istream& in, const std::string& origin);
LossBudget load_budget(const std::filesystem::path& path);

}  // namespace hsps
