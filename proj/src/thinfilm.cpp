#include "hsps/thinfilm.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "hsps/detail/text.hpp"

namespace hsps {

void FilterStack::validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const double t = layers[i].thickness_nm;
        if (!(t >= 0.0) || !(t < kMaxLayerThicknessNm))
            throw DomainError("layer " + std::to_string(i + 1) + " thickness " + std::to_string(t) +
                              " nm outside [0, 10000) nm");
    }
}

FilterStack FilterStack::reversed() const {
    FilterStack out;
    out.incident = exit;
    out.exit = incident;
    out.layers.assign(layers.rbegin(), layers.rend());
    out.design_reference_nm = design_reference_nm;
    return out;
}

TransmissionPoint stack_transmission(const FilterStack& stack, double wavelength_nm) {
    using C = std::complex<double>;
    if (!(wavelength_nm > 0.0)) throw DomainError("wavelength must be positive");
    stack.validate();
    const double wl_um = wavelength_nm * 1e-3;
    const double n0 = stack.incident.at(wl_um);
    const double ns = stack.exit.at(wl_um);

    CharacteristicMatrix<double> total = CharacteristicMatrix<double>::Identity();
    for (const auto& layer : stack.layers)
        total = total * characteristic_matrix(layer.material.at(wl_um), layer.thickness_nm,
                                              wavelength_nm);

    const Eigen::Vector2cd bc = total * Eigen::Vector2cd(C(1.0, 0.0), C(ns, 0.0));
    const C denom = n0 * bc(0) + bc(1);
    const C r = (n0 * bc(0) - bc(1)) / denom;
    const C t = 2.0 * n0 / denom;
    return {ns / n0 * std::norm(t), std::norm(r)};
}

TransmissionSpectrum spectrum(const FilterStack& stack, const Eigen::VectorXd& grid_nm) {
    TransmissionSpectrum out;
    out.wavelength_nm = grid_nm;
    out.transmittance.resize(grid_nm.size());
    out.reflectance.resize(grid_nm.size());
    for (Eigen::Index i = 0; i < grid_nm.size(); ++i) {
        const auto p = stack_transmission(stack, grid_nm[i]);
        out.transmittance[i] = p.transmittance;
        out.reflectance[i] = p.reflectance;
    }
    return out;
}

double interface_transmittance(double n1, double n2) {
    return 4.0 * n1 * n2 / ((n1 + n2) * (n1 + n2));
}

TransmissionSpectrum convert_substrate(const TransmissionSpectrum& measured,
                                       const InterfaceConfig& measurement,
                                       const InterfaceConfig& target) {
    TransmissionSpectrum out = measured;
    for (Eigen::Index i = 0; i < measured.wavelength_nm.size(); ++i) {
        const double wl_um = measured.wavelength_nm[i] * 1e-3;
        const double env_meas =
            interface_transmittance(measurement.incident.at(wl_um), measurement.exit.at(wl_um));
        const double env_target =
            interface_transmittance(target.incident.at(wl_um), target.exit.at(wl_um));
        if (env_meas < 1e-6)
            throw NumericalDegeneracyError("measurement envelope " + std::to_string(env_meas) +
                                           " too small at " +
                                           std::to_string(measured.wavelength_nm[i]) + " nm");
        const double t = std::clamp(measured.transmittance[i] * env_target / env_meas, 0.0, 1.0);
        out.transmittance[i] = t;
        out.reflectance[i] = 1.0 - t;
    }
    return out;
}

FilterStack parse_stack(std::istream& in, const MaterialLibrary& library,
                        const std::string& origin) {
    FilterStack stack;
    bool have_incident = false, have_exit = false;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.starts_with("#@")) {
            view = detail::trim(view.substr(2));
            const auto colon = view.find(':');
            if (colon == std::string_view::npos) fail("header directive needs 'key: value'");
            const std::string key(detail::trim(view.substr(0, colon)));
            const std::string value(detail::trim(view.substr(colon + 1)));
            if (key == "incident") {
                stack.incident = library.resolve(value);
                have_incident = true;
            } else if (key == "exit") {
                stack.exit = library.resolve(value);
                have_exit = true;
            } else if (key == "reference_nm") {
                auto v = detail::parse_double(value);
                if (!v || *v <= 0.0) fail("reference_nm must be a positive number");
                stack.design_reference_nm = *v;
            } else if (key != "note") {
                fail("unknown header directive '" + key + "'");
            }
            continue;
        }
        view = detail::trim(detail::strip_comment(view));
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view);
        auto t = fields.size() == 2 ? detail::parse_double(fields[1]) : std::nullopt;
        if (!t) fail("expected 'material thickness_nm'");
        if (!(*t > 0.0) || *t >= kMaxLayerThicknessNm)
            fail("layer thickness must lie in (0, 10000) nm");
        try {
            stack.layers.push_back({library.resolve(fields[0]), *t});
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    if (!have_incident || !have_exit)
        throw ConfigError(origin + ": stack file needs '#@ incident:' and '#@ exit:' headers");
    return stack;
}

FilterStack load_stack(const std::filesystem::path& path, const MaterialLibrary& library) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stack file '" + path.string() + "'");
    return parse_stack(in, library, path.string());
}

void write_stack(std::ostream& out, const FilterStack& stack) {
    out << "#@ incident: " << stack.incident.name() << '\n';
    out << "#@ exit: " << stack.exit.name() << '\n';
    if (stack.design_reference_nm) out << "#@ reference_nm: " << *stack.design_reference_nm << '\n';
    out << std::fixed << std::setprecision(3);
    for (const auto& layer : stack.layers)
        out << layer.material.name() << ' ' << layer.thickness_nm << '\n';
    out.unsetf(std::ios::floatfield);
}

}  // namespace hsps
