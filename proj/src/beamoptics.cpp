#include "hsps/beamoptics.hpp"

#include <cmath>
#include <fstream>

#include "hsps/detail/text.hpp"

namespace hsps {

double efficiency_to_db(double efficiency) {
    if (!(efficiency > 0.0) || efficiency > 1.0)
        throw DomainError("efficiency must lie in (0, 1], got " + std::to_string(efficiency));
    return -10.0 * std::log10(efficiency);
}

double db_to_efficiency(double loss_db) {
    if (!(loss_db >= 0.0)) throw DomainError("loss must be >= 0 dB, got " + std::to_string(loss_db));
    return std::pow(10.0, -loss_db / 10.0);
}

void LossBudget::add(std::string label, double loss_db) {
    if (!(loss_db >= 0.0))
        throw DomainError("loss entry '" + label + "' must be >= 0 dB");
    entries.push_back({std::move(label), loss_db});
}

double LossBudget::total_db() const {
    double total = 0.0;
    for (const auto& e : entries) total += e.loss_db;
    return total;
}

double LossBudget::transmission() const { return std::pow(10.0, -total_db() / 10.0); }

LossBudget parse_budget(std::istream& in, const std::string& origin) {
    LossBudget budget;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.starts_with("#@")) {
            view = detail::trim(view.substr(2));
            if (view.starts_with("wavelength:"))
                budget.wavelength_tag = std::string(detail::trim(view.substr(11)));
            continue;
        }
        view = detail::trim(detail::strip_comment(view));
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view);
        auto value = fields.size() == 2 ? detail::parse_double(fields[1]) : std::nullopt;
        if (!value)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'label loss_dB'");
        if (*value < 0.0)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": loss of '" + fields[0] +
                              "' must be >= 0 dB");
        budget.add(fields[0], *value);
    }
    return budget;
}

LossBudget load_budget(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open budget file '" + path.string() + "'");
    auto budget = parse_budget(in, path.string());
    if (budget.wavelength_tag.empty()) budget.wavelength_tag = path.stem().string();
    return budget;
}

}  // namespace hsps
