#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include "hsps/cli.hpp"
#include "hsps/detail/text.hpp"
#include "hsps/error.hpp"

namespace hsps::cli {

namespace {

using KeySet = std::set<std::string, std::less<>>;

struct SectionSchema {
    bool repeatable = false;
    KeySet keys;
};

const std::map<std::string, SectionSchema, std::less<>>& schema() {
    static const std::map<std::string, SectionSchema, std::less<>> s{
        {"general", {false, {"output_dir", "seed", "materials_dir"}}},
        {"dispersion", {false, {"model"}}},
        {"qpm",
         {false,
          {"pump_wavelength_um", "poling_period_um", "crystal_length_mm", "temperature_c",
           "temperatures_c", "calibrate_signal_um", "calibration", "target_signal_um",
           "window_min_um", "window_max_um", "scan_points", "pump_fwhm_nm", "spectrum_min_um",
           "spectrum_max_um", "spectrum_points"}}},
        {"combo", {true, {"signal", "idler", "pump", "dn_signal", "dn_idler", "dn_pump", "weight"}}},
        {"coupling",
         {true,
          {"wavelength_nm", "a_label", "a_mfd_x_um", "a_mfd_y_um", "b_label", "b_mfd_x_um",
           "b_mfd_y_um"}}},
        {"budget", {true, {"file"}}},
        {"coating",
         {false,
          {"stack", "temperature_c", "grid_min_nm", "grid_max_nm", "grid_points", "probe_nm",
           "convert_incident", "convert_exit"}}},
        {"optimize",
         {false,
          {"incident", "exit", "temperature_c", "materials", "seed_stack", "seed_layers",
           "reference_nm", "targets", "max_layers", "min_thickness_nm", "max_thickness_nm",
           "max_rounds", "restarts", "perturbation_nm", "output_stack"}}},
        {"source", {false, {"mu", "statistics", "repetition_rate_hz", "pulse_jitter_ps"}}},
        {"channel",
         {false,
          {"signal_transmission", "idler_transmission", "splitter_ratio", "detector_efficiency",
           "dark_count_prob", "background_prob", "gate_width_ps"}}},
        {"simulate", {false, {"n_pulses", "stream", "block_size", "threads"}}},
        {"coincidence",
         {false, {"window_ps", "delays_ps", "repetition_time_ps", "shifts", "matching", "duration_s"}}},
        {"analyze", {false, {"stream", "idler_detector_efficiency"}}},
        {"sweep", {false, {"mu", "powers", "kappa", "n_pulses"}}},
    };
    return s;
}

std::pair<std::string, std::string> split_section(std::string_view full) {
    const auto dot = full.find('.');
    if (dot == std::string_view::npos) return {std::string(full), {}};
    return {std::string(full.substr(0, dot)), std::string(full.substr(dot + 1))};
}

void check_section(std::string_view full, const std::string& origin) {
    const auto [base, name] = split_section(full);
    const auto it = schema().find(base);
    if (it == schema().end())
        throw ConfigError(origin + ": unknown section [" + std::string(full) + "]");
    if (it->second.repeatable && name.empty())
        throw ConfigError(origin + ": section [" + base + "] needs a name, e.g. [" + base + ".x]");
    if (!it->second.repeatable && !name.empty())
        throw ConfigError(origin + ": section [" + base + "] cannot be named");
}

void check_key(std::string_view section, std::string_view key, const std::string& origin) {
    const auto [base, name] = split_section(section);
    const auto& keys = schema().at(base).keys;
    if (!keys.contains(key))
        throw ConfigError(origin + ": unknown key '" + std::string(key) + "' in [" +
                          std::string(section) + "]");
}

}  // namespace

Scenario Scenario::parse(std::istream& in, const std::string& origin,
                         const std::filesystem::path& base_dir) {
    Scenario sc;
    sc.base_dir_ = base_dir;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no);
        const auto view = detail::trim(detail::strip_comment(line));
        if (view.empty()) continue;
        if (view.front() == '[') {
            if (view.back() != ']') throw ConfigError(where + ": malformed section header");
            section = std::string(detail::trim(view.substr(1, view.size() - 2)));
            check_section(section, where);
            if (sc.values_.contains(section))
                throw ConfigError(where + ": duplicate section [" + section + "]");
            sc.section_order_.push_back(section);
            sc.values_[section];
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
        if (section.empty()) throw ConfigError(where + ": key outside of any section");
        const std::string key(detail::trim(view.substr(0, eq)));
        const std::string value(detail::trim(view.substr(eq + 1)));
        check_key(section, key, where);
        if (sc.values_[section].contains(key))
            throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
        sc.insert(section, key, {value, where});
    }
    return sc;
}

Scenario Scenario::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario '" + path.string() + "'");
    return parse(in, path.string(), path.parent_path());
}

void Scenario::insert(const std::string& section, const std::string& key, Entry entry) {
    if (!values_.contains(section)) section_order_.push_back(section);
    values_[section][key] = std::move(entry);
}

void Scenario::set(std::string_view assignment) {
    const std::string origin = "--set " + std::string(assignment);
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError(origin + ": expected section.key=value");
    const auto lhs = detail::trim(assignment.substr(0, eq));
    const auto dot = lhs.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == lhs.size())
        throw ConfigError(origin + ": expected section.key=value");
    const std::string section(lhs.substr(0, dot));
    const std::string key(lhs.substr(dot + 1));
    check_section(section, origin);
    check_key(section, key, origin);
    insert(section, key, {std::string(detail::trim(assignment.substr(eq + 1))), "--set"});
}

bool Scenario::has_section(std::string_view section) const { return values_.contains(section); }

std::vector<std::string> Scenario::named_sections(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& s : section_order_) {
        const auto [base, name] = split_section(s);
        if (base == prefix && !name.empty()) out.push_back(s);
    }
    return out;
}

const Scenario::Entry* Scenario::find(std::string_view section, std::string_view key) const {
    const auto s = values_.find(section);
    if (s == values_.end()) return nullptr;
    const auto k = s->second.find(std::string(key));
    return k == s->second.end() ? nullptr : &k->second;
}

bool Scenario::has(std::string_view section, std::string_view key) const {
    return find(section, key) != nullptr;
}

std::string Scenario::where(std::string_view section, std::string_view key) const {
    const auto* e = find(section, key);
    const std::string name = "[" + std::string(section) + "] " + std::string(key);
    return e ? e->origin + ": " + name : name;
}

std::string Scenario::text(std::string_view section, std::string_view key,
                           std::optional<std::string> fallback) const {
    if (const auto* e = find(section, key)) return e->value;
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + std::string(key) + "' in [" +
                      std::string(section) + "]");
}

std::optional<double> Scenario::maybe_real(std::string_view section, std::string_view key) const {
    const auto* e = find(section, key);
    if (!e) return std::nullopt;
    const auto v = detail::parse_double(e->value);
    if (!v) throw ConfigError(where(section, key) + ": expected a number, got '" + e->value + "'");
    return v;
}

double Scenario::real(std::string_view section, std::string_view key,
                      std::optional<double> fallback) const {
    if (auto v = maybe_real(section, key)) return *v;
    if (fallback) return *fallback;
    throw ConfigError("missing required key '" + std::string(key) + "' in [" +
                      std::string(section) + "]");
}

std::uint64_t Scenario::integer(std::string_view section, std::string_view key,
                                std::optional<std::uint64_t> fallback) const {
    const auto* e = find(section, key);
    if (!e) {
        if (fallback) return *fallback;
        throw ConfigError("missing required key '" + std::string(key) + "' in [" +
                          std::string(section) + "]");
    }
    const auto v = detail::parse_int(e->value);
    if (!v || *v < 0)
        throw ConfigError(where(section, key) + ": expected a non-negative integer, got '" +
                          e->value + "'");
    return std::uint64_t(*v);
}

std::vector<std::string> Scenario::words(std::string_view section, std::string_view key) const {
    const auto* e = find(section, key);
    if (!e) return {};
    return detail::split_fields(e->value, ",");
}

std::vector<double> Scenario::reals(std::string_view section, std::string_view key) const {
    std::vector<double> out;
    for (const auto& w : words(section, key)) {
        const auto v = detail::parse_double(w);
        if (!v) throw ConfigError(where(section, key) + ": expected numbers, got '" + w + "'");
        out.push_back(*v);
    }
    return out;
}

std::filesystem::path Scenario::path(std::string_view section, std::string_view key,
                                     bool must_exist) const {
    std::filesystem::path p = text(section, key);
    if (p.is_relative()) p = base_dir_ / p;
    p = p.lexically_normal();
    if (must_exist && !std::filesystem::exists(p))
        throw ConfigError(where(section, key) + ": file '" + p.string() + "' does not exist");
    return p;
}

std::uint64_t Scenario::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (const auto& [section, keys] : values_) {
        feed(section);
        for (const auto& [key, entry] : keys) {
            feed(key);
            feed(entry.value);
        }
    }
    return h;
}

}  // namespace hsps::cli
