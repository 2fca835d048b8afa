#include "hsps/dispersion.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hsps/detail/text.hpp"

namespace hsps {

namespace {

constexpr std::array<const char*, 10> kJundtNames = {"a1", "a2", "a3", "a4", "a5",
                                                     "a6", "b1", "b2", "b3", "b4"};
constexpr std::array<const char*, 6> kThreeTermNames = {"B1", "B2", "B3", "C1", "C2", "C3"};

std::string format_value(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

void check_range(const Interval& range, double value, const char* what, const char* unit,
                 const std::string& model) {
    if (!std::isfinite(value))
        throw RangeError(std::string(what) + " is not finite for model '" + model + "'");
    if (value < range.min)
        throw RangeError(std::string(what) + " " + format_value(value) + " " + unit +
                         " below minimum " + format_value(range.min) + " " + unit + " of model '" +
                         model + "'");
    if (value > range.max)
        throw RangeError(std::string(what) + " " + format_value(value) + " " + unit +
                         " above maximum " + format_value(range.max) + " " + unit + " of model '" +
                         model + "'");
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

void SellmeierModel::finalize() {
    auto fill = [this](const auto& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            auto it = coefficients.find(names[i]);
            if (it == coefficients.end())
                throw ConfigError("Sellmeier model '" + name + "' is missing coefficient '" +
                                  names[i] + "'");
            packed[i] = it->second;
        }
        for (const auto& [key, value] : coefficients) {
            if (std::find_if(names.begin(), names.end(),
                             [&](const char* n) { return key == n; }) == names.end())
                throw ConfigError("Sellmeier model '" + name + "' has unknown coefficient '" +
                                  key + "'");
        }
    };
    packed.fill(0.0);
    if (form == SellmeierForm::Jundt)
        fill(kJundtNames);
    else
        fill(kThreeTermNames);
    if (!(wavelength_um.min > 0.0 && wavelength_um.max > wavelength_um.min))
        throw ConfigError("Sellmeier model '" + name + "' has an invalid wavelength range");
    if (!(temperature_c.max >= temperature_c.min))
        throw ConfigError("Sellmeier model '" + name + "' has an invalid temperature range");
}

double refractive_index(const SellmeierModel& model, double wavelength_um, double temperature_c) {
    check_range(model.wavelength_um, wavelength_um, "wavelength", "um", model.name);
    check_range(model.temperature_c, temperature_c, "temperature", "degC", model.name);
    return std::sqrt(sellmeier_index_squared(model, wavelength_um, temperature_c));
}

double group_index(const SellmeierModel& model, double wavelength_um, double temperature_c) {
    const double h = kGroupIndexStepUm;
    if (wavelength_um - h < model.wavelength_um.min || wavelength_um + h > model.wavelength_um.max)
        throw RangeError("wavelength " + format_value(wavelength_um) +
                         " um is within one difference step of the range edge of model '" +
                         model.name + "' [" + format_value(model.wavelength_um.min) + ", " +
                         format_value(model.wavelength_um.max) + "] um");
    const double n = refractive_index(model, wavelength_um, temperature_c);
    const double up = refractive_index(model, wavelength_um + h, temperature_c);
    const double down = refractive_index(model, wavelength_um - h, temperature_c);
    return n - wavelength_um * (up - down) / (2.0 * h);
}

MaterialIndex::MaterialIndex(std::string name, Source source)
    : name_(std::move(name)), source_(std::move(source)) {
    if (auto* table = std::get_if<IndexTable>(&source_)) {
        if (table->wavelength_um.size() < 2 ||
            table->wavelength_um.size() != table->index.size())
            throw ConfigError("index table '" + name_ + "' needs at least two (wavelength, n) rows");
        for (Eigen::Index i = 1; i < table->wavelength_um.size(); ++i)
            if (!(table->wavelength_um[i] > table->wavelength_um[i - 1]))
                throw ConfigError("index table '" + name_ +
                                  "' wavelengths must be strictly increasing");
    }
}

MaterialIndex MaterialIndex::constant(double n) {
    return MaterialIndex(format_value(n), ConstantIndex{n});
}

double MaterialIndex::at(double wavelength_um) const {
    struct Visitor {
        const std::string& name;
        double wl;
        double operator()(const ConstantIndex& c) const { return c.n; }
        double operator()(const SellmeierAtTemperature& s) const {
            return refractive_index(s.model, wl, s.temperature_c);
        }
        double operator()(const IndexTable& t) const {
            const auto& x = t.wavelength_um;
            const Eigen::Index n = x.size();
            if (wl < x[0] || wl > x[n - 1])
                throw RangeError("wavelength " + format_value(wl) + " um outside table '" + name +
                                 "' span [" + format_value(x[0]) + ", " + format_value(x[n - 1]) +
                                 "] um");
            const auto* begin = x.data();
            const auto* hi = std::upper_bound(begin, begin + n, wl);
            Eigen::Index j = std::clamp<Eigen::Index>(hi - begin, 1, n - 1);
            const double w = (wl - x[j - 1]) / (x[j] - x[j - 1]);
            return (1.0 - w) * t.index[j - 1] + w * t.index[j];
        }
    };
    return std::visit(Visitor{name_, wavelength_um}, source_);
}

SellmeierModel parse_sellmeier(std::istream& in, const std::string& origin) {
    SellmeierModel model;
    model.name = origin;
    bool have_form = false, have_wl = false, have_t = false;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        if (view.starts_with("#@")) {
            view = detail::trim(view.substr(2));
            const auto colon = view.find(':');
            if (colon == std::string_view::npos) fail("header directive needs 'key: value'");
            const std::string key(detail::trim(view.substr(0, colon)));
            const std::string value(detail::trim(view.substr(colon + 1)));
            if (key == "name") {
                model.name = value;
            } else if (key == "source") {
                model.source = value;
            } else if (key == "form") {
                if (value == "jundt")
                    model.form = SellmeierForm::Jundt;
                else if (value == "three_term")
                    model.form = SellmeierForm::ThreeTerm;
                else
                    fail("unknown form '" + value + "'");
                have_form = true;
            } else if (key == "wavelength_um" || key == "temperature_c") {
                const auto fields = detail::split_fields(value);
                if (fields.size() != 2) fail(key + " needs 'min max'");
                auto lo = detail::parse_double(fields[0]);
                auto hi = detail::parse_double(fields[1]);
                if (!lo || !hi) fail(key + " bounds are not numbers");
                if (key == "wavelength_um") {
                    model.wavelength_um = {*lo, *hi};
                    have_wl = true;
                } else {
                    model.temperature_c = {*lo, *hi};
                    have_t = true;
                }
            } else if (key != "version") {
                fail("unknown header directive '" + key + "'");
            }
            continue;
        }
        view = detail::trim(detail::strip_comment(view));
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view, "=");
        if (fields.size() != 2) fail("expected 'name value'");
        auto value = detail::parse_double(fields[1]);
        if (!value) fail("coefficient '" + fields[0] + "' is not a number");
        if (!model.coefficients.emplace(fields[0], *value).second)
            fail("duplicate coefficient '" + fields[0] + "'");
    }
    if (!have_form) throw ConfigError(origin + ": missing '#@ form:' header");
    if (!have_wl) throw ConfigError(origin + ": missing '#@ wavelength_um:' header");
    if (!have_t) throw ConfigError(origin + ": missing '#@ temperature_c:' header");
    model.finalize();
    return model;
}

SellmeierModel load_sellmeier(const std::filesystem::path& path) {
    auto in = open_input(path);
    auto model = parse_sellmeier(in, path.string());
    if (model.name == path.string()) model.name = path.stem().string();
    return model;
}

IndexTable parse_index_table(std::istream& in, const std::string& origin) {
    std::vector<double> wl, n;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = detail::trim(detail::strip_comment(line));
        if (view.empty()) continue;
        const auto fields = detail::split_fields(view, ",");
        auto a = fields.size() == 2 ? detail::parse_double(fields[0]) : std::nullopt;
        auto b = fields.size() == 2 ? detail::parse_double(fields[1]) : std::nullopt;
        if (!a || !b)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'wavelength_um n'");
        wl.push_back(*a);
        n.push_back(*b);
    }
    IndexTable table;
    table.wavelength_um = Eigen::Map<const Eigen::VectorXd>(wl.data(), Eigen::Index(wl.size()));
    table.index = Eigen::Map<const Eigen::VectorXd>(n.data(), Eigen::Index(n.size()));
    return table;
}

IndexTable load_index_table(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_index_table(in, path.string());
}

MaterialLibrary::MaterialLibrary() { add(MaterialIndex("air", ConstantIndex{1.0})); }

MaterialLibrary MaterialLibrary::from_directory(const std::filesystem::path& dir,
                                                double temperature_c) {
    MaterialLibrary lib;
    if (!std::filesystem::is_directory(dir))
        throw IoError("material directory '" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const auto stem = path.stem().string();
        if (path.extension() == ".sellmeier") {
            auto model = load_sellmeier(path);
            lib.add(MaterialIndex(stem, SellmeierAtTemperature{std::move(model), temperature_c}));
        } else if (path.extension() == ".nk") {
            lib.add(MaterialIndex(stem, load_index_table(path)));
        }
    }
    return lib;
}

void MaterialLibrary::add(const MaterialIndex& material) {
    materials_.insert_or_assign(material.name(), material);
}

bool MaterialLibrary::contains(std::string_view name) const {
    return materials_.find(name) != materials_.end() || detail::parse_double(name).has_value();
}

MaterialIndex MaterialLibrary::resolve(std::string_view name) const {
    if (auto it = materials_.find(name); it != materials_.end()) return it->second;
    if (auto n = detail::parse_double(name)) {
        if (!(*n >= 1.0)) throw ConfigError("constant index '" + std::string(name) + "' must be >= 1");
        return MaterialIndex(std::string(name), ConstantIndex{*n});
    }
    throw ConfigError("unknown material '" + std::string(name) + "'");
}

}  // namespace hsps
