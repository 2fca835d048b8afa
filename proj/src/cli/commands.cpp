#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "hsps/beamoptics.hpp"
#include "hsps/cli.hpp"
#include "hsps/detail/text.hpp"
#include "hsps/dispersion.hpp"
#include "hsps/error.hpp"
#include "hsps/optimize.hpp"
#include "hsps/pairsim.hpp"
#include "hsps/qpm.hpp"
#include "hsps/sweep.hpp"
#include "hsps/tagmetrics.hpp"
#include "hsps/tagstream.hpp"
#include "hsps/thinfilm.hpp"

namespace hsps::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int precision = 10) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

std::string fixed(double v, int decimals) {
    if (!std::isfinite(v)) return num(v);
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

    void write_csv(std::ostream& out) const {
        auto line = [&out](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
            out << '\n';
        };
        line(columns);
        for (const auto& r : rows) line(r);
    }

    void print(std::ostream& out) const {
        std::vector<std::size_t> width(columns.size());
        for (std::size_t i = 0; i < columns.size(); ++i) width[i] = columns[i].size();
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
                width[i] = std::max(width[i], r[i].size());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                const bool last = i + 1 == cells.size();
                out << (i ? "  " : "") << std::left << std::setw(last ? 0 : int(width[i])) << cells[i];
            }
            out << '\n';
        };
        line(columns);
        std::size_t total = 0;
        for (auto w : width) total += w + 2;
        out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
        for (const auto& r : rows) line(r);
    }
};

class Context {
public:
    Context(const Scenario& scenario, const RunOptions& options, fs::path out_dir,
            std::string command, std::ostream& log)
        : sc(scenario), opts_(options), out_(std::move(out_dir)), command_(std::move(command)),
          log(log) {}

    const Scenario& sc;

    std::optional<std::uint64_t> seed() const {
        if (opts_.seed) return opts_.seed;
        if (sc.has("general", "seed")) return sc.integer("general", "seed");
        return std::nullopt;
    }

    std::uint64_t require_seed(const std::string& what) const {
        const auto s = seed();
        if (!s) throw ConfigError(what + " is stochastic: set [general] seed or pass --seed");
        return *s;
    }

    std::string header() const {
        std::ostringstream os;
        os << "# hsps " << HSPS_VERSION << '\n';
        os << "# command: " << command_ << '\n';
        os << "# scenario_hash: " << std::hex << std::setw(16) << std::setfill('0') << sc.hash()
           << std::dec << '\n';
        const auto s = seed();
        os << "# seed: " << (s ? std::to_string(*s) : std::string("none")) << '\n';
        if (!opts_.deterministic) {
            const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::tm tm{};
            gmtime_r(&now, &tm);
            os << "# generated: " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
        }
        return os.str();
    }

    fs::path file(const std::string& name) const {
        fs::create_directories(out_);
        return out_ / name;
    }

    std::ofstream open(const std::string& name) const {
        const auto p = file(name);
        std::ofstream out(p);
        if (!out) throw IoError("cannot write '" + p.string() + "'");
        out << header();
        return out;
    }

    void csv(const std::string& name, const Table& table) const {
        auto out = open(name);
        table.write_csv(out);
        log << "wrote " << (out_ / name).string() << '\n';
    }

    void section(const std::string& title, const Table& table) { summary_.emplace_back(title, table); }
    void note(const std::string& line) { notes_.push_back(line); }

    void finish() const {
        std::ostringstream body;
        for (const auto& n : notes_) body << n << '\n';
        for (const auto& [title, table] : summary_) {
            body << '\n' << title << '\n';
            table.print(body);
        }
        auto out = open("summary.txt");
        out << body.str();
        log << body.str();
    }

private:
    const RunOptions& opts_;
    fs::path out_;
    std::string command_;
    std::vector<std::pair<std::string, Table>> summary_;
    std::vector<std::string> notes_;

public:
    std::ostream& log;
};

SellmeierModel model_of(const Scenario& sc) { return load_sellmeier(sc.path("dispersion", "model")); }

SearchWindow window_of(const Scenario& sc) {
    SearchWindow w;
    w.min_um = sc.real("qpm", "window_min_um", w.min_um);
    w.max_um = sc.real("qpm", "window_max_um", w.max_um);
    w.scan_points = int(sc.integer("qpm", "scan_points", std::uint64_t(w.scan_points)));
    return w;
}

struct ProcessSetup {
    QpmProcess process;
    std::vector<WeightedCombo> combos;
    std::vector<std::string> names;
};

ProcessSetup process_of(const Scenario& sc) {
    ProcessSetup ps;
    auto& p = ps.process;
    p.pump_wavelength_um = sc.real("qpm", "pump_wavelength_um", p.pump_wavelength_um);
    p.poling_period_um = sc.real("qpm", "poling_period_um", p.poling_period_um);
    p.crystal_length_mm = sc.real("qpm", "crystal_length_mm", p.crystal_length_mm);
    p.temperature_c = sc.real("qpm", "temperature_c", p.temperature_c);
    for (const auto& s : sc.named_sections("combo")) {
        ModeCombo c{sc.text(s, "signal", "00"), sc.text(s, "idler", "00"), sc.text(s, "pump", "00")};
        if (p.mode_offsets.contains(c))
            throw ConfigError(sc.where(s, "signal") + ": mode combination " + c.label() +
                              " defined twice");
        p.mode_offsets[c] = {sc.real(s, "dn_signal", 0.0), sc.real(s, "dn_idler", 0.0),
                             sc.real(s, "dn_pump", 0.0)};
        ps.combos.push_back({c, sc.real(s, "weight", 1.0)});
        ps.names.push_back(s.substr(s.find('.') + 1));
    }
    if (ps.combos.empty()) {
        ps.combos.push_back({ModeCombo::fundamental(), 1.0});
        ps.names.push_back("fundamental");
    }
    p.validate();
    return ps;
}

OffsetConvention convention_of(const Scenario& sc) {
    const auto c = sc.text("qpm", "calibration", "signal_index");
    if (c == "signal_index") return OffsetConvention::SignalIndex;
    if (c == "peak_shift") return OffsetConvention::PeakShift;
    throw ConfigError(sc.where("qpm", "calibration") + ": expected signal_index or peak_shift");
}

// Applies the optional peak calibration and reports it.
void calibrate(Context& ctx, ProcessSetup& ps, const SellmeierModel& model) {
    const auto measured = ctx.sc.maybe_real("qpm", "calibrate_signal_um");
    if (!measured) return;
    const auto before = ps.process;
    ps.process = calibrate_offset(*measured, ps.process, model, convention_of(ctx.sc), window_of(ctx.sc));
    const auto convention = convention_of(ctx.sc);
    if (convention == OffsetConvention::PeakShift) {
        ctx.note("calibration: peak shift " + num(ps.process.peak_shift_um * 1e3, 8) +
                 " nm to place the fundamental at " + num(*measured * 1e3) + " nm");
    } else {
        const double delta = ps.process.offsets(ModeCombo::fundamental()).signal -
                             before.offsets(ModeCombo::fundamental()).signal;
        ctx.note("calibration: signal index offset " + num(delta, 8) +
                 " to place the fundamental at " + num(*measured * 1e3) + " nm");
    }
}

MaterialLibrary library_of(const Scenario& sc, double temperature_c) {
    return MaterialLibrary::from_directory(sc.path("general", "materials_dir"), temperature_c);
}

Eigen::VectorXd grid(double lo, double hi, std::uint64_t n, const std::string& what) {
    if (n < 2 || !(hi > lo)) throw ConfigError(what + ": need max > min and at least 2 points");
    return Eigen::VectorXd::LinSpaced(Eigen::Index(n), lo, hi);
}

std::array<double, 3> triple(const Scenario& sc, std::string_view key, std::array<double, 3> def) {
    if (!sc.has("channel", key)) return def;
    const auto v = sc.reals("channel", key);
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() != 3)
        throw ConfigError(sc.where("channel", key) + ": expected 1 or 3 values (S I1 I2)");
    return {v[0], v[1], v[2]};
}

SourceModel source_of(const Scenario& sc) {
    SourceModel s;
    s.mean_pairs_per_pulse = sc.real("source", "mu", 0.0);
    const auto stats = sc.text("source", "statistics", "thermal");
    if (stats == "thermal")
        s.statistics = PhotonStatistics::Thermal;
    else if (stats == "poissonian")
        s.statistics = PhotonStatistics::Poissonian;
    else
        throw ConfigError(sc.where("source", "statistics") + ": expected thermal or poissonian");
    s.repetition_rate_hz = sc.real("source", "repetition_rate_hz", s.repetition_rate_hz);
    s.pulse_jitter_ps = sc.real("source", "pulse_jitter_ps", s.pulse_jitter_ps);
    s.validate();
    return s;
}

ChannelModel channel_of(const Scenario& sc) {
    ChannelModel c;
    c.signal_transmission = sc.real("channel", "signal_transmission", c.signal_transmission);
    c.idler_transmission = sc.real("channel", "idler_transmission", c.idler_transmission);
    c.splitter_ratio = sc.real("channel", "splitter_ratio", c.splitter_ratio);
    c.detector_efficiency = triple(sc, "detector_efficiency", c.detector_efficiency);
    c.dark_count_prob = triple(sc, "dark_count_prob", c.dark_count_prob);
    c.background_prob = triple(sc, "background_prob", c.background_prob);
    c.gate_width_ps = sc.real("channel", "gate_width_ps", c.gate_width_ps);
    c.validate();
    return c;
}

CoincidenceConfig coincidence_of(const Scenario& sc, double repetition_rate_hz) {
    CoincidenceConfig c;
    c.window_ps = std::int64_t(sc.integer("coincidence", "window_ps", std::uint64_t(c.window_ps)));
    if (sc.has("coincidence", "delays_ps")) {
        const auto d = sc.reals("coincidence", "delays_ps");
        if (d.size() != 3)
            throw ConfigError(sc.where("coincidence", "delays_ps") + ": expected 3 values (S I1 I2)");
        for (int k = 0; k < 3; ++k) c.delays_ps[k] = std::llround(d[k]);
    }
    if (sc.has("coincidence", "repetition_time_ps"))
        c.repetition_time_ps = std::int64_t(sc.integer("coincidence", "repetition_time_ps"));
    else if (repetition_rate_hz > 0.0)
        c.repetition_time_ps = std::llround(1e12 / repetition_rate_hz);
    if (sc.has("coincidence", "shifts")) {
        c.shifts.clear();
        for (double m : sc.reals("coincidence", "shifts")) {
            if (m != std::floor(m) || m < 1)
                throw ConfigError(sc.where("coincidence", "shifts") + ": shifts are positive integers");
            c.shifts.push_back(int(m));
        }
    }
    const auto matching = sc.text("coincidence", "matching", "greedy");
    if (matching == "greedy")
        c.matching = Matching::Greedy;
    else if (matching == "all_pairs")
        c.matching = Matching::AllPairs;
    else
        throw ConfigError(sc.where("coincidence", "matching") + ": expected greedy or all_pairs");
    c.duration_s = sc.maybe_real("coincidence", "duration_s");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[coincidence] ") + e.what());
    }
    return c;
}

SimulationOptions simulation_options_of(const Scenario& sc) {
    SimulationOptions o;
    o.block_size = sc.integer("simulate", "block_size", o.block_size);
    o.threads = unsigned(sc.integer("simulate", "threads", o.threads));
    if (o.block_size == 0) throw ConfigError(sc.where("simulate", "block_size") + ": must be > 0");
    return o;
}

std::vector<TransmissionTarget> targets_of(const Scenario& sc) {
    std::vector<TransmissionTarget> out;
    for (const auto& w : sc.words("optimize", "targets")) {
        TransmissionTarget t;
        std::size_t pos = std::string::npos;
        std::size_t len = 1;
        if ((pos = w.find("<=")) != std::string::npos) {
            t.kind = TargetKind::AtMost;
            len = 2;
        } else if ((pos = w.find(">=")) != std::string::npos) {
            t.kind = TargetKind::AtLeast;
            len = 2;
        } else if ((pos = w.find('=')) != std::string::npos) {
            t.kind = TargetKind::Equal;
        }
        const auto wl = pos == std::string::npos ? std::nullopt : detail::parse_double(w.substr(0, pos));
        const auto tr = pos == std::string::npos ? std::nullopt : detail::parse_double(w.substr(pos + len));
        if (!wl || !tr)
            throw ConfigError(sc.where("optimize", "targets") + ": cannot read target '" + w +
                              "' (expected e.g. 532<=0.05, 810>=0.95, 700=0.5)");
        t.wavelength_nm = *wl;
        t.transmission = *tr;
        out.push_back(t);
    }
    if (out.empty()) throw ConfigError("[optimize] targets: at least one target is required");
    return out;
}

std::string kind_name(TargetKind k) {
    switch (k) {
        case TargetKind::AtMost: return "at_most";
        case TargetKind::AtLeast: return "at_least";
        default: return "equal";
    }
}

bool target_met(const TransmissionTarget& t, double value) {
    switch (t.kind) {
        case TargetKind::AtMost: return value <= t.transmission;
        case TargetKind::AtLeast: return value >= t.transmission;
        default: return std::abs(value - t.transmission) <= 1e-3;
    }
}

int cmd_phasematch(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto model = model_of(sc);
    auto ps = process_of(sc);
    const auto window = window_of(sc);
    calibrate(ctx, ps, model);
    auto temps = sc.reals("qpm", "temperatures_c");
    if (temps.empty()) temps.push_back(ps.process.temperature_c);

    Table t{{"combo", "modes", "temperature_c", "signal_nm", "idler_nm"}, {}};
    for (double temp : temps) {
        auto p = ps.process;
        p.temperature_c = temp;
        for (std::size_t i = 0; i < ps.combos.size(); ++i) {
            const auto& c = ps.combos[i].combo;
            double s = std::numeric_limits<double>::quiet_NaN();
            double idler = s;
            try {
                s = solve_phasematch(p, model, c, window);
                idler = idler_from_signal(p.pump_wavelength_um, s);
            } catch (const NoPhasematchError& e) {
                ctx.note("warning: " + ps.names[i] + " at " + num(temp) + " C: " + e.what());
            }
            t.add({ps.names[i], c.label(), num(temp), num(s * 1e3, 10), num(idler * 1e3, 10)});
        }
    }
    ctx.csv("phasematch.csv", t);
    ctx.section("Phasematched wavelengths", t);

    if (const auto target = sc.maybe_real("qpm", "target_signal_um")) {
        const auto& p = ps.process;
        const double bulk = solve_period(p.pump_wavelength_um, *target, model, p.temperature_c);
        const double period = solve_period(p.pump_wavelength_um, *target, model, p.temperature_c,
                                           p.offsets(ModeCombo::fundamental()));
        Table pt{{"pump_um", "signal_um", "idler_um", "temperature_c", "bulk_period_um",
                  "offset_period_um"},
                 {}};
        pt.add({num(p.pump_wavelength_um), num(*target),
                num(idler_from_signal(p.pump_wavelength_um, *target), 10), num(p.temperature_c),
                num(bulk, 10), num(period, 10)});
        ctx.csv("poling_period.csv", pt);
        ctx.section("Poling period for the target signal", pt);
    }
    ctx.finish();
    return kExitOk;
}

int cmd_spectrum(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto model = model_of(sc);
    auto ps = process_of(sc);
    calibrate(ctx, ps, model);
    SpectrumOptions options;
    options.window = window_of(sc);
    options.pump_fwhm_nm = sc.real("qpm", "pump_fwhm_nm", 0.0);
    const auto g = grid(sc.real("qpm", "spectrum_min_um", options.window.min_um),
                        sc.real("qpm", "spectrum_max_um", options.window.max_um),
                        sc.integer("qpm", "spectrum_points", 2001), "[qpm] spectrum grid");
    const auto s = spdc_spectrum(ps.process, model, ps.combos, g, options);

    Table t{{"wavelength_nm", "relative_intensity"}, {}};
    for (Eigen::Index i = 0; i < s.wavelength_um.size(); ++i)
        t.add({num(s.wavelength_um[i] * 1e3, 10), num(s.intensity[i], 10)});
    ctx.csv("spectrum.csv", t);

    Table peaks{{"combo", "modes", "weight", "peak_nm"}, {}};
    for (std::size_t i = 0; i < ps.combos.size(); ++i) {
        double peak = std::numeric_limits<double>::quiet_NaN();
        try {
            peak = solve_phasematch(ps.process, model, ps.combos[i].combo, options.window);
        } catch (const NoPhasematchError&) {
        }
        peaks.add({ps.names[i], ps.combos[i].combo.label(), num(ps.combos[i].weight),
                   fixed(peak * 1e3, 3)});
    }
    Eigen::Index arg = 0;
    s.intensity.maxCoeff(&arg);
    ctx.note("grid maximum at " + fixed(s.wavelength_um[arg] * 1e3, 3) + " nm");
    ctx.section("Spectral peaks", peaks);
    ctx.finish();
    return kExitOk;
}

int cmd_coupling(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto sections = sc.named_sections("coupling");
    if (sections.empty()) throw ConfigError("no [coupling.*] sections in scenario");
    Table t{{"name", "wavelength_nm", "a_label", "a_mfd_x_um", "a_mfd_y_um", "b_label", "b_mfd_x_um",
             "b_mfd_y_um", "efficiency", "efficiency_2dp", "loss_db"},
            {}};
    for (const auto& s : sections) {
        const Mode a{sc.real(s, "a_mfd_x_um"), sc.real(s, "a_mfd_y_um", sc.real(s, "a_mfd_x_um"))};
        const Mode b{sc.real(s, "b_mfd_x_um"), sc.real(s, "b_mfd_y_um", sc.real(s, "b_mfd_x_um"))};
        const double eta = overlap_efficiency(a, b);
        t.add({s.substr(s.find('.') + 1), num(sc.real(s, "wavelength_nm", 0.0)),
               sc.text(s, "a_label", "a"), num(a.mfd_x_um), num(a.mfd_y_um), sc.text(s, "b_label", "b"),
               num(b.mfd_x_um), num(b.mfd_y_um), fixed(eta, 6), fixed(eta, 2),
               fixed(efficiency_to_db(eta), 4)});
    }
    ctx.csv("coupling.csv", t);
    ctx.section("Mode overlap coupling", t);
    ctx.finish();
    return kExitOk;
}

int cmd_budget(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto sections = sc.named_sections("budget");
    if (sections.empty()) throw ConfigError("no [budget.*] sections in scenario");
    Table rows{{"budget", "label", "loss_db"}, {}};
    Table totals{{"budget", "wavelength", "entries", "total_db", "transmission"}, {}};
    for (const auto& s : sections) {
        const auto budget = load_budget(sc.path(s, "file"));
        const auto name = s.substr(s.find('.') + 1);
        for (const auto& e : budget.entries) rows.add({name, e.label, fixed(e.loss_db, 3)});
        rows.add({name, "total", fixed(budget.total_db(), 3)});
        totals.add({name, budget.wavelength_tag.empty() ? "-" : budget.wavelength_tag,
                    std::to_string(budget.entries.size()), fixed(budget.total_db(), 3),
                    fixed(budget.transmission(), 4)});
    }
    ctx.csv("budget.csv", rows);
    ctx.section("Loss budget entries", rows);
    ctx.section("Totals", totals);
    ctx.finish();
    return kExitOk;
}

int cmd_coating(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto lib = library_of(sc, sc.real("coating", "temperature_c", 25.0));
    const auto stack = load_stack(sc.path("coating", "stack"), lib);
    const auto g = grid(sc.real("coating", "grid_min_nm", 400.0), sc.real("coating", "grid_max_nm", 1700.0),
                        sc.integer("coating", "grid_points", 1301), "[coating] grid");
    const auto spec = spectrum(stack, g);

    std::optional<TransmissionSpectrum> converted;
    if (sc.has("coating", "convert_incident") || sc.has("coating", "convert_exit")) {
        const InterfaceConfig target{lib.resolve(sc.text("coating", "convert_incident", stack.incident.name())),
                                     lib.resolve(sc.text("coating", "convert_exit", stack.exit.name()))};
        converted = convert_substrate(spec, {stack.incident, stack.exit}, target);
    }

    Table t{{"wavelength_nm", "transmittance", "reflectance"}, {}};
    if (converted) t.columns.push_back("transmittance_converted");
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        std::vector<std::string> row{num(g[i]), num(spec.transmittance[i], 10), num(spec.reflectance[i], 10)};
        if (converted) row.push_back(num(converted->transmittance[i], 10));
        t.add(std::move(row));
    }
    ctx.csv("coating.csv", t);

    auto probes = sc.reals("coating", "probe_nm");
    if (probes.empty()) probes = {532.0, 810.0, 1550.0};
    Table p{{"wavelength_nm", "transmittance", "reflectance"}, {}};
    for (double wl : probes) {
        const auto r = stack_transmission(stack, wl);
        p.add({num(wl), fixed(r.transmittance, 6), fixed(r.reflectance, 6)});
    }
    ctx.note("stack: " + std::to_string(stack.layers.size()) + " layers, " + stack.incident.name() +
             " | ... | " + stack.exit.name());
    ctx.section("Transmission at probe wavelengths", p);
    ctx.finish();
    return kExitOk;
}

int cmd_optimize(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto lib = library_of(sc, sc.real("optimize", "temperature_c", 25.0));
    const auto targets = targets_of(sc);

    StackConstraints constraints;
    constraints.max_layers = sc.integer("optimize", "max_layers", constraints.max_layers);
    constraints.min_thickness_nm = sc.real("optimize", "min_thickness_nm", constraints.min_thickness_nm);
    constraints.max_thickness_nm = sc.real("optimize", "max_thickness_nm", constraints.max_thickness_nm);
    auto names = sc.words("optimize", "materials");
    if (names.empty()) names = {"TiO2", "SiO2"};
    for (const auto& n : names) constraints.materials.push_back(lib.resolve(n));

    FilterStack seed_design;
    if (sc.has("optimize", "seed_stack")) {
        seed_design = load_stack(sc.path("optimize", "seed_stack"), lib);
    } else {
        seed_design = quarter_wave_seed(lib.resolve(sc.text("optimize", "incident", "air")),
                                        lib.resolve(sc.text("optimize", "exit", "air")),
                                        constraints.materials, sc.integer("optimize", "seed_layers", 20),
                                        sc.real("optimize", "reference_nm"));
    }

    OptimizerOptions options;
    options.max_rounds = int(sc.integer("optimize", "max_rounds", std::uint64_t(options.max_rounds)));
    options.restarts = int(sc.integer("optimize", "restarts", 0));
    options.restart_perturbation_nm = sc.real("optimize", "perturbation_nm", options.restart_perturbation_nm);
    if (options.restarts > 0) options.seed = ctx.require_seed("optimize-coating with restarts");

    const auto result = optimize_stack(targets, constraints, seed_design, options);

    {
        const auto name = sc.text("optimize", "output_stack", "optimized.stack");
        auto out = ctx.open(name);
        write_stack(out, result.stack);
        ctx.log << "wrote " << ctx.file(name).string() << '\n';
    }
    Table trace{{"iteration", "objective"}, {}};
    for (std::size_t i = 0; i < result.trace.size(); ++i)
        trace.add({std::to_string(i), num(result.trace[i], 12)});
    ctx.csv("optimize_trace.csv", trace);

    Table met{{"wavelength_nm", "kind", "target", "achieved", "met"}, {}};
    bool all_met = true;
    for (const auto& t : targets) {
        const double v = stack_transmission(result.stack, t.wavelength_nm).transmittance;
        const bool ok = target_met(t, v);
        all_met = all_met && ok;
        met.add({num(t.wavelength_nm), kind_name(t.kind), num(t.transmission), fixed(v, 6), ok ? "yes" : "no"});
    }
    ctx.csv("optimize_targets.csv", met);
    ctx.note("layers: " + std::to_string(result.stack.layers.size()) + ", objective " +
             num(result.objective, 6) + " after " + std::to_string(result.evaluations) + " evaluations");
    if (!all_met) ctx.note("warning: not every target was met");
    ctx.section("Targets", met);
    ctx.finish();
    return kExitOk;
}

fs::path default_stream(const Context& ctx) { return ctx.file("stream.bin"); }

int cmd_simulate(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto source = source_of(sc);
    const auto channel = channel_of(sc);
    const auto n_pulses = sc.integer("simulate", "n_pulses");
    const auto options = simulation_options_of(sc);
    const auto seed = ctx.require_seed("simulate");
    const fs::path path = sc.has("simulate", "stream") ? ctx.file(sc.text("simulate", "stream"))
                                                       : default_stream(ctx);

    const auto probs = click_probabilities(source, channel);
    const auto stream = simulate_stream(source, channel, n_pulses, seed, options);
    save_stream(path, stream);
    ctx.log << "wrote " << path.string() << '\n';

    std::array<std::uint64_t, 3> singles{};
    for (const auto& e : stream.events) ++singles[static_cast<std::size_t>(e.channel)];
    const std::array<std::string, 7> labels{"s", "i1", "i2", "s_i1", "s_i2", "i1_i2", "s_i1_i2"};
    Table t{{"event", "probability_per_pulse", "expected_counts", "simulated_clicks"}, {}};
    const auto p = probs.as_array();
    for (std::size_t k = 0; k < 7; ++k)
        t.add({labels[k], num(p[k], 10), num(p[k] * double(n_pulses), 8),
               k < 3 ? std::to_string(singles[k]) : std::string("-")});
    ctx.csv("click_probabilities.csv", t);
    ctx.note(describe(source, channel));
    ctx.note("pulses: " + std::to_string(n_pulses) + ", events: " + std::to_string(stream.events.size()));
    ctx.section("Click probabilities", t);
    ctx.finish();
    return kExitOk;
}

int cmd_analyze(Context& ctx) {
    const auto& sc = ctx.sc;
    fs::path path;
    if (sc.has("analyze", "stream"))
        path = sc.path("analyze", "stream");
    else if (fs::exists(default_stream(ctx)))
        path = default_stream(ctx);
    else
        throw ConfigError("no stream to analyze: set [analyze] stream or run simulate first");
    const auto stream = load_stream(path);
    const double rate = stream.header.repetition_rate_hz > 0.0
                            ? stream.header.repetition_rate_hz
                            : sc.real("source", "repetition_rate_hz", 10e6);
    const auto config = coincidence_of(sc, rate);
    const auto channel = channel_of(sc);
    const double eta_det_i =
        sc.real("analyze", "idler_detector_efficiency", effective_idler_detector_efficiency(channel));

    const SweepPoint point{sc.real("source", "mu", 0.0), std::nullopt, stream.header.n_pulses};
    const auto row = analyze_point(point, stream.header.seed, stream, channel, config);
    const auto& s = row.summary;

    Table counts{{"quantity", "counts", "rate_hz"}, {}};
    auto add = [&](const std::string& n, std::uint64_t c) {
        counts.add({n, std::to_string(c), num(s.rate(c), 10)});
    };
    add("s", s.singles[0]);
    add("i1", s.singles[1]);
    add("i2", s.singles[2]);
    add("s_i1", s.s_i1);
    add("s_i2", s.s_i2);
    add("i1_i2", s.i1_i2);
    add("s_i1_i2", s.s_i1_i2);
    for (const auto& [m, c] : s.shifted) add("s_i_shift_" + std::to_string(m), c);
    ctx.csv("counts.csv", counts);

    bool undefined = false;
    auto metric = [&](auto&& f) -> std::string {
        try {
            return num(f(), 10);
        } catch (const UndefinedMetricError& e) {
            undefined = true;
            if (!s.empty_stream) ctx.note("undefined: " + std::string(e.what()));
            return "undefined";
        }
    };
    Table metrics{{"metric", "value"}, {}};
    metrics.add({"duration_s", num(s.duration_s, 10)});
    metrics.add({"eta_h", metric([&] { return heralding_efficiency(s, eta_det_i); })});
    metrics.add({"g2_h", metric([&] { return heralded_g2(s); })});
    for (int m : config.shifts)
        metrics.add({"car_rep_" + std::to_string(m), metric([&] {
                         const auto r = car_rep(s, m);
                         if (r.coincidences == 0)
                             throw UndefinedMetricError("CAR undefined: no coincidences");
                         return r.value;
                     })});
    metrics.add({"klyshko_signal_path", metric([&] { return klyshko_infer(s).signal_path; })});
    metrics.add({"klyshko_idler_path", metric([&] { return klyshko_infer(s).idler_path; })});
    metrics.add({"klyshko_pair_rate_hz", metric([&] { return klyshko_infer(s).pair_rate_hz; })});
    ctx.csv("metrics.csv", metrics);

    ctx.note("stream: " + path.string() + " (" + std::to_string(stream.events.size()) + " events)");
    if (s.empty_stream) ctx.note("warning: empty stream, all counts are zero");
    ctx.section("Counts", counts);
    ctx.section("Estimators", metrics);
    ctx.finish();
    return undefined && !s.empty_stream ? kExitCompute : kExitOk;
}

int cmd_sweep(Context& ctx) {
    const auto& sc = ctx.sc;
    const auto source = source_of(sc);
    const auto channel = channel_of(sc);
    const auto config = coincidence_of(sc, source.repetition_rate_hz);
    const auto seed = ctx.require_seed("sweep");

    std::vector<SweepPoint> points;
    const auto n = sc.reals("sweep", "n_pulses");
    if (n.empty()) throw ConfigError("missing required key 'n_pulses' in [sweep]");
    if (sc.has("sweep", "powers")) {
        if (sc.has("sweep", "mu")) throw ConfigError("[sweep]: give either mu or powers, not both");
        const auto powers = sc.reals("sweep", "powers");
        points = points_from_powers(powers, sc.real("sweep", "kappa"), 0);
    } else {
        const auto mu = sc.reals("sweep", "mu");
        if (mu.empty()) throw ConfigError("[sweep]: mu or powers is required");
        points = points_from_mu(mu, 0);
    }
    if (n.size() != 1 && n.size() != points.size())
        throw ConfigError(sc.where("sweep", "n_pulses") + ": give one value or one per point");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double v = n.size() == 1 ? n[0] : n[i];
        if (!(v >= 1.0) || v != std::floor(v))
            throw ConfigError(sc.where("sweep", "n_pulses") + ": pulse counts must be positive integers");
        points[i].n_pulses = std::uint64_t(v);
    }

    const auto rows = power_sweep(source, channel, points, seed, config, simulation_options_of(sc));
    {
        auto out = ctx.open("sweep.csv");
        write_sweep_csv(out, rows, config);
        ctx.log << "wrote " << ctx.file("sweep.csv").string() << '\n';
    }
    Table t{{"mu", "n_pulses", "coincidences", "eta_h", "g2_h"}, {}};
    for (int m : config.shifts) t.columns.push_back("car_rep_" + std::to_string(m));
    for (const auto& r : rows) {
        std::vector<std::string> cells{num(r.point.mu, 6), std::to_string(r.point.n_pulses),
                                       std::to_string(r.summary.s_i()), num(r.heralding_efficiency, 5),
                                       num(r.heralded_g2, 5)};
        for (const auto& c : r.car) cells.push_back(num(c.value, 5));
        t.add(std::move(cells));
    }
    ctx.section("Sweep", t);
    ctx.finish();
    return kExitOk;
}

using Command = std::function<int(Context&)>;

const std::map<std::string, Command, std::less<>>& commands() {
    static const std::map<std::string, Command, std::less<>> m{
        {"phasematch", cmd_phasematch}, {"spectrum", cmd_spectrum},
        {"coupling", cmd_coupling},     {"budget", cmd_budget},
        {"coating", cmd_coating},       {"optimize-coating", cmd_optimize},
        {"simulate", cmd_simulate},     {"analyze", cmd_analyze},
        {"sweep", cmd_sweep},
    };
    return m;
}

// Steps of `reproduce` and the section each one needs.
const std::vector<std::pair<std::string, std::string>>& reproduce_steps() {
    static const std::vector<std::pair<std::string, std::string>> steps{
        {"phasematch", "qpm"},  {"spectrum", "qpm"},          {"coupling", "coupling"},
        {"budget", "budget"},   {"coating", "coating"},        {"optimize-coating", "optimize"},
        {"sweep", "sweep"},
    };
    return steps;
}

bool has_any(const Scenario& sc, const std::string& section) {
    return sc.has_section(section) || !sc.named_sections(section).empty();
}

}  // namespace

int run(std::string_view subcommand, const RunOptions& options, std::ostream& log, std::ostream& err) {
    try {
        auto scenario = Scenario::load(options.scenario);
        for (const auto& o : options.overrides) scenario.set(o);
        fs::path out = options.out_dir ? *options.out_dir
                                       : scenario.has("general", "output_dir")
                                             ? scenario.path("general", "output_dir", false)
                                             : fs::path("hsps_out");

        if (subcommand == "reproduce") {
            int status = kExitOk;
            for (const auto& [name, section] : reproduce_steps()) {
                if (!has_any(scenario, section)) continue;
                log << "== " << name << '\n';
                Context ctx(scenario, options, out / name, name, log);
                status = std::max(status, commands().at(name)(ctx));
            }
            return status;
        }
        const auto it = commands().find(subcommand);
        if (it == commands().end())
            throw ConfigError("unknown subcommand '" + std::string(subcommand) + "'");
        Context ctx(scenario, options, out, std::string(subcommand), log);
        return it->second(ctx);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitCompute;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitCompute;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Heralded single-photon source module toolkit"};
    app.set_version_flag("--version", std::string(HSPS_VERSION));
    app.require_subcommand(1);

    RunOptions options;
    std::string scenario;
    std::string out;
    std::uint64_t seed = 0;
    static const std::map<std::string, std::string> help{
        {"phasematch", "phasematching signal/idler wavelengths and poling periods"},
        {"spectrum", "sinc-squared SPDC spectrum over the configured grid"},
        {"coupling", "Gaussian mode-overlap coupling efficiencies"},
        {"budget", "per-path loss budgets in dB"},
        {"coating", "thin-film stack transmission spectrum"},
        {"optimize-coating", "fit layer thicknesses to transmission targets"},
        {"simulate", "Monte-Carlo time-tag stream of the source"},
        {"analyze", "coincidence counts and source estimators of a stream"},
        {"sweep", "simulate and analyze a series of mean pair numbers"},
        {"reproduce", "run every command the scenario configures"}};
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--scenario", scenario, "scenario file")->required();
        sub->add_option("--set", options.overrides, "override section.key=value (repeatable)");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "master seed");
        sub->add_flag("--deterministic", options.deterministic, "omit timestamps from output headers");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    options.scenario = scenario;
    if (!out.empty()) options.out_dir = out;
    for (auto* sub : app.get_subcommands()) {
        if (sub->count("--seed")) options.seed = seed;
        return run(sub->get_name(), options, std::cout, std::cerr);
    }
    return kExitConfig;
}

}  // namespace hsps::cli
