#include "hsps/qpm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace hsps {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct PumpRule {
    std::vector<double> pump_um;
    std::vector<double> weight;
};

double bisect_root(const auto& f, double lo, double hi, double f_lo) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = f(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double golden_maximize(const auto& f, double lo, double hi) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && (b - a) > 1e-13; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return std::max(fc, fd);
}

double phase_mismatch_at_pump(const QpmProcess& p, const SellmeierModel& model, double pump_um,
                              double signal_um, const ModeOffsets& off) {
    const double model_signal = signal_um - p.peak_shift_um;
    const double idler_um = idler_from_signal(pump_um, model_signal);
    const double T = p.temperature_c;
    const double np = refractive_index(model, pump_um, T) + off.pump;
    const double ns = refractive_index(model, model_signal, T) + off.signal;
    const double ni = refractive_index(model, idler_um, T) + off.idler;
    return kTwoPi * (np / pump_um - ns / model_signal - ni / idler_um - 1.0 / p.poling_period_um);
}

}  // namespace

void QpmProcess::validate() const {
    if (!(pump_wavelength_um > 0.0))
        throw DomainError("pump wavelength must be positive, got " + num(pump_wavelength_um));
    if (!(poling_period_um > 0.0))
        throw DomainError("poling period must be positive, got " + num(poling_period_um));
    if (!(crystal_length_mm > 0.0))
        throw DomainError("crystal length must be positive, got " + num(crystal_length_mm));
}

ModeOffsets QpmProcess::offsets(const ModeCombo& combo) const {
    if (auto it = mode_offsets.find(combo); it != mode_offsets.end()) return it->second;
    if (combo == ModeCombo::fundamental()) return {};
    throw DomainError("mode combination '" + combo.label() + "' has no registered offsets");
}

double idler_from_signal(double pump_um, double signal_um) {
    if (!(pump_um > 0.0)) throw DomainError("pump wavelength must be positive");
    if (!(signal_um > pump_um))
        throw DomainError("signal wavelength " + num(signal_um) +
                          " um must exceed the pump wavelength " + num(pump_um) +
                          " um for a physical idler");
    return 1.0 / (1.0 / pump_um - 1.0 / signal_um);
}

double phase_mismatch(const QpmProcess& process, const SellmeierModel& model, double signal_um,
                      const ModeCombo& combo) {
    process.validate();
    return phase_mismatch_at_pump(process, model, process.pump_wavelength_um, signal_um,
                                  process.offsets(combo));
}

double solve_phasematch(const QpmProcess& process, const SellmeierModel& model,
                        const ModeCombo& combo, const SearchWindow& window) {
    process.validate();
    if (!(window.max_um > window.min_um) || window.scan_points < 2)
        throw DomainError("invalid phasematch search window");
    const ModeOffsets off = process.offsets(combo);
    auto dk = [&](double s) {
        return phase_mismatch_at_pump(process, model, process.pump_wavelength_um, s, off);
    };

    const int n = window.scan_points;
    const double step = (window.max_um - window.min_um) / (n - 1);
    double prev_x = window.min_um;
    double prev_f = dk(prev_x);
    const double first_f = prev_f;
    if (prev_f == 0.0) return prev_x;
    for (int i = 1; i < n; ++i) {
        const double x = (i == n - 1) ? window.max_um : window.min_um + i * step;
        const double f = dk(x);
        if (f == 0.0) return x;
        if ((f < 0.0) != (prev_f < 0.0)) return bisect_root(dk, prev_x, x, prev_f);
        prev_x = x;
        prev_f = f;
    }
    throw NoPhasematchError("no phasematching root for combo '" + combo.label() + "' in [" +
                                num(window.min_um) + ", " + num(window.max_um) +
                                "] um: dk(min) = " + num(first_f) +
                                " rad/um, dk(max) = " + num(prev_f) + " rad/um",
                            first_f, prev_f);
}

double solve_period(double pump_um, double signal_um, const SellmeierModel& model,
                    double temperature_c, const ModeOffsets& off) {
    const double idler_um = idler_from_signal(pump_um, signal_um);
    const double tp = (refractive_index(model, pump_um, temperature_c) + off.pump) / pump_um;
    const double ts = (refractive_index(model, signal_um, temperature_c) + off.signal) / signal_um;
    const double ti = (refractive_index(model, idler_um, temperature_c) + off.idler) / idler_um;
    const double denom = tp - ts - ti;
    // Cancellation below a few ulps of the largest term counts as zero.
    if (!(denom > 1e-12 * tp))
        throw DomainError("no positive poling period: k_p - k_s - k_i = " + num(kTwoPi * denom) +
                          " rad/um");
    return 1.0 / denom;
}

double sinc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

SpdcSpectrum spdc_spectrum(const QpmProcess& process, const SellmeierModel& model,
                           std::span<const WeightedCombo> combos, const Eigen::VectorXd& grid_um,
                           const SpectrumOptions& options) {
    process.validate();
    if (combos.empty()) throw DomainError("spdc_spectrum needs at least one mode combination");
    for (Eigen::Index i = 1; i < grid_um.size(); ++i)
        if (!(grid_um[i] > grid_um[i - 1]))
            throw DomainError("spectrum grid must be strictly increasing");
    if (options.background.size() != 0 && options.background.size() != grid_um.size())
        throw DomainError("background curve must be sampled on the spectrum grid");
    if (options.pump_fwhm_nm < 0.0) throw DomainError("pump FWHM must be non-negative");

    std::vector<ModeOffsets> offsets;
    for (const auto& c : combos) {
        if (!(c.weight >= 0.0)) throw DomainError("combo weights must be non-negative");
        offsets.push_back(process.offsets(c.combo));
    }

    const double half_length_um = 0.5 * process.crystal_length_mm * 1000.0;
    const double sigma_um = options.pump_fwhm_nm * 1e-3 / (2.0 * std::sqrt(2.0 * std::log(2.0)));

    // Pump line rule: Gaussian-weighted trapezoid over +-5 sigma. The signal
    // peak moves by many pump linewidths per pump nanometre, so the node count
    // follows the pump sensitivity of the sinc argument to resolve its lobes.
    const double centre_um = grid_um.size() > 0 ? 0.5 * (grid_um[0] + grid_um[grid_um.size() - 1])
                                                : process.pump_wavelength_um * 1.6;
    std::vector<PumpRule> rules;
    for (const auto& off : offsets) {
        PumpRule rule;
        if (sigma_um == 0.0) {
            rule.pump_um = {process.pump_wavelength_um};
            rule.weight = {1.0};
        } else {
            double anchor = centre_um;
            try {
                anchor = solve_phasematch(process, model, combos[rules.size()].combo, options.window);
            } catch (const NoPhasematchError&) {
            }
            const double h = 1e-3 * sigma_um;
            const double dx_dpump =
                std::abs(phase_mismatch_at_pump(process, model, process.pump_wavelength_um + h, anchor, off) -
                         phase_mismatch_at_pump(process, model, process.pump_wavelength_um - h, anchor, off)) /
                (2.0 * h) * half_length_um;
            const double span = 10.0 * sigma_um;
            const int n = std::clamp(static_cast<int>(std::ceil(dx_dpump * span / 0.2)) | 1, 5, 20001);
            double total = 0.0;
            for (int k = 0; k < n; ++k) {
                const double u = -5.0 + 10.0 * k / (n - 1);
                rule.pump_um.push_back(process.pump_wavelength_um + u * sigma_um);
                rule.weight.push_back(std::exp(-0.5 * u * u));
                total += rule.weight.back();
            }
            for (double& w : rule.weight) w /= total;
        }
        rules.push_back(std::move(rule));
    }

    auto intensity = [&](double s) {
        double total = 0.0;
        for (std::size_t c = 0; c < combos.size(); ++c) {
            double avg = 0.0;
            for (std::size_t k = 0; k < rules[c].pump_um.size(); ++k) {
                const double x =
                    phase_mismatch_at_pump(process, model, rules[c].pump_um[k], s, offsets[c]) *
                    half_length_um;
                avg += rules[c].weight[k] * sinc(x) * sinc(x);
            }
            total += combos[c].weight * avg;
        }
        return total;
    };

    SpdcSpectrum out;
    out.process = process;
    out.wavelength_um = grid_um;
    out.intensity.resize(grid_um.size());
    for (Eigen::Index i = 0; i < grid_um.size(); ++i) out.intensity[i] = intensity(grid_um[i]);

    // Continuous peak: refine the summed curve around each combo root.
    double peak = 0.0;
    for (std::size_t c = 0; c < combos.size(); ++c) {
        if (combos[c].weight == 0.0) continue;
        double root = 0.0;
        try {
            root = solve_phasematch(process, model, combos[c].combo, options.window);
        } catch (const NoPhasematchError&) {
            continue;
        }
        const double h = 1e-6;
        const double slope = std::abs(
            (phase_mismatch_at_pump(process, model, process.pump_wavelength_um, root + h,
                                    offsets[c]) -
             phase_mismatch_at_pump(process, model, process.pump_wavelength_um, root - h,
                                    offsets[c])) /
            (2.0 * h));
        const double lobe = slope > 0.0 ? std::numbers::pi / (slope * half_length_um) : 1e-3;
        peak = std::max(peak, golden_maximize(intensity, root - lobe, root + lobe));
    }
    if (grid_um.size() > 0) peak = std::max(peak, out.intensity.maxCoeff());
    if (peak > 0.0) out.intensity /= peak;

    if (options.background.size() != 0) {
        out.intensity += options.background;
        const double m = out.intensity.maxCoeff();
        if (!(out.intensity.minCoeff() >= 0.0))
            throw DomainError("background curve must be non-negative");
        if (m > 0.0) out.intensity /= m;
    }
    return out;
}

QpmProcess calibrate_offset(double measured_signal_um, const QpmProcess& process,
                            const SellmeierModel& model, OffsetConvention convention,
                            const SearchWindow& window) {
    if (!(measured_signal_um > window.min_um && measured_signal_um < window.max_um))
        throw CalibrationError("measured peak " + num(measured_signal_um) +
                               " um lies outside the search window [" + num(window.min_um) + ", " +
                               num(window.max_um) + "] um");
    double current = 0.0;
    try {
        current = solve_phasematch(process, model, ModeCombo::fundamental(), window);
    } catch (const NoPhasematchError& e) {
        throw CalibrationError(std::string("calibration needs a fundamental root: ") + e.what());
    }

    QpmProcess out = process;
    if (convention == OffsetConvention::PeakShift) {
        out.peak_shift_um += measured_signal_um - current;
    } else {
        // dk is linear in the signal index offset with slope -2 pi / l_s.
        const double dk = phase_mismatch(process, model, measured_signal_um);
        const double delta = dk * (measured_signal_um - process.peak_shift_um) / kTwoPi;
        if (out.mode_offsets.find(ModeCombo::fundamental()) == out.mode_offsets.end())
            out.mode_offsets.emplace(ModeCombo::fundamental(), ModeOffsets{});
        for (auto& [combo, off] : out.mode_offsets) off.signal += delta;
    }

    double root = 0.0;
    try {
        root = solve_phasematch(out, model, ModeCombo::fundamental(), window);
    } catch (const NoPhasematchError& e) {
        throw CalibrationError(std::string("calibrated root left the search window: ") + e.what());
    }
    if (std::abs(root - measured_signal_um) > 1e-6)
        throw CalibrationError("calibrated fundamental root " + num(root) +
                               " um does not reproduce the measured peak " +
                               num(measured_signal_um) + " um");
    return out;
}

}  // namespace hsps
