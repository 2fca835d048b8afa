#pragma once

#include <compare>
#include <map>
#include <span>
#include <string>

#include <Eigen/Core>

#include "hsps/dispersion.hpp"

namespace hsps {

// Opaque label of one (signal, idler, pump) spatial-mode combination.
struct ModeCombo {
    std::string signal = "00";
    std::string idler = "00";
    std::string pump = "00";

    static ModeCombo fundamental() { return {}; }
    std::string label() const { return signal + "/" + idler + "/" + pump; }
    auto operator<=>(const ModeCombo&) const = default;
};

// Additive effective-index offsets of the guided modes over the bulk index.
struct ModeOffsets {
    double signal = 0.0;
    double idler = 0.0;
    double pump = 0.0;
};

struct QpmProcess {
    double pump_wavelength_um = 0.532;
    double poling_period_um = 7.05;
    double crystal_length_mm = 15.0;
    double temperature_c = 80.0;
    std::map<ModeCombo, ModeOffsets> mode_offsets;
    // Wavelength shift applied to all computed signal peaks (PeakShift calibration).
    double peak_shift_um = 0.0;

    void validate() const;
    // Offsets of a combo. The fundamental combo defaults to zero offsets; any
    // other combo must be registered.
    ModeOffsets offsets(const ModeCombo& combo) const;
};

struct SearchWindow {
    double min_um = 0.6;
    double max_um = 1.05;
    int scan_points = 2000;
};

// Energy conservation: 1/l_i = 1/l_p - 1/l_s.
double idler_from_signal(double pump_um, double signal_um);

// Delta k in rad/um for the given signal wavelength and mode combination.
double phase_mismatch(const QpmProcess& process, const SellmeierModel& model, double signal_um,
                      const ModeCombo& combo = ModeCombo::fundamental());

// Lowest phasematched signal wavelength inside the window. Sign changes are
// located on a uniform scan, then refined by bisection to double precision.
double solve_phasematch(const QpmProcess& process, const SellmeierModel& model,
                        const ModeCombo& combo = ModeCombo::fundamental(),
                        const SearchWindow& window = {});

double solve_period(double pump_um, double signal_um, const SellmeierModel& model,
                    double temperature_c, const ModeOffsets& offsets = {});

// sin(x)/x with the removable singularity handled by a series below |x| < 1e-4.
double sinc(double x);

struct WeightedCombo {
    ModeCombo combo;
    double weight = 1.0;
};

struct SpectrumOptions {
    // Pump FWHM in nm. Zero disables pump-linewidth averaging; otherwise the
    // spectrum is averaged over the Gaussian pump line with enough nodes to
    // resolve the sinc lobes the line sweeps across.
    double pump_fwhm_nm = 0.0;
    // Optional additive background sampled on the same grid (e.g. Cerenkov).
    Eigen::VectorXd background;
    SearchWindow window;
};

struct SpdcSpectrum {
    Eigen::VectorXd wavelength_um;
    Eigen::VectorXd intensity;
    QpmProcess process;
};

// Sum of weighted sinc^2(dk L / 2) over the combos, divided by the continuous
// peak of that sum (located at and around the combo roots), so values do not
// depend on the grid. With a background the sum plus background is
// renormalized to its maximum on the grid.
SpdcSpectrum spdc_spectrum(const QpmProcess& process, const SellmeierModel& model,
                           std::span<const WeightedCombo> combos, const Eigen::VectorXd& grid_um,
                           const SpectrumOptions& options = {});

enum class OffsetConvention {
    // One common offset added to the signal index offset of every combo.
    SignalIndex,
    // One common wavelength shift added to every computed peak.
    PeakShift,
};

// Returns a copy of the process whose fundamental phasematching root sits at
// the measured signal peak.
QpmProcess calibrate_offset(double measured_signal_um, const QpmProcess& process,
                            const SellmeierModel& model,
                            OffsetConvention convention = OffsetConvention::SignalIndex,
                            const SearchWindow& window = {});

}  // namespace hsps
