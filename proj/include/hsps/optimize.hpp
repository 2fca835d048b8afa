#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hsps/thinfilm.hpp"

namespace hsps {

enum class TargetKind { Equal, AtMost, AtLeast };

// One transmission target. Inequality targets contribute only when violated.
struct TransmissionTarget {
    double wavelength_nm = 0.0;
    double transmission = 0.0;
    double weight = 1.0;
    TargetKind kind = TargetKind::Equal;
};

struct StackConstraints {
    std::size_t max_layers = 40;
    std::vector<MaterialIndex> materials;
    double min_thickness_nm = 5.0;
    double max_thickness_nm = 1000.0;
};

struct OptimizerOptions {
    int max_rounds = 60;
    // Random restarts around the best design; zero keeps the run fully local.
    int restarts = 0;
    std::uint64_t seed = 0;
    double restart_perturbation_nm = 15.0;
    double tolerance = 1e-14;
};

struct OptimizationResult {
    FilterStack stack;
    double objective = 0.0;
    // Best objective after every accepted iterate; non-increasing.
    std::vector<double> trace;
    long evaluations = 0;
};

// Weighted squared transmission error of a stack.
double stack_objective(const FilterStack& stack, std::span<const TransmissionTarget> targets);

// Alternating materials, quarter-wave thick at the reference wavelength.
FilterStack quarter_wave_seed(const MaterialIndex& incident, const MaterialIndex& exit,
                              std::span<const MaterialIndex> materials, std::size_t layers,
                              double reference_nm);

// Coordinate descent (bracketed scan plus golden-section refinement per layer)
// alternating with a bound-projected Nelder-Mead polish over all thicknesses.
// Only improving iterates are accepted; deterministic for a given seed.
OptimizationResult optimize_stack(std::span<const TransmissionTarget> targets,
                                  const StackConstraints& constraints,
                                  const FilterStack& seed_design,
                                  const OptimizerOptions& options = {});

}  // namespace hsps
