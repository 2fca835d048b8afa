#include "hsps/optimize.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace hsps {

namespace {

class Problem {
public:
    Problem(std::span<const TransmissionTarget> targets, const FilterStack& seed,
            const StackConstraints& c)
        : targets_(targets), stack_(seed), lo_(c.min_thickness_nm), hi_(c.max_thickness_nm) {}

    double operator()(const Eigen::VectorXd& x) {
        ++evaluations;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            stack_.layers[std::size_t(i)].thickness_nm = std::clamp(x[i], lo_, hi_);
        return stack_objective(stack_, targets_);
    }

    Eigen::VectorXd project(Eigen::VectorXd x) const { return x.cwiseMax(lo_).cwiseMin(hi_); }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    long evaluations = 0;

private:
    std::span<const TransmissionTarget> targets_;
    FilterStack stack_;
    double lo_, hi_;
};

// Scan [a, b] on a uniform grid, then golden-section refine around the best sample.
std::pair<double, double> line_minimize(const auto& f, double a, double b, int samples) {
    double best_t = a, best_f = f(a);
    const double step = (b - a) / samples;
    for (int k = 1; k <= samples; ++k) {
        const double t = a + k * step;
        const double v = f(t);
        if (v < best_f) {
            best_f = v;
            best_t = t;
        }
    }
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = std::max(a, best_t - step), hi = std::min(b, best_t + step);
    double c = hi - inv_phi * (hi - lo), d = lo + inv_phi * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if (fc < best_f) {
        best_f = fc;
        best_t = c;
    }
    if (fd < best_f) {
        best_f = fd;
        best_t = d;
    }
    return {best_t, best_f};
}

// Bound-projected Nelder-Mead. Returns the best vertex found.
std::pair<Eigen::VectorXd, double> nelder_mead(Problem& f, const Eigen::VectorXd& start,
                                               double f_start, double step, int max_evals) {
    const Eigen::Index n = start.size();
    std::vector<Eigen::VectorXd> simplex(std::size_t(n + 1), start);
    std::vector<double> values(std::size_t(n + 1), f_start);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& v = simplex[std::size_t(i + 1)];
        v[i] += (v[i] + step <= f.hi()) ? step : -step;
        v = f.project(v);
        values[std::size_t(i + 1)] = f(v);
    }
    std::vector<std::size_t> order(std::size_t(n + 1));
    const long budget_end = f.evaluations + max_evals;
    while (f.evaluations < budget_end) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(),
                          second = order[order.size() - 2];
        if (values[worst] - values[best] <= 1e-15 * (1.0 + values[best])) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k + 1 < order.size(); ++k) centroid += simplex[order[k]];
        centroid /= double(n);

        const Eigen::VectorXd reflected = f.project(centroid + (centroid - simplex[worst]));
        const double fr = f(reflected);
        if (fr < values[best]) {
            const Eigen::VectorXd expanded =
                f.project(centroid + 2.0 * (centroid - simplex[worst]));
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            const Eigen::VectorXd contracted =
                f.project(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = f(contracted);
            if (fc < values[worst]) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                for (std::size_t k = 0; k < simplex.size(); ++k) {
                    if (k == best) continue;
                    simplex[k] = f.project(simplex[best] + 0.5 * (simplex[k] - simplex[best]));
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    const auto best = std::size_t(std::min_element(values.begin(), values.end()) - values.begin());
    return {simplex[best], values[best]};
}

}  // namespace

double stack_objective(const FilterStack& stack, std::span<const TransmissionTarget> targets) {
    double total = 0.0;
    for (const auto& target : targets) {
        const double t = stack_transmission(stack, target.wavelength_nm).transmittance;
        double e = t - target.transmission;
        if (target.kind == TargetKind::AtMost) e = std::max(0.0, e);
        if (target.kind == TargetKind::AtLeast) e = std::min(0.0, e);
        total += target.weight * e * e;
    }
    return total;
}

FilterStack quarter_wave_seed(const MaterialIndex& incident, const MaterialIndex& exit,
                              std::span<const MaterialIndex> materials, std::size_t layers,
                              double reference_nm) {
    if (materials.empty()) throw ConfigError("quarter-wave seed needs at least one material");
    FilterStack stack;
    stack.incident = incident;
    stack.exit = exit;
    stack.design_reference_nm = reference_nm;
    for (std::size_t i = 0; i < layers; ++i) {
        const auto& m = materials[i % materials.size()];
        stack.layers.push_back({m, reference_nm / (4.0 * m.at(reference_nm * 1e-3))});
    }
    return stack;
}

OptimizationResult optimize_stack(std::span<const TransmissionTarget> targets,
                                  const StackConstraints& constraints,
                                  const FilterStack& seed_design, const OptimizerOptions& options) {
    if (targets.empty()) throw ConfigError("optimize_stack needs at least one target");
    if (constraints.materials.empty()) throw ConfigError("optimize_stack needs at least one material");
    if (constraints.max_layers < 1) throw ConfigError("max_layers must be >= 1");
    if (!(constraints.min_thickness_nm >= 0.0) ||
        !(constraints.max_thickness_nm > constraints.min_thickness_nm) ||
        constraints.max_thickness_nm >= kMaxLayerThicknessNm)
        throw ConfigError("invalid thickness bounds");
    if (seed_design.layers.size() > constraints.max_layers)
        throw ConfigError("seed design has " + std::to_string(seed_design.layers.size()) +
                          " layers, more than max_layers = " +
                          std::to_string(constraints.max_layers));
    for (const auto& layer : seed_design.layers) {
        const bool allowed =
            std::any_of(constraints.materials.begin(), constraints.materials.end(),
                        [&](const MaterialIndex& m) { return m.name() == layer.material.name(); });
        if (!allowed)
            throw ConfigError("seed layer material '" + layer.material.name() +
                              "' is not among the allowed materials");
    }
    for (const auto& t : targets) {
        if (!(t.wavelength_nm > 0.0) || !(t.weight >= 0.0) || t.transmission < 0.0 ||
            t.transmission > 1.0)
            throw ConfigError("invalid transmission target");
    }

    OptimizationResult result;
    result.stack = seed_design;
    Problem f(targets, seed_design, constraints);
    const Eigen::Index n = Eigen::Index(seed_design.layers.size());

    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = seed_design.layers[std::size_t(i)].thickness_nm;
    // A seed already inside the bounds is evaluated as given.
    const bool seed_in_bounds = (f.project(x) - x).cwiseAbs().maxCoeff() == 0.0 || n == 0;
    x = f.project(x);
    double best = n == 0 ? stack_objective(seed_design, targets) : f(x);
    result.trace.push_back(best);

    double reference_nm = 0.0;
    for (const auto& t : targets) reference_nm += t.wavelength_nm;
    reference_nm = seed_design.design_reference_nm.value_or(reference_nm / double(targets.size()));

    auto accept = [&](const Eigen::VectorXd& candidate, double value) {
        if (value < best) {
            best = value;
            x = candidate;
            result.trace.push_back(best);
            return true;
        }
        return false;
    };

    auto local_search = [&](Eigen::VectorXd start, double f_start) {
        Eigen::VectorXd cur = start;
        double fcur = f_start;
        for (int round = 0; round < options.max_rounds && fcur > options.tolerance; ++round) {
            const double f_round = fcur;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double nj =
                    seed_design.layers[std::size_t(i)].material.at(reference_nm * 1e-3);
                const double span = reference_nm / (4.0 * nj);
                const double a = std::max(f.lo(), cur[i] - span);
                const double b = std::min(f.hi(), cur[i] + span);
                Eigen::VectorXd trial = cur;
                auto along = [&](double t) {
                    trial[i] = t;
                    return f(trial);
                };
                auto [t, v] = line_minimize(along, a, b, 24);
                if (v < fcur) {
                    cur[i] = t;
                    fcur = v;
                    if (fcur < best) accept(cur, fcur);
                }
            }
            if (n > 0 && fcur > options.tolerance) {
                auto [y, fy] = nelder_mead(f, cur, fcur, 2.0, int(200 * n));
                if (fy < fcur) {
                    cur = y;
                    fcur = fy;
                    if (fcur < best) accept(cur, fcur);
                }
            }
            if (f_round - fcur <= 1e-10 * f_round) break;
        }
        return fcur;
    };

    if (n > 0 && best > options.tolerance) {
        local_search(x, best);
        std::mt19937_64 rng(options.seed);
        std::uniform_real_distribution<double> jitter(-options.restart_perturbation_nm,
                                                      options.restart_perturbation_nm);
        for (int r = 0; r < options.restarts && best > options.tolerance; ++r) {
            Eigen::VectorXd start = x;
            for (Eigen::Index i = 0; i < n; ++i) start[i] += jitter(rng);
            start = f.project(start);
            local_search(start, f(start));
        }
    }

    if (n > 0 && (best < result.trace.front() || !seed_in_bounds)) {
        for (Eigen::Index i = 0; i < n; ++i)
            result.stack.layers[std::size_t(i)].thickness_nm = x[i];
    }
    result.objective = best;
    result.evaluations = f.evaluations;
    return result;
}

}  // namespace hsps
