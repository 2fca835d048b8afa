#include "hsps/pairsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "hsps/error.hpp"

namespace hsps {

namespace {

void check_probability(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0, 1]");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Clicks {
    std::array<bool, 3> fired{};
    std::array<std::int64_t, 3> offset_ps{};
};

// Draws pulses that produce at least one click, skipping the silent ones with
// a geometric gap. Conditioning on "something happened" splits into
// (n >= 1, unconditional noise) and (n = 0, at least one noise click).
class PulseSampler {
public:
    PulseSampler(const SourceModel& source, const ChannelModel& channel)
        : source_(source), channel_(channel) {
        const double mu = source.mean_pairs_per_pulse;
        p_zero_ = source.statistics == PhotonStatistics::Thermal ? 1.0 / (1.0 + mu)
                                                                 : std::exp(-mu);
        p_pair_ = source.statistics == PhotonStatistics::Thermal ? mu / (1.0 + mu)
                                                                 : -std::expm1(-mu);
        double all_quiet = 1.0;
        for (int k = 0; k < 3; ++k) {
            noise_[k] = channel.noise_prob(static_cast<Channel>(k));
            all_quiet *= 1.0 - noise_[k];
        }
        for (int k = 2; k >= 0; --k)
            quiet_from_[k] = (1.0 - noise_[k]) * (k < 2 ? quiet_from_[k + 1] : 1.0);
        p_any_ = 1.0 - p_zero_ * all_quiet;
        if (all_quiet >= 1.0)
            p_pair_given_any_ = 1.0;
        else
            p_pair_given_any_ = p_any_ > 0.0 ? std::min(1.0, p_pair_ / p_any_) : 0.0;
        a_ = channel.signal_detection();
        q1_ = channel.idler1_detection();
        q2_ = channel.idler2_detection();
        half_gate_ = 0.5 * channel.gate_width_ps;
    }

    // Visits (pulse_index, clicks) for every non-silent pulse in [first, end).
    template <class Visit>
    void run(std::uint64_t first, std::uint64_t end, std::uint64_t seed, Visit&& visit) const {
        if (p_any_ <= 0.0) return;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, 1.0);
        const bool every_pulse = p_any_ >= 1.0;
        std::geometric_distribution<std::uint64_t> gap(every_pulse ? 0.5 : p_any_);
        std::uint64_t pulse = first;
        Clicks clicks;
        while (true) {
            if (!every_pulse) {
                const std::uint64_t g = gap(rng);
                if (g >= end - pulse) break;
                pulse += g;
            } else if (pulse >= end) {
                break;
            }
            sample(rng, uni, jitter, clicks);
            visit(pulse, clicks);
            if (++pulse >= end) break;
        }
    }

private:
    template <class Rng>
    std::uint64_t positive_pair_number(Rng& rng, std::uniform_real_distribution<double>& uni) const {
        const double mu = source_.mean_pairs_per_pulse;
        if (source_.statistics == PhotonStatistics::Thermal) {
            std::geometric_distribution<std::uint64_t> g(p_zero_);
            return 1 + g(rng);
        }
        // Zero-truncated Poisson by inversion.
        const double target = uni(rng) * p_pair_;
        double term = std::exp(-mu) * mu;
        double cumulative = term;
        std::uint64_t n = 1;
        while (cumulative < target && n < 100000) {
            ++n;
            term *= mu / double(n);
            cumulative += term;
            if (term == 0.0) break;
        }
        return n;
    }

    template <class Rng>
    void sample(Rng& rng, std::uniform_real_distribution<double>& uni,
                std::normal_distribution<double>& jitter, Clicks& out) const {
        std::uint64_t n = 0;
        std::array<bool, 3> noise{};
        if (uni(rng) < p_pair_given_any_) {
            n = positive_pair_number(rng, uni);
            for (int k = 0; k < 3; ++k) noise[k] = noise_[k] > 0.0 && uni(rng) < noise_[k];
        } else {
            // At least one noise click: decide detectors in order, each
            // conditioned on at least one click among the remaining ones.
            bool any = false;
            for (int k = 0; k < 3; ++k) {
                if (any) {
                    noise[k] = noise_[k] > 0.0 && uni(rng) < noise_[k];
                } else {
                    const double p = noise_[k] / (1.0 - quiet_from_[k]);
                    noise[k] = uni(rng) < p;
                    any = noise[k];
                }
            }
        }

        std::array<bool, 3> photon{};
        if (n > 0) {
            photon[0] = a_ > 0.0 && uni(rng) < -std::expm1(double(n) * std::log1p(-a_));
            if (q1_ + q2_ > 0.0) {
                for (std::uint64_t k = 0; k < n && !(photon[1] && photon[2]); ++k) {
                    const double u = uni(rng);
                    if (u < q1_)
                        photon[1] = true;
                    else if (u < q1_ + q2_)
                        photon[2] = true;
                }
            }
        }
        for (int k = 0; k < 3; ++k) {
            out.fired[k] = photon[k] || noise[k];
            if (!out.fired[k]) continue;
            if (photon[k]) {
                out.offset_ps[k] = source_.pulse_jitter_ps > 0.0
                                       ? std::llround(source_.pulse_jitter_ps * jitter(rng))
                                       : 0;
            } else {
                out.offset_ps[k] = std::llround((2.0 * uni(rng) - 1.0) * half_gate_);
            }
        }
    }

    SourceModel source_;
    ChannelModel channel_;
    double p_zero_ = 1.0, p_pair_ = 0.0, p_any_ = 0.0, p_pair_given_any_ = 0.0;
    std::array<double, 3> noise_{};
    std::array<double, 3> quiet_from_{};
    double a_ = 0.0, q1_ = 0.0, q2_ = 0.0, half_gate_ = 0.0;
};

// Runs every block through `make` (block -> result), possibly in parallel, and
// returns results in block order.
template <class Result, class Make>
std::vector<Result> run_blocks(std::uint64_t n_pulses, const SimulationOptions& options,
                               Make&& make) {
    if (options.block_size == 0) throw ConfigError("block_size must be positive");
    const std::uint64_t n_blocks = (n_pulses + options.block_size - 1) / options.block_size;
    std::vector<Result> results(n_blocks);
    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::uint64_t>(n_blocks, 1))));
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (std::uint64_t b = next++; b < n_blocks; b = next++) {
            const std::uint64_t first = b * options.block_size;
            const std::uint64_t end = std::min(n_pulses, first + options.block_size);
            results[b] = make(b, first, end);
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return results;
}

}  // namespace

void SourceModel::validate() const {
    if (!(mean_pairs_per_pulse >= 0.0) || !std::isfinite(mean_pairs_per_pulse))
        throw ConfigError("mean_pairs_per_pulse must be a finite value >= 0");
    if (!(repetition_rate_hz > 0.0)) throw ConfigError("repetition_rate_hz must be > 0");
    if (!(pulse_jitter_ps >= 0.0)) throw ConfigError("pulse_jitter_ps must be >= 0");
}

void ChannelModel::validate() const {
    check_probability(signal_transmission, "signal_transmission");
    check_probability(idler_transmission, "idler_transmission");
    check_probability(splitter_ratio, "splitter_ratio");
    for (int k = 0; k < 3; ++k) {
        check_probability(detector_efficiency[k], "detector efficiency");
        check_probability(dark_count_prob[k], "dark count probability");
        check_probability(background_prob[k], "background probability");
    }
    if (!(gate_width_ps >= 0.0)) throw ConfigError("gate_width_ps must be >= 0");
}

double ChannelModel::noise_prob(Channel c) const {
    const auto k = static_cast<std::size_t>(c);
    return 1.0 - (1.0 - dark_count_prob[k]) * (1.0 - background_prob[k]);
}

Eigen::VectorXd pair_number_distribution(const SourceModel& source, int n_max) {
    source.validate();
    if (n_max < 1) throw ConfigError("n_max must be >= 1");
    const double mu = source.mean_pairs_per_pulse;
    Eigen::VectorXd p(n_max + 1);
    if (source.statistics == PhotonStatistics::Thermal) {
        const double ratio = mu / (1.0 + mu);
        p[0] = 1.0 / (1.0 + mu);
        for (int n = 1; n <= n_max; ++n) p[n] = p[n - 1] * ratio;
    } else {
        p[0] = std::exp(-mu);
        for (int n = 1; n <= n_max; ++n) p[n] = p[n - 1] * mu / n;
    }
    double tail = 0.0;
    if (source.statistics == PhotonStatistics::Thermal) {
        tail = std::pow(mu / (1.0 + mu), n_max + 1);
    } else {
        // Upper bound of the Poisson tail by a geometric series.
        const double next = p[n_max] * mu / (n_max + 1);
        const double r = mu / (n_max + 2);
        tail = r < 1.0 ? next / (1.0 - r) : INFINITY;
    }
    if (!(tail < kMaxTruncatedTail))
        throw TruncationError("truncated tail mass " + std::to_string(tail) +
                              " exceeds 1e-12 at n_max = " + std::to_string(n_max) +
                              "; raise n_max");
    return p / p.sum();
}

ClickProbabilities click_probabilities(const SourceModel& source, const ChannelModel& channel,
                                       int n_max) {
    channel.validate();
    const Eigen::VectorXd p = pair_number_distribution(source, n_max);
    const double a = channel.signal_detection();
    const double q1 = channel.idler1_detection();
    const double q2 = channel.idler2_detection();
    std::array<double, 3> quiet;
    for (int k = 0; k < 3; ++k) quiet[k] = 1.0 - channel.noise_prob(static_cast<Channel>(k));

    const Eigen::ArrayXd n = Eigen::ArrayXd::LinSpaced(n_max + 1, 0.0, double(n_max));
    // Probability that every detector in the mask stays silent.
    auto silent = [&](bool s, bool i1, bool i2) {
        const double x = (s ? 1.0 - a : 1.0) * (1.0 - (i1 ? q1 : 0.0) - (i2 ? q2 : 0.0));
        const double photons = (p.array() * Eigen::pow(x, n)).sum();
        return photons * (s ? quiet[0] : 1.0) * (i1 ? quiet[1] : 1.0) * (i2 ? quiet[2] : 1.0);
    };
    const double z_s = silent(true, false, false), z_1 = silent(false, true, false),
                 z_2 = silent(false, false, true), z_s1 = silent(true, true, false),
                 z_s2 = silent(true, false, true), z_12 = silent(false, true, true),
                 z_s12 = silent(true, true, true);

    ClickProbabilities out;
    out.s = 1.0 - z_s;
    out.i1 = 1.0 - z_1;
    out.i2 = 1.0 - z_2;
    out.s_i1 = 1.0 - z_s - z_1 + z_s1;
    out.s_i2 = 1.0 - z_s - z_2 + z_s2;
    out.i1_i2 = 1.0 - z_1 - z_2 + z_12;
    out.s_i1_i2 = 1.0 - z_s - z_1 - z_2 + z_s1 + z_s2 + z_12 - z_s12;
    return out;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(master_seed ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

std::vector<PulseOutcome> simulate_outcomes(const SourceModel& source, const ChannelModel& channel,
                                            std::uint64_t n_pulses, std::uint64_t seed,
                                            const SimulationOptions& options) {
    source.validate();
    channel.validate();
    const PulseSampler sampler(source, channel);
    auto blocks = run_blocks<std::vector<PulseOutcome>>(
        n_pulses, options, [&](std::uint64_t b, std::uint64_t first, std::uint64_t end) {
            std::vector<PulseOutcome> out;
            sampler.run(first, end, derive_seed(seed, b), [&](std::uint64_t pulse, const Clicks& c) {
                if (c.fired[0] || c.fired[1] || c.fired[2])
                    out.push_back({pulse, c.fired[0], c.fired[1], c.fired[2]});
            });
            return out;
        });
    std::vector<PulseOutcome> merged;
    for (auto& b : blocks) merged.insert(merged.end(), b.begin(), b.end());
    return merged;
}

OutcomeTally tally_outcomes(const SourceModel& source, const ChannelModel& channel,
                            std::uint64_t n_pulses, std::uint64_t seed,
                            const SimulationOptions& options) {
    source.validate();
    channel.validate();
    const PulseSampler sampler(source, channel);
    auto blocks = run_blocks<OutcomeTally>(
        n_pulses, options, [&](std::uint64_t b, std::uint64_t first, std::uint64_t end) {
            OutcomeTally t;
            t.n_pulses = end - first;
            sampler.run(first, end, derive_seed(seed, b), [&](std::uint64_t, const Clicks& c) {
                const bool s = c.fired[0], i1 = c.fired[1], i2 = c.fired[2];
                t.counts[0] += s;
                t.counts[1] += i1;
                t.counts[2] += i2;
                t.counts[3] += s && i1;
                t.counts[4] += s && i2;
                t.counts[5] += i1 && i2;
                t.counts[6] += s && i1 && i2;
            });
            return t;
        });
    OutcomeTally total;
    for (const auto& t : blocks) {
        total.n_pulses += t.n_pulses;
        for (int k = 0; k < 7; ++k) total.counts[k] += t.counts[k];
    }
    return total;
}

TagStream simulate_stream(const SourceModel& source, const ChannelModel& channel,
                          std::uint64_t n_pulses, std::uint64_t seed,
                          const SimulationOptions& options) {
    source.validate();
    channel.validate();
    if (n_pulses < 1) throw ConfigError("n_pulses must be >= 1");
    const PulseSampler sampler(source, channel);
    const double period_ps = source.pulse_period_ps();
    auto blocks = run_blocks<std::vector<TagEvent>>(
        n_pulses, options, [&](std::uint64_t b, std::uint64_t first, std::uint64_t end) {
            std::vector<TagEvent> out;
            sampler.run(first, end, derive_seed(seed, b), [&](std::uint64_t pulse, const Clicks& c) {
                const auto t0 = static_cast<std::int64_t>(std::llround(double(pulse) * period_ps));
                const std::size_t start = out.size();
                for (int k = 0; k < 3; ++k)
                    if (c.fired[k]) out.push_back({t0 + c.offset_ps[k], static_cast<Channel>(k)});
                std::sort(out.begin() + std::ptrdiff_t(start), out.end(),
                          [](const TagEvent& x, const TagEvent& y) {
                              return x.timestamp_ps != y.timestamp_ps
                                         ? x.timestamp_ps < y.timestamp_ps
                                         : x.channel < y.channel;
                          });
            });
            return out;
        });
    TagStream stream;
    stream.header.repetition_rate_hz = source.repetition_rate_hz;
    stream.header.n_pulses = n_pulses;
    stream.header.duration_s = double(n_pulses) / source.repetition_rate_hz;
    stream.header.seed = seed;
    stream.header.model_snapshot = describe(source, channel);
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.size();
    stream.events.reserve(total);
    for (auto& b : blocks) stream.events.insert(stream.events.end(), b.begin(), b.end());
    return stream;
}

std::string describe(const SourceModel& source, const ChannelModel& channel) {
    std::ostringstream os;
    os.precision(10);
    os << "mu=" << source.mean_pairs_per_pulse << " statistics="
       << (source.statistics == PhotonStatistics::Thermal ? "thermal" : "poissonian")
       << " rate_hz=" << source.repetition_rate_hz << " jitter_ps=" << source.pulse_jitter_ps
       << " eta_s=" << channel.signal_transmission << " eta_i=" << channel.idler_transmission
       << " split=" << channel.splitter_ratio << " det=" << channel.detector_efficiency[0] << ','
       << channel.detector_efficiency[1] << ',' << channel.detector_efficiency[2]
       << " dark=" << channel.dark_count_prob[0] << ',' << channel.dark_count_prob[1] << ','
       << channel.dark_count_prob[2] << " background=" << channel.background_prob[0] << ','
       << channel.background_prob[1] << ',' << channel.background_prob[2];
    return os.str();
}

}  // namespace hsps
