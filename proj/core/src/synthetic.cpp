#include "tsmix/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

namespace {

constexpr double kCoefA = 0.6;
constexpr double kCoefB = -0.4;
constexpr double kSignalNoise = 0.05;
constexpr double kInputNoise = 0.08;
constexpr double kNoiseOffset = 0.5;
constexpr double kNoiseSpread = 0.5;

struct Regime {
    double center_a;
    double center_b;
    double period_a;
    double period_b;
    double amplitude_a;
    double amplitude_b;
};

Regime regime_params(std::size_t r) {
    Regime g{};
    g.center_a = 3.0 * static_cast<double>(r % 4);
    g.center_b = 3.0 * static_cast<double>(r / 4);
    g.period_a = 4.0 + 3.0 * static_cast<double>(r);
    g.period_b = 4.0 + 3.0 * static_cast<double>((5 * r + 3) % 12);
    g.amplitude_a = 0.3 + 0.1 * static_cast<double>((7 * r) % 12);
    g.amplitude_b = 0.3 + 0.1 * static_cast<double>((5 * r + 1) % 12);
    return g;
}

void append_profile(RawTable& table, std::int64_t id, const Regime& g, std::size_t length, bool linear_target,
                    double noise_level, Rng& rng) {
    const double phase_a = 2.0 * std::numbers::pi * uniform01(rng);
    const double phase_b = 2.0 * std::numbers::pi * uniform01(rng);
    for (std::size_t t = 0; t < length; ++t) {
        const double tt = static_cast<double>(t);
        const double a = g.center_a + g.amplitude_a * std::sin(2.0 * std::numbers::pi * tt / g.period_a + phase_a) +
                         kInputNoise * standard_normal(rng);
        const double b = g.center_b + g.amplitude_b * std::cos(2.0 * std::numbers::pi * tt / g.period_b + phase_b) +
                         kInputNoise * standard_normal(rng);
        const double y = linear_target ? kCoefA * a + kCoefB * b + kSignalNoise * standard_normal(rng)
                                       : noise_level + kNoiseSpread * standard_normal(rng);
        table.profile_ids.push_back(id);
        table.values.data.insert(table.values.data.end(), {a, b, y});
        ++table.values.rows;
    }
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
    if (spec.regimes == 0) throw Error(ErrorKind::invalid_argument, "synthetic corpus needs at least one regime");
    if (spec.train_profile_length < spec.window_length || spec.eval_profile_length < spec.window_length) {
        throw Error(ErrorKind::invalid_argument, "synthetic profiles are shorter than the window length");
    }
    SyntheticCorpus corpus;
    corpus.signal_regimes.insert(spec.signal_regimes.begin(), spec.signal_regimes.end());
    for (const auto r : corpus.signal_regimes) {
        if (r >= spec.regimes) throw Error(ErrorKind::invalid_argument, "signal regime id out of range");
    }

    RawTable& table = corpus.table;
    table.id_column = "profile_id";
    table.column_names = {"x_a", "x_b", "y"};
    table.roles = {ColumnRole::input, ColumnRole::input, ColumnRole::target};
    table.values.cols = 3;

    Rng rng(derive_seed(spec.seed, "synthetic"));
    // Noise regimes hover around the law's value at their centre but ignore
    // the within-regime input movement.
    std::vector<double> noise_level(spec.regimes);
    for (std::size_t r = 0; r < spec.regimes; ++r) {
        const Regime g = regime_params(r);
        noise_level[r] = kCoefA * g.center_a + kCoefB * g.center_b + (uniform01(rng) - 0.5) * kNoiseOffset;
    }

    for (std::size_t r = 0; r < spec.regimes; ++r) {
        const Regime g = regime_params(r);
        const bool signal = corpus.signal_regimes.contains(r);
        for (std::size_t j = 0; j < spec.train_profiles_per_regime; ++j) {
            const auto id = static_cast<std::int64_t>(100 + 10 * r + j);
            append_profile(table, id, g, spec.train_profile_length, signal, noise_level[r], rng);
            corpus.regime_of_profile[id] = r;
        }
    }
    for (std::size_t r = 0; r < spec.regimes; ++r) {
        const Regime g = regime_params(r);
        const auto val_id = static_cast<std::int64_t>(1000 + r);
        const auto test_id = static_cast<std::int64_t>(2000 + r);
        append_profile(table, val_id, g, spec.eval_profile_length, true, 0.0, rng);
        append_profile(table, test_id, g, spec.eval_profile_length, true, 0.0, rng);
        corpus.regime_of_profile[val_id] = r;
        corpus.regime_of_profile[test_id] = r;
        corpus.split.val_profiles.insert(val_id);
        corpus.split.test_profiles.insert(test_id);
    }
    return corpus;
}

}  // namespace tsmix
