#include "tsmix/experiment.hpp"

#include <algorithm>
#include <map>

#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

PreparedTable preprocess_table(const RawTable& raw, const SplitSpec& split, std::span<const int> spans) {
    PreparedTable out;
    RawTable tagged = split_by_profile(raw, split, &out.split_report);
    RawTable derived = derive_ewma(tagged, spans);
    out.scaler = fit_scaler(derived, split);
    out.table = apply_scaler(derived, out.scaler);
    return out;
}

ClusteredWindows cluster_embeddings(const EmbeddingMatrix& embeddings, const WindowSet& windows,
                                    const KMeansOptions& options) {
    if (embeddings.rows != windows.size()) {
        throw Error(ErrorKind::invalid_argument, "embedding matrix has " + std::to_string(embeddings.rows) +
                                                     " rows but there are " + std::to_string(windows.size()) +
                                                     " windows");
    }
    ClusteredWindows out;
    out.train_windows = windows.indices(Split::train);
    if (out.train_windows.empty()) throw Error(ErrorKind::degenerate, "no training windows to cluster");

    const Matrix points = embeddings.as_matrix();
    const auto standardizer = Standardizer::fit(points, out.train_windows);
    const Matrix z = standardizer.apply(points);
    out.model = kmeans_fit(select_rows(z, out.train_windows), options);
    out.train_clusters = out.model.assignments;

    out.all_clusters = assign(z, out.model.centroids);
    for (std::size_t i = 0; i < out.train_windows.size(); ++i) {
        out.all_clusters[out.train_windows[i]] = out.train_clusters[i];
    }
    return out;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_id) noexcept {
    return derive_seed(master_seed, "trial", trial_id);
}

std::uint64_t baseline_seed(std::uint64_t master_seed) noexcept { return derive_seed(master_seed, "baseline"); }

std::optional<DrawnMixture> draw_mixture(std::span<const std::size_t> train_windows,
                                         std::span<const std::size_t> train_clusters, const WeightVector& weights,
                                         std::uint64_t seed) {
    if (train_windows.size() != train_clusters.size()) {
        throw Error(ErrorKind::invalid_argument, "window and cluster lists differ in length");
    }
    auto index = build_mixture(train_clusters, weights, derive_seed(seed, "mixture"));
    if (!index) return std::nullopt;
    DrawnMixture out;
    out.counts = index->counts;
    const auto positions = index->flattened();
    out.windows.reserve(positions.size());
    for (const auto p : positions) out.windows.push_back(train_windows[p]);
    std::sort(out.windows.begin(), out.windows.end());
    return out;
}

namespace {

TrainConfig seeded(const TrainConfig& train, std::uint64_t seed) {
    TrainConfig cfg = train;
    cfg.seed = derive_seed(seed, "trainer");
    return cfg;
}

}  // namespace

TrialObjective make_mixture_objective(const TrainingData& data, const ClusteredWindows& clusters,
                                      const TrainConfig& train, const ExternalTrainerConfig* external) {
    return [&data, &clusters, train, external](const TrialContext& ctx) {
        auto mix = draw_mixture(clusters.train_windows, clusters.train_clusters, ctx.weights, ctx.seed);
        if (!mix) throw TrialFailure("empty mixture: every cluster rounds to zero windows");
        const TrainConfig cfg = seeded(train, ctx.seed);
        const auto scores = train_and_score(mix->windows, data, cfg, false, external, {ctx.trial_id, cfg.seed, "trial"});
        TrialOutcome outcome;
        outcome.objective = scores.val.avg_mse;
        outcome.n_mix = mix->windows.size();
        outcome.counts = std::move(mix->counts);
        outcome.targets = scores.val.targets;
        return outcome;
    };
}

MixtureScores score_full_data(const TrainingData& data, std::span<const std::size_t> train_windows,
                              const TrainConfig& train, std::uint64_t master_seed, bool with_test,
                              const ExternalTrainerConfig* external) {
    const TrainConfig cfg = seeded(train, baseline_seed(master_seed));
    return train_and_score(train_windows, data, cfg, with_test, external, {0, cfg.seed, "baseline"});
}

MixtureScores score_trial(const TrainingData& data, const ClusteredWindows& clusters, const TrainConfig& train,
                          std::uint64_t master_seed, const TrialRecord& trial, bool with_test,
                          const ExternalTrainerConfig* external) {
    const auto seed = trial_seed(master_seed, trial.id);
    auto mix = draw_mixture(clusters.train_windows, clusters.train_clusters, trial.weights, seed);
    if (!mix) throw Error(ErrorKind::degenerate, "trial " + std::to_string(trial.id) + " has an empty mixture");
    const TrainConfig cfg = seeded(train, seed);
    return train_and_score(mix->windows, data, cfg, with_test, external, {trial.id, cfg.seed, "best"});
}

BenchmarkOutcome run_synthetic_benchmark(const BenchmarkConfig& config) {
    SyntheticSpec spec = config.corpus;
    spec.seed = derive_seed(config.seed, "corpus");
    const auto corpus = generate_synthetic_corpus(spec);

    const std::vector<int> spans = {16};
    const auto prepared = preprocess_table(corpus.table, corpus.split, spans);
    const auto data = prepare_training_data(make_windows(prepared.table, spec.window_length, 1));
    const auto embeddings = to_embedding(data.features);

    KMeansOptions km;
    km.k = config.k;
    km.seed = derive_seed(config.seed, "kmeans");
    const auto clusters = cluster_embeddings(embeddings, data.windows, km);

    StudyConfig sc;
    sc.n_trials = config.trials;
    sc.jobs = config.jobs;
    sc.sampler = config.sampler;
    sc.seed = config.seed;
    sc.k = config.k;

    BenchmarkOutcome out;
    out.study = run_study(sc, make_mixture_objective(data, clusters, config.train));
    const auto& best = out.study.best();
    out.best_val_mse = best.objective;
    out.best_n_mix = best.n_mix;
    out.total_train_windows = clusters.train_windows.size();
    out.baseline_val_mse = score_full_data(data, clusters.train_windows, config.train, config.seed, false).val.avg_mse;

    // Majority regime per cluster decides whether a cluster counts as signal.
    std::vector<std::map<std::size_t, std::size_t>> votes(config.k);
    for (std::size_t i = 0; i < clusters.train_windows.size(); ++i) {
        const auto profile = data.windows.windows[clusters.train_windows[i]].profile;
        ++votes[clusters.train_clusters[i]][corpus.regime_of_profile.at(profile)];
    }
    double signal_sum = 0.0, noise_sum = 0.0;
    std::size_t noise_n = 0;
    for (std::size_t c = 0; c < config.k; ++c) {
        if (votes[c].empty()) continue;
        const auto top = std::max_element(votes[c].begin(), votes[c].end(),
                                          [](const auto& a, const auto& b) { return a.second < b.second; });
        if (corpus.signal_regimes.contains(top->first)) {
            out.signal_clusters.push_back(c);
            signal_sum += best.weights[c];
        } else {
            noise_sum += best.weights[c];
            ++noise_n;
        }
    }
    if (!out.signal_clusters.empty()) signal_sum /= static_cast<double>(out.signal_clusters.size());
    if (noise_n > 0) noise_sum /= static_cast<double>(noise_n);
    out.signal_weight_mean = signal_sum;
    out.noise_weight_mean = noise_sum;
    return out;
}

}  // namespace tsmix
