#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tsmix/clustering.hpp"
#include "tsmix/dataset.hpp"
#include "tsmix/embedding.hpp"
#include "tsmix/study.hpp"
#include "tsmix/synthetic.hpp"
#include "tsmix/trainer.hpp"

namespace tsmix {

struct PreparedTable {
    RawTable table;
    Scaler scaler;
    SplitReport split_report;
};

/// split -> EWMA -> fit scaler on train -> scale once.
PreparedTable preprocess_table(const RawTable& raw, const SplitSpec& split, std::span<const int> spans);

struct ClusteredWindows {
    /// Training window indices, ascending.
    std::vector<std::size_t> train_windows;
    /// Cluster id of each entry in train_windows.
    std::vector<std::size_t> train_clusters;
    /// Cluster id of every window (val/test assigned to the nearest centroid).
    std::vector<std::size_t> all_clusters;
    ClusterModel model;
};

/// z-normalizes embeddings with training-window statistics, fits k-means on
/// the training windows and assigns every window.
ClusteredWindows cluster_embeddings(const EmbeddingMatrix& embeddings, const WindowSet& windows,
                                    const KMeansOptions& options);

/// Seeds a trial's mixture draw and proxy training are derived from.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial_id) noexcept;
std::uint64_t baseline_seed(std::uint64_t master_seed) noexcept;

struct DrawnMixture {
    /// Window indices, ascending.
    std::vector<std::size_t> windows;
    std::vector<std::size_t> counts;
};

std::optional<DrawnMixture> draw_mixture(std::span<const std::size_t> train_windows,
                                         std::span<const std::size_t> train_clusters, const WeightVector& weights,
                                         std::uint64_t trial_seed);

/// Closure used by the study: build the mixture, train the proxy, return the
/// validation objective.
TrialObjective make_mixture_objective(const TrainingData& data, const ClusteredWindows& clusters,
                                      const TrainConfig& train, const ExternalTrainerConfig* external = nullptr);

/// Trains on every training window with the baseline seed.
MixtureScores score_full_data(const TrainingData& data, std::span<const std::size_t> train_windows,
                              const TrainConfig& train, std::uint64_t master_seed, bool with_test,
                              const ExternalTrainerConfig* external = nullptr);

/// Re-draws and re-trains the mixture of a recorded trial.
MixtureScores score_trial(const TrainingData& data, const ClusteredWindows& clusters, const TrainConfig& train,
                          std::uint64_t master_seed, const TrialRecord& trial, bool with_test,
                          const ExternalTrainerConfig* external = nullptr);

struct BenchmarkConfig {
    SyntheticSpec corpus;
    std::size_t k = 12;
    std::size_t trials = 60;
    std::size_t jobs = 1;
    SamplerKind sampler = SamplerKind::tpe;
    std::uint64_t seed = 0;
    TrainConfig train;
};

struct BenchmarkOutcome {
    StudyResult study;
    double best_val_mse = 0.0;
    double baseline_val_mse = 0.0;
    std::size_t best_n_mix = 0;
    std::size_t total_train_windows = 0;
    double signal_weight_mean = 0.0;
    double noise_weight_mean = 0.0;
    /// Clusters whose majority regime is a signal regime.
    std::vector<std::size_t> signal_clusters;
};

/// Generates the planted-regime corpus and runs preprocessing, featurization,
/// clustering, the study and the full-data baseline in memory.
BenchmarkOutcome run_synthetic_benchmark(const BenchmarkConfig& config);

}  // namespace tsmix
