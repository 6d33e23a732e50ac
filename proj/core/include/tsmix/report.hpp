#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsmix/dataset.hpp"
#include "tsmix/metrics.hpp"
#include "tsmix/study.hpp"

namespace tsmix {

struct SweepRow {
    double fraction = 0.0;
    std::size_t n_windows = 0;
    double val_mse = 0.0;
    double test_mse = 0.0;
};

struct SubsetScores {
    double val_mse = 0.0;
    double test_mse = 0.0;
};

/// Trains on the given training windows (ascending window indices).
using SubsetEvaluator = std::function<SubsetScores(std::span<const std::size_t>)>;

/// For each fraction draws round_half_up(fraction * N) training windows
/// uniformly without replacement and scores them. Fraction 1.0 uses every
/// window, so its row equals the full-data baseline.
std::vector<SweepRow> run_size_sweep(std::span<const double> fractions, std::span<const std::size_t> train_windows,
                                     std::uint64_t seed, const SubsetEvaluator& evaluate);

struct MseSummary {
    double val_mse = 0.0;
    std::optional<double> test_mse;
};

struct ReportInputs {
    const StudyResult* study = nullptr;
    /// C_k per cluster over the training windows.
    std::vector<std::size_t> cluster_sizes;
    std::size_t total_windows = 0;
    std::optional<MseSummary> baseline;
    std::optional<MseSummary> best;
    std::vector<SweepRow> sweep;
};

struct WeightRow {
    std::size_t cluster = 0;
    double weight = 0.0;
    std::size_t rank = 0;
};

struct CountRow {
    std::size_t cluster = 0;
    std::size_t original = 0;
    std::size_t weighted = 0;
};

struct ReportSummary {
    std::size_t best_trial = 0;
    double best_val_mse = 0.0;
    std::optional<double> best_test_mse;
    std::optional<double> full_val_mse;
    std::optional<double> full_test_mse;
    /// (full - best) / full on test MSE when available, otherwise validation.
    std::optional<double> relative_improvement;
    /// total_windows / N_mix of the best trial.
    double compression_ratio = 0.0;
    double mixture_fraction = 0.0;
    std::size_t n_mix = 0;
    std::size_t total_windows = 0;
    std::vector<std::string> warnings;
};

struct ReportBundle {
    /// Sorted by weight descending, then cluster id.
    std::vector<WeightRow> weights;
    std::vector<CountRow> counts;
    std::vector<SweepRow> sweep;
    ReportSummary summary;
};

double relative_improvement(double full_mse, double best_mse) noexcept;

ReportBundle build_report(const ReportInputs& inputs);

/// Writes weights.csv, counts.csv, sweep.csv and summary.json into `dir`.
void write_report(const ReportBundle& bundle, const std::filesystem::path& dir);

ReportBundle emit_reports(const ReportInputs& inputs, const std::filesystem::path& dir);

struct ReviewSelection {
    /// Highest weights first; ties go to the lower cluster id.
    std::vector<std::size_t> top;
    /// Lowest weights first; ties go to the lower cluster id.
    std::vector<std::size_t> bottom;
};

ReviewSelection select_review_clusters(std::span<const double> weights, std::size_t per_side = 3);

struct ReviewCluster {
    std::size_t cluster = 0;
    double weight = 0.0;
    bool top = true;
    /// Window indices exported, in sampling order.
    std::vector<std::size_t> windows;
    std::size_t available = 0;
};

struct ReviewBundle {
    std::vector<ReviewCluster> clusters;
    std::string prompt;
};

/// Samples up to m training windows from each of the three highest- and three
/// lowest-weighted clusters and writes review/<cluster>/<n>.csv plus
/// review/prompt.txt under `dir`. `window_clusters` gives the cluster id of
/// each window in `train_windows`.
ReviewBundle export_review_bundle(std::span<const double> weights, std::span<const std::size_t> train_windows,
                                  std::span<const std::size_t> window_clusters, const WindowSet& windows,
                                  std::size_t m, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace tsmix
