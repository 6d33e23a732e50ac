#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsmix/dataset.hpp"
#include "tsmix/matrix.hpp"
#include "tsmix/metrics.hpp"
#include "tsmix/patch_net.hpp"

namespace tsmix {

enum class TrainerKind { ridge, patch_net, external };

const char* to_string(TrainerKind kind) noexcept;
TrainerKind parse_trainer(std::string_view text);

struct TrainConfig {
    TrainerKind kind = TrainerKind::ridge;
    /// One token is one patch passed through the model.
    std::uint64_t token_budget = 2'000'000;
    std::size_t batch_size = 1024;
    double peak_lr = 1e-4;
    double warmup_fraction = 0.3;
    std::size_t patch_len = 30;
    std::size_t hidden = 32;
    std::size_t embed_dim = 32;
    double ridge_lambda = 1e-3;
    std::uint64_t seed = 0;

    void validate(std::size_t window_length) const;
};

/// Windows plus the statistical feature row of every window, computed once
/// and shared by all trials.
struct TrainingData {
    WindowSet windows;
    Matrix features;
};

TrainingData prepare_training_data(WindowSet windows);

/// ceil(budget / (n_windows * patches_per_window)), at least 1.
std::uint64_t compute_epochs(std::uint64_t budget, std::uint64_t n_windows, std::uint64_t patches_per_window);

/// Linear warmup over the first ceil(warmup_fraction * total_steps) steps,
/// then linear decay towards zero.
double lr_at_step(std::size_t step, std::size_t total_steps, double peak, double warmup_fraction);

/// Linear map from window features to final-timestep targets. The last row
/// of `coefficients` is the intercept.
struct RidgeModel {
    Matrix coefficients;

    std::vector<double> predict(std::span<const double> features) const;
};

/// Solves (X'X + lambda D) B = X'Y with X the mixture's feature rows plus an
/// intercept column and D the identity with the intercept entry zeroed.
RidgeModel train_ridge(std::span<const std::size_t> mixture, const TrainingData& data, double lambda);

struct TrainingLog {
    /// Mean batch loss per epoch, in training order.
    std::vector<double> epoch_loss;
    std::uint64_t tokens = 0;
    std::uint64_t epochs = 0;
    std::size_t steps = 0;
};

/// Adam on mini-batches with the warmup/decay schedule; stops once the token
/// budget has been consumed.
PatchNet train_patch_net(std::span<const std::size_t> mixture, const TrainingData& data, const TrainConfig& config,
                         TrainingLog* log = nullptr);

using ForecastModel = std::variant<RidgeModel, PatchNet>;

std::vector<double> predict(const ForecastModel& model, const TrainingData& data, std::size_t window);

/// Scores final-timestep predictions on the val or test windows.
TrialMetrics evaluate(const ForecastModel& model, const TrainingData& data, Split split);

struct ExternalTrainerConfig {
    /// Shell command; `{handoff}` is replaced by the handoff directory.
    std::string command;
    double timeout_s = 3600.0;
    std::filesystem::path handoff_root;
    /// Extra string entries copied into config.json (e.g. table path).
    std::vector<std::pair<std::string, std::string>> context;
};

struct ExternalRequest {
    std::size_t trial_id = 0;
    std::uint64_t seed = 0;
    std::string tag = "trial";
};

struct ExternalResult {
    TrialMetrics val;
    std::optional<TrialMetrics> test;
};

/// Writes mixture.csv and config.json to a fresh handoff directory, runs the
/// command and parses metrics.json. Failures raise TrialFailure.
ExternalResult external_trainer_invoke(std::span<const std::size_t> mixture, const TrainingData& data,
                                       const TrainConfig& config, const ExternalTrainerConfig& external,
                                       const ExternalRequest& request);

/// Validates a metrics.json document against the expected target names.
ExternalResult parse_metrics_file(const std::filesystem::path& path, std::span<const std::string> target_names);

struct MixtureScores {
    TrialMetrics val;
    std::optional<TrialMetrics> test;
};

/// Trains the configured proxy on `mixture` (window indices) and scores it on
/// the validation windows, and on the test windows when requested.
MixtureScores train_and_score(std::span<const std::size_t> mixture, const TrainingData& data,
                              const TrainConfig& config, bool with_test,
                              const ExternalTrainerConfig* external = nullptr,
                              const ExternalRequest& request = {});

}  // namespace tsmix
