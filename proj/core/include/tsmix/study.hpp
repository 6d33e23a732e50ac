#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "tsmix/tpe.hpp"
#include "tsmix/trial.hpp"

namespace tsmix {

enum class SamplerKind { tpe, random };

const char* to_string(SamplerKind kind) noexcept;
SamplerKind parse_sampler(std::string_view text);

struct StudyConfig {
    std::size_t n_trials = 100;
    std::size_t jobs = 1;
    SamplerKind sampler = SamplerKind::tpe;
    std::uint64_t seed = 0;
    std::size_t k = 36;
    TpeOptions tpe;

    void validate() const;
};

struct TrialContext {
    std::size_t trial_id = 0;
    const WeightVector& weights;
    /// Seed reserved for this trial, derived from the master seed and trial id.
    std::uint64_t seed = 0;
};

struct TrialOutcome {
    double objective = 0.0;
    std::size_t n_mix = 0;
    std::vector<std::size_t> counts;
    std::vector<TargetMetric> targets;
};

/// Evaluates one proposal. Throwing marks the trial failed.
using TrialObjective = std::function<TrialOutcome(const TrialContext&)>;

struct StudyResult {
    std::size_t k = 0;
    SamplerKind sampler = SamplerKind::tpe;
    std::size_t n_startup = 0;
    std::size_t n_candidates = 0;
    std::uint64_t seed = 0;
    /// Ordered by trial id.
    std::vector<TrialRecord> trials;
    std::optional<std::size_t> best_trial;

    const TrialRecord& best() const;
    std::size_t completed_count() const noexcept;
};

/// Index of the lowest-objective completed trial (lowest id on ties).
std::optional<std::size_t> find_best_trial(const std::vector<TrialRecord>& trials);

/// Runs n_trials proposals with up to `jobs` concurrent evaluations. Each
/// proposal sees the history completed at proposal time.
StudyResult run_study(const StudyConfig& config, const TrialObjective& objective);

/// One JSON object per line, tagged with a schema version. A header line
/// describes the search space and sampler.
void write_trial_log(const StudyResult& study, const std::filesystem::path& path);
StudyResult read_trial_log(const std::filesystem::path& path);

/// {"0": w_0, "1": w_1, ...} for the best trial.
void write_best_weights(const StudyResult& study, const std::filesystem::path& path);

}  // namespace tsmix
