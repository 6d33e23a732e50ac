#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsmix/clustering.hpp"
#include "tsmix/dataset.hpp"
#include "tsmix/study.hpp"
#include "tsmix/trainer.hpp"

namespace tsmix {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Stage { preprocess, embed, cluster, search, sweep, report, review_export };

const char* to_string(Stage stage) noexcept;

/// Every knob of every stage. Stages read the slice they need.
struct PipelineConfig {
    std::filesystem::path out_dir = "tsmix_out";
    std::uint64_t seed = 0;
    bool force = false;

    // preprocess
    std::filesystem::path input;
    std::filesystem::path schema;
    SplitSpec split;
    std::vector<int> spans = {200, 500, 1500, 4000};

    // embed
    std::size_t window = 300;
    std::size_t stride = 1;
    std::optional<std::filesystem::path> embeddings;

    // cluster
    std::size_t k = 36;
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::size_t n_init = 10;
    std::optional<std::filesystem::path> centroids;

    // search
    std::size_t trials = 100;
    std::size_t jobs = 1;
    SamplerKind sampler = SamplerKind::tpe;
    std::size_t n_startup = 10;
    std::size_t n_candidates = 24;
    TrainConfig train;
    std::string external_command;
    double external_timeout_s = 3600.0;

    // sweep / report / review
    std::vector<double> fractions = {0.1, 0.25, 0.5, 0.75, 1.0};
    bool skip_baseline = false;
    std::size_t review_m = 10;
};

/// Hash of a stage's parameters chained with the hashes of its inputs.
std::string stage_hash(Stage stage, const PipelineConfig& config);

struct StageRecord {
    std::string config_hash;
    std::map<std::string, std::string> outputs;
};

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::uint64_t master_seed = 0;
    std::map<std::string, StageRecord> stages;

    static RunManifest load(const std::filesystem::path& out_dir);
    void save(const std::filesystem::path& out_dir) const;
};

/// Throws ErrorKind::stale when an upstream stage was run with different
/// parameters, unless config.force is set.
void check_upstream(Stage stage, const PipelineConfig& config, const RunManifest& manifest);

void run_preprocess(const PipelineConfig& config);
void run_embed(const PipelineConfig& config);
void run_cluster(const PipelineConfig& config);
void run_search(const PipelineConfig& config);
void run_sweep(const PipelineConfig& config);
void run_report(const PipelineConfig& config);
void run_review_export(const PipelineConfig& config);

/// Every stage in order, each reading the previous stage's files.
void run_pipeline(const PipelineConfig& config);

void run_stage(Stage stage, const PipelineConfig& config);

/// Writes the planted-regime corpus as `<dir>/synthetic.csv` and
/// `<dir>/synthetic.schema`; returns a config preset for it.
PipelineConfig write_synthetic_inputs(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace tsmix
