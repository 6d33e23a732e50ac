// tsmix: staged data-mixture search for time-series forecasting.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsmix/error.hpp"
#include "tsmix/experiment.hpp"
#include "tsmix/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int {
    ok = 0,
    failed_check = 1,
    usage = 2,
    bad_argument = 3,
    parse_error = 4,
    io_error = 5,
    numeric_error = 6,
    stale_error = 7,
    external_error = 8,
    internal_error = 70,
};

int exit_code(tsmix::ErrorKind kind) {
    using tsmix::ErrorKind;
    switch (kind) {
        case ErrorKind::invalid_argument: return bad_argument;
        case ErrorKind::parse: return parse_error;
        case ErrorKind::io: return io_error;
        case ErrorKind::numeric:
        case ErrorKind::degenerate: return numeric_error;
        case ErrorKind::stale: return stale_error;
        case ErrorKind::external: return external_error;
    }
    return internal_error;
}

struct Options {
    tsmix::PipelineConfig cfg;
    std::vector<std::int64_t> test_profiles;
    std::vector<std::int64_t> val_profiles;
    std::string embeddings;
    std::string centroids;
    std::string sampler = "tpe";
    std::string trainer = "ridge";
    fs::path synth_dir;
};

void add_common(CLI::App& app, Options& o) {
    auto& c = o.cfg;
    app.add_option("--out", c.out_dir, "Output directory for artifacts and the manifest")
        ->envname("TSMIX_OUT")
        ->capture_default_str();
    app.add_option("--seed", c.seed, "Master seed")->capture_default_str();
    app.add_flag("--force", c.force, "Run even if upstream artifacts were produced with different parameters");

    const auto* pre = "preprocess";
    app.add_option("--input", c.input, "Input CSV with a header row")->group(pre);
    app.add_option("--schema", c.schema, "Schema file of 'column = role' lines (id|input|target|ignore)")->group(pre);
    app.add_option("--test-profiles", o.test_profiles, "Profile ids held out for test")->delimiter(',')->group(pre);
    app.add_option("--val-profiles", o.val_profiles, "Profile ids used for validation")->delimiter(',')->group(pre);
    app.add_option("--spans", c.spans, "EWMA spans derived for every input column")
        ->delimiter(',')
        ->capture_default_str()
        ->group(pre);

    const auto* emb = "embed";
    app.add_option("--window", c.window, "Window length W in timesteps")->capture_default_str()->group(emb);
    app.add_option("--stride", c.stride, "Window stride")->capture_default_str()->group(emb);
    app.add_option("--embeddings", o.embeddings, "Precomputed TSEM embedding file, bypasses the featurizer")->group(emb);

    const auto* clu = "cluster";
    app.add_option("--k", c.k, "Number of clusters")->capture_default_str()->group(clu);
    app.add_option("--max-iter", c.max_iter, "Lloyd iteration cap")->capture_default_str()->group(clu);
    app.add_option("--tol", c.tol, "Centroid shift tolerance")->capture_default_str()->group(clu);
    app.add_option("--n-init", c.n_init, "k-means restarts")->capture_default_str()->group(clu);
    app.add_option("--centroids", o.centroids, "Where to write centroids (TSEM)")->group(clu);

    const auto* sea = "search";
    app.add_option("--trials", c.trials, "Number of trials")->capture_default_str()->group(sea);
    app.add_option("--jobs", c.jobs, "Concurrent trial evaluations")->capture_default_str()->group(sea);
    app.add_option("--sampler", o.sampler, "tpe|random")->capture_default_str()->group(sea);
    app.add_option("--n-startup", c.n_startup, "Random trials before TPE")->capture_default_str()->group(sea);
    app.add_option("--n-candidates", c.n_candidates, "TPE candidates per dimension")->capture_default_str()->group(sea);

    const auto* tr = "trainer";
    auto& t = c.train;
    app.add_option("--trainer", o.trainer, "ridge|patch-net|external")->capture_default_str()->group(tr);
    app.add_option("--budget-tokens", t.token_budget, "Token budget per training run")->capture_default_str()->group(tr);
    app.add_option("--batch-size", t.batch_size, "Patch-net batch size")->capture_default_str()->group(tr);
    app.add_option("--lr", t.peak_lr, "Patch-net peak learning rate")->capture_default_str()->group(tr);
    app.add_option("--warmup", t.warmup_fraction, "Warmup fraction of total steps")->capture_default_str()->group(tr);
    app.add_option("--patch-len", t.patch_len, "Patch length in timesteps")->capture_default_str()->group(tr);
    app.add_option("--hidden", t.hidden, "Patch-net hidden width")->capture_default_str()->group(tr);
    app.add_option("--embed-dim", t.embed_dim, "Patch-net patch embedding width")->capture_default_str()->group(tr);
    app.add_option("--ridge-lambda", t.ridge_lambda, "Ridge penalty")->capture_default_str()->group(tr);
    app.add_option("--external-command", c.external_command,
                   "Shell command for the external trainer; {handoff} expands to the handoff directory")
        ->group(tr);
    app.add_option("--external-timeout", c.external_timeout_s, "External trainer timeout in seconds")
        ->capture_default_str()
        ->group(tr);

    const auto* rep = "report";
    app.add_option("--fractions", c.fractions, "Size-sweep fractions")->delimiter(',')->capture_default_str()->group(rep);
    app.add_flag("--skip-baseline", c.skip_baseline, "Do not train the full-data baseline in report")->group(rep);
    app.add_option("--m", c.review_m, "Windows sampled per reviewed cluster")->capture_default_str()->group(rep);
}

void finalize(Options& o) {
    auto& c = o.cfg;
    c.split.test_profiles = {o.test_profiles.begin(), o.test_profiles.end()};
    c.split.val_profiles = {o.val_profiles.begin(), o.val_profiles.end()};
    if (!o.embeddings.empty()) c.embeddings = o.embeddings;
    if (!o.centroids.empty()) c.centroids = o.centroids;
    c.sampler = tsmix::parse_sampler(o.sampler);
    c.train.kind = tsmix::parse_trainer(o.trainer);
}

int selftest(const Options& o, const fs::path& dir) {
    auto cfg = tsmix::write_synthetic_inputs(dir, o.cfg.seed);
    cfg.out_dir = dir / "out";
    cfg.jobs = o.cfg.jobs;
    cfg.force = true;
    std::cout << "selftest: synthetic corpus in " << dir.string() << "\n";
    tsmix::run_pipeline(cfg);

    std::ifstream in(cfg.out_dir / "report" / "summary.json");
    const auto summary = nlohmann::json::parse(in);
    const double best = summary.at("best_val_mse").get<double>();
    const double full = summary.at("full_val_mse").get<double>();
    const double fraction = summary.at("mixture_fraction").get<double>();

    tsmix::BenchmarkConfig bench;
    bench.seed = o.cfg.seed;
    bench.jobs = o.cfg.jobs;
    const auto outcome = tsmix::run_synthetic_benchmark(bench);

    int failures = 0;
    const auto check = [&](bool pass, const std::string& what) {
        std::cout << (pass ? "PASS " : "FAIL ") << what << "\n";
        failures += pass ? 0 : 1;
    };
    check(best < full, "best mixture val MSE " + std::to_string(best) + " < full-data " + std::to_string(full));
    check(fraction <= 0.6, "best mixture uses " + std::to_string(100.0 * fraction) + "% of training windows (<= 60%)");
    check(outcome.signal_weight_mean > outcome.noise_weight_mean,
          "signal-cluster mean weight " + std::to_string(outcome.signal_weight_mean) + " > noise-cluster " +
              std::to_string(outcome.noise_weight_mean));
    std::cout << (failures == 0 ? "selftest: PASS" : "selftest: FAIL") << "\n";
    return failures == 0 ? ok : failed_check;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsmix: cluster-level data-mixture search for time-series forecasting"};
    app.set_config("--config", "", "Key-value file (key = value per line) supplying any flag");
    app.require_subcommand(1, 1);
    app.fallthrough();

    Options o;
    add_common(app, o);

    std::map<std::string, tsmix::Stage> stages = {
        {"preprocess", tsmix::Stage::preprocess}, {"embed", tsmix::Stage::embed},
        {"cluster", tsmix::Stage::cluster},       {"search", tsmix::Stage::search},
        {"sweep", tsmix::Stage::sweep},           {"report", tsmix::Stage::report},
        {"review-export", tsmix::Stage::review_export},
    };
    const std::map<std::string, std::string> help = {
        {"preprocess", "Split, derive EWMA features and min-max scale the input table"},
        {"embed", "Cut windows and compute (or import) one embedding per window"},
        {"cluster", "k-means over window embeddings"},
        {"search", "Search cluster weights with TPE or random sampling"},
        {"sweep", "Train on random subsets of increasing size"},
        {"report", "Emit weights, counts, sweep and summary files"},
        {"review-export", "Export sample windows of the top and bottom clusters for review"},
    };
    std::vector<std::pair<CLI::App*, tsmix::Stage>> stage_cmds;
    for (const auto& [name, stage] : stages) stage_cmds.emplace_back(app.add_subcommand(name, help.at(name)), stage);
    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    auto* synth = app.add_subcommand("synth", "Write the planted-regime synthetic corpus and schema");
    synth->add_option("--dir", o.synth_dir, "Destination directory")->required();
    auto* self = app.add_subcommand("selftest", "Run the synthetic benchmark end to end and print pass/fail");
    fs::path self_dir;
    self->add_option("--dir", self_dir, "Working directory (default: a fresh temporary directory)");
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n" << app.help();
        return usage;
    }

    try {
        finalize(o);
        for (const auto& [cmd, stage] : stage_cmds) {
            if (cmd->parsed()) {
                tsmix::run_stage(stage, o.cfg);
                return ok;
            }
        }
        if (pipeline->parsed()) {
            tsmix::run_pipeline(o.cfg);
            return ok;
        }
        if (synth->parsed()) {
            const auto preset = tsmix::write_synthetic_inputs(o.synth_dir, o.cfg.seed);
            std::cout << "wrote " << preset.input.string() << " and " << preset.schema.string() << "\n";
            std::cout << "suggested flags: --input " << preset.input.string() << " --schema "
                      << preset.schema.string() << " --spans 16 --window " << preset.window << " --k " << preset.k
                      << " --trials " << preset.trials << " --test-profiles ";
            std::string sep;
            for (const auto id : preset.split.test_profiles) std::cout << std::exchange(sep, ",") << id;
            std::cout << " --val-profiles ";
            sep.clear();
            for (const auto id : preset.split.val_profiles) std::cout << std::exchange(sep, ",") << id;
            std::cout << "\n";
            return ok;
        }
        if (self->parsed()) {
            if (self_dir.empty()) {
                self_dir = fs::temp_directory_path() / ("tsmix-selftest-" + std::to_string(::getpid()));
            }
            return selftest(o, self_dir);
        }
    } catch (const tsmix::Error& e) {
        std::cerr << "error [" << tsmix::to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return internal_error;
    }
    return usage;
}
