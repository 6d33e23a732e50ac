#include "tsmix/pipeline.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "text_io.hpp"
#include "tsmix/embedding.hpp"
#include "tsmix/error.hpp"
#include "tsmix/experiment.hpp"
#include "tsmix/random.hpp"
#include "tsmix/report.hpp"
#include "tsmix/synthetic.hpp"

namespace tsmix {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* to_string(Stage stage) noexcept {
    switch (stage) {
        case Stage::preprocess: return "preprocess";
        case Stage::embed: return "embed";
        case Stage::cluster: return "cluster";
        case Stage::search: return "search";
        case Stage::sweep: return "sweep";
        case Stage::report: return "report";
        case Stage::review_export: return "review-export";
    }
    return "?";
}

namespace {

constexpr const char* kManifestFile = "manifest.json";

std::vector<Stage> upstream_of(Stage stage) {
    switch (stage) {
        case Stage::preprocess: return {};
        case Stage::embed: return {Stage::preprocess};
        case Stage::cluster: return {Stage::embed};
        case Stage::search: return {Stage::cluster};
        case Stage::sweep: return {Stage::embed};
        case Stage::report: return {Stage::search};
        case Stage::review_export: return {Stage::search};
    }
    return {};
}

std::string join(const auto& values) {
    std::string out;
    for (const auto& v : values) {
        if (!out.empty()) out += ',';
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
            out += detail::format_double(v);
        } else {
            out += std::to_string(v);
        }
    }
    return out;
}

std::string trainer_params(const PipelineConfig& c) {
    const auto& t = c.train;
    std::ostringstream s;
    s << "trainer=" << to_string(t.kind) << ";budget=" << t.token_budget << ";batch=" << t.batch_size
      << ";lr=" << detail::format_double(t.peak_lr) << ";warmup=" << detail::format_double(t.warmup_fraction)
      << ";patch=" << t.patch_len << ";hidden=" << t.hidden << ";embed=" << t.embed_dim
      << ";lambda=" << detail::format_double(t.ridge_lambda) << ";external=" << c.external_command
      << ";timeout=" << detail::format_double(c.external_timeout_s);
    return s.str();
}

std::string stage_params(Stage stage, const PipelineConfig& c) {
    std::ostringstream s;
    s << to_string(stage) << '|';
    switch (stage) {
        case Stage::preprocess:
            s << "input=" << c.input.string() << ";schema=" << c.schema.string()
              << ";test=" << join(c.split.test_profiles) << ";val=" << join(c.split.val_profiles)
              << ";spans=" << join(c.spans);
            break;
        case Stage::embed:
            s << "window=" << c.window << ";stride=" << c.stride
              << ";embeddings=" << (c.embeddings ? c.embeddings->string() : std::string("builtin"));
            break;
        case Stage::cluster:
            s << "k=" << c.k << ";max_iter=" << c.max_iter << ";tol=" << detail::format_double(c.tol)
              << ";n_init=" << c.n_init << ";seed=" << c.seed;
            break;
        case Stage::search:
            s << "trials=" << c.trials << ";sampler=" << to_string(c.sampler) << ";n_startup=" << c.n_startup
              << ";n_candidates=" << c.n_candidates << ";seed=" << c.seed << ';' << trainer_params(c);
            break;
        case Stage::sweep:
            s << "fractions=" << join(c.fractions) << ";seed=" << c.seed << ';' << trainer_params(c);
            break;
        case Stage::report:
            s << "skip_baseline=" << c.skip_baseline;
            break;
        case Stage::review_export:
            s << "m=" << c.review_m;
            break;
    }
    return s.str();
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 14695981039346656037ULL) noexcept {
    for (const unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

fs::path out_file(const PipelineConfig& c, std::string_view name) { return c.out_dir / name; }

void record_stage(const PipelineConfig& c, Stage stage, std::map<std::string, std::string> outputs) {
    auto manifest = RunManifest::load(c.out_dir);
    manifest.master_seed = c.seed;
    manifest.stages[to_string(stage)] = {stage_hash(stage, c), std::move(outputs)};
    manifest.save(c.out_dir);
}

RunManifest begin_stage(Stage stage, const PipelineConfig& c) {
    auto manifest = RunManifest::load(c.out_dir);
    check_upstream(stage, c, manifest);
    return manifest;
}

TrainingData load_training_data(const PipelineConfig& c) {
    const auto scaler = read_scaler(out_file(c, "scaler.txt"));
    const auto table = read_table_csv(out_file(c, "table.csv"), scaler);
    return prepare_training_data(make_windows(table, c.window, c.stride));
}

ClusteredWindows load_clusters(const PipelineConfig& c, const TrainingData& data) {
    ClusteredWindows out;
    out.all_clusters = read_assignments_csv(out_file(c, "assignments.csv"), data.windows.size());
    out.train_windows = data.windows.indices(Split::train);
    out.train_clusters.reserve(out.train_windows.size());
    std::size_t k = 0;
    for (const auto w : out.train_windows) out.train_clusters.push_back(out.all_clusters[w]);
    for (const auto a : out.all_clusters) k = std::max(k, a + 1);
    if (k > c.k) {
        throw Error(ErrorKind::invalid_argument, "assignments use " + std::to_string(k) + " clusters but k is " +
                                                     std::to_string(c.k));
    }
    out.model.k = c.k;
    out.model.sizes = cluster_sizes(out.train_clusters, c.k);
    return out;
}

std::optional<ExternalTrainerConfig> external_config(const PipelineConfig& c) {
    if (c.train.kind != TrainerKind::external) return std::nullopt;
    if (c.external_command.empty()) {
        throw Error(ErrorKind::invalid_argument, "trainer 'external' needs an external command");
    }
    ExternalTrainerConfig ext;
    ext.command = c.external_command;
    ext.timeout_s = c.external_timeout_s;
    ext.handoff_root = fs::absolute(c.out_dir / "handoff");
    ext.context = {{"table", fs::absolute(out_file(c, "table.csv")).string()},
                   {"scaler", fs::absolute(out_file(c, "scaler.txt")).string()},
                   {"windows", fs::absolute(out_file(c, "windows.csv")).string()}};
    return ext;
}

const ExternalTrainerConfig* ptr(const std::optional<ExternalTrainerConfig>& ext) {
    return ext ? &*ext : nullptr;
}

std::vector<SweepRow> read_sweep(const fs::path& path) {
    auto in = detail::open_input(path);
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
    std::vector<SweepRow> rows;
    for (const auto& r : doc.at("rows")) {
        rows.push_back({r.at("fraction").get<double>(), r.at("n_windows").get<std::size_t>(),
                        r.at("val_mse").get<double>(), r.at("test_mse").get<double>()});
    }
    return rows;
}

}  // namespace

std::string stage_hash(Stage stage, const PipelineConfig& config) {
    std::uint64_t h = fnv1a(stage_params(stage, config));
    for (const auto up : upstream_of(stage)) h = fnv1a(stage_hash(up, config), h);
    return hex(h);
}

RunManifest RunManifest::load(const fs::path& out_dir) {
    RunManifest m;
    const auto path = out_dir / kManifestFile;
    if (!fs::exists(path)) return m;
    auto in = detail::open_input(path);
    try {
        const auto doc = ordered_json::parse(in);
        m.tool_version = doc.at("tool_version").get<std::string>();
        m.master_seed = doc.at("master_seed").get<std::uint64_t>();
        for (const auto& [name, rec] : doc.at("stages").items()) {
            StageRecord r;
            r.config_hash = rec.at("config_hash").get<std::string>();
            for (const auto& [key, value] : rec.at("outputs").items()) r.outputs[key] = value.get<std::string>();
            m.stages[name] = std::move(r);
        }
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return m;
}

void RunManifest::save(const fs::path& out_dir) const {
    ordered_json doc;
    doc["tool_version"] = tool_version;
    doc["master_seed"] = master_seed;
    doc["stages"] = ordered_json::object();
    for (const auto& [name, rec] : stages) {
        doc["stages"][name] = {{"config_hash", rec.config_hash}, {"outputs", rec.outputs}};
    }
    const auto path = out_dir / kManifestFile;
    auto out = detail::open_output(path);
    out << doc.dump(2) << '\n';
    detail::finish_output(out, path);
}

void check_upstream(Stage stage, const PipelineConfig& config, const RunManifest& manifest) {
    for (const auto up : upstream_of(stage)) {
        const auto it = manifest.stages.find(to_string(up));
        if (it == manifest.stages.end()) {
            throw Error(ErrorKind::invalid_argument, std::string("stage '") + to_string(stage) + "' needs '" +
                                                         to_string(up) + "' to run first in " +
                                                         config.out_dir.string());
        }
        if (config.force) continue;
        const auto expected = stage_hash(up, config);
        if (it->second.config_hash != expected) {
            throw Error(ErrorKind::stale, std::string("stage '") + to_string(up) + "' was run with different " +
                                              "parameters (manifest hash " + it->second.config_hash + ", current " +
                                              expected + "); rerun it or pass --force");
        }
    }
}

void run_preprocess(const PipelineConfig& c) {
    begin_stage(Stage::preprocess, c);
    if (c.input.empty()) throw Error(ErrorKind::invalid_argument, "preprocess needs --input");
    if (c.schema.empty()) throw Error(ErrorKind::invalid_argument, "preprocess needs --schema");
    const auto raw = load_dataset(c.input, read_schema_file(c.schema));
    const auto prepared = preprocess_table(raw, c.split, c.spans);
    for (const auto id : prepared.split_report.missing_profiles) {
        std::cerr << "warning: profile " << id << " listed in the split is not in the data\n";
    }
    write_table_csv(prepared.table, out_file(c, "table.csv"));
    write_scaler(prepared.scaler, out_file(c, "scaler.txt"));
    std::cerr << "preprocess: " << prepared.split_report.train_rows << " train, " << prepared.split_report.val_rows
              << " val, " << prepared.split_report.test_rows << " test rows\n";
    record_stage(c, Stage::preprocess, {{"table", "table.csv"}, {"scaler", "scaler.txt"}});
}

void run_embed(const PipelineConfig& c) {
    begin_stage(Stage::embed, c);
    const auto scaler = read_scaler(out_file(c, "scaler.txt"));
    const auto table = read_table_csv(out_file(c, "table.csv"), scaler);
    std::vector<std::int64_t> short_profiles;
    const auto windows = make_windows(table, c.window, c.stride, &short_profiles);
    for (const auto id : short_profiles) {
        std::cerr << "warning: profile " << id << " is shorter than the window and yields no windows\n";
    }
    if (windows.size() == 0) throw Error(ErrorKind::degenerate, "no profile is long enough for a single window");

    {
        const auto path = out_file(c, "windows.csv");
        auto out = detail::open_output(path);
        out << "window_index,profile_id,start,split\n";
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& w = windows.windows[i];
            out << i << ',' << w.profile << ',' << w.start << ',' << to_string(w.split) << '\n';
        }
        detail::finish_output(out, path);
    }

    const EmbeddingMatrix embeddings = c.embeddings
                                           ? read_embedding_file(*c.embeddings, windows.size())
                                           : to_embedding(featurize_windows(windows));
    write_embedding_file(embeddings, out_file(c, "embeddings.tsem"));
    std::cerr << "embed: " << embeddings.rows << " windows x " << embeddings.dims << " dims\n";
    record_stage(c, Stage::embed, {{"windows", "windows.csv"}, {"embeddings", "embeddings.tsem"}});
}

void run_cluster(const PipelineConfig& c) {
    begin_stage(Stage::cluster, c);
    const auto data = load_training_data(c);
    const auto embeddings = read_embedding_file(out_file(c, "embeddings.tsem"), data.windows.size());

    KMeansOptions options;
    options.k = c.k;
    options.max_iter = c.max_iter;
    options.tol = c.tol;
    options.n_init = c.n_init;
    options.seed = derive_seed(c.seed, "kmeans");
    const auto clusters = cluster_embeddings(embeddings, data.windows, options);

    std::vector<std::size_t> all(data.windows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    write_assignments_csv(all, clusters.all_clusters, out_file(c, "assignments.csv"));

    const fs::path centroid_path = c.centroids ? *c.centroids : out_file(c, "centroids.tsem");
    write_embedding_file(to_embedding(clusters.model.centroids), centroid_path);

    ordered_json info;
    info["k"] = clusters.model.k;
    info["sizes"] = clusters.model.sizes;
    info["inertia"] = clusters.model.inertia;
    info["iterations"] = clusters.model.iterations;
    {
        const auto path = out_file(c, "clusters.json");
        auto out = detail::open_output(path);
        out << info.dump(2) << '\n';
        detail::finish_output(out, path);
    }
    std::cerr << "cluster: k=" << clusters.model.k << ", inertia " << detail::format_double(clusters.model.inertia)
              << '\n';
    record_stage(c, Stage::cluster,
                 {{"assignments", "assignments.csv"}, {"centroids", centroid_path.string()}, {"info", "clusters.json"}});
}

void run_search(const PipelineConfig& c) {
    begin_stage(Stage::search, c);
    const auto data = load_training_data(c);
    const auto clusters = load_clusters(c, data);
    const auto ext = external_config(c);

    StudyConfig sc;
    sc.n_trials = c.trials;
    sc.jobs = c.jobs;
    sc.sampler = c.sampler;
    sc.seed = c.seed;
    sc.k = c.k;
    sc.tpe.n_startup = c.n_startup;
    sc.tpe.n_candidates = c.n_candidates;
    const auto study = run_study(sc, make_mixture_objective(data, clusters, c.train, ptr(ext)));

    write_trial_log(study, out_file(c, "trials.jsonl"));
    write_best_weights(study, out_file(c, "best_weights.json"));
    const auto& best = study.best();
    std::cerr << "search: " << study.completed_count() << "/" << study.trials.size() << " trials completed; best #"
              << best.id << " val MSE " << detail::format_double(best.objective) << " with " << best.n_mix
              << " windows\n";
    record_stage(c, Stage::search, {{"trials", "trials.jsonl"}, {"best_weights", "best_weights.json"}});
}

void run_sweep(const PipelineConfig& c) {
    begin_stage(Stage::sweep, c);
    const auto data = load_training_data(c);
    const auto ext = external_config(c);
    const auto train_windows = data.windows.indices(Split::train);
    const auto evaluator = [&](std::span<const std::size_t> subset) {
        const auto scores = score_full_data(data, subset, c.train, c.seed, true, ptr(ext));
        return SubsetScores{scores.val.avg_mse, scores.test ? scores.test->avg_mse : 0.0};
    };
    const auto rows = run_size_sweep(c.fractions, train_windows, baseline_seed(c.seed), evaluator);

    ordered_json doc;
    doc["schema"] = "tsmix.sweep/1";
    doc["rows"] = ordered_json::array();
    for (const auto& r : rows) {
        doc["rows"].push_back(
            {{"fraction", r.fraction}, {"n_windows", r.n_windows}, {"val_mse", r.val_mse}, {"test_mse", r.test_mse}});
    }
    const auto path = out_file(c, "sweep.json");
    auto out = detail::open_output(path);
    out << doc.dump(2) << '\n';
    detail::finish_output(out, path);
    std::cerr << "sweep: " << rows.size() << " fractions\n";
    record_stage(c, Stage::sweep, {{"sweep", "sweep.json"}});
}

void run_report(const PipelineConfig& c) {
    auto manifest = begin_stage(Stage::report, c);
    const auto data = load_training_data(c);
    const auto clusters = load_clusters(c, data);
    const auto ext = external_config(c);
    const auto study = read_trial_log(out_file(c, "trials.jsonl"));
    if (study.k != c.k) {
        throw Error(ErrorKind::stale, "trial log has k=" + std::to_string(study.k) + " but k is " + std::to_string(c.k));
    }

    ReportInputs inputs;
    inputs.study = &study;
    inputs.cluster_sizes = clusters.model.sizes;
    inputs.total_windows = clusters.train_windows.size();

    const auto best = score_trial(data, clusters, c.train, c.seed, study.best(), true, ptr(ext));
    inputs.best = MseSummary{best.val.avg_mse, best.test ? std::optional(best.test->avg_mse) : std::nullopt};
    if (!c.skip_baseline) {
        const auto full = score_full_data(data, clusters.train_windows, c.train, c.seed, true, ptr(ext));
        inputs.baseline = MseSummary{full.val.avg_mse, full.test ? std::optional(full.test->avg_mse) : std::nullopt};
    }

    const auto sweep_path = out_file(c, "sweep.json");
    const auto sweep_rec = manifest.stages.find(to_string(Stage::sweep));
    if (sweep_rec != manifest.stages.end() && fs::exists(sweep_path)) {
        if (!c.force && sweep_rec->second.config_hash != stage_hash(Stage::sweep, c)) {
            throw Error(ErrorKind::stale, "stage 'sweep' was run with different parameters; rerun it or pass --force");
        }
        inputs.sweep = read_sweep(sweep_path);
    }

    const auto bundle = emit_reports(inputs, c.out_dir / "report");
    for (const auto& w : bundle.summary.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << "report: best val MSE " << detail::format_double(bundle.summary.best_val_mse);
    if (bundle.summary.full_val_mse) std::cerr << ", full-data val MSE " << detail::format_double(*bundle.summary.full_val_mse);
    std::cerr << '\n';
    record_stage(c, Stage::report,
                 {{"weights", "report/weights.csv"},
                  {"counts", "report/counts.csv"},
                  {"sweep", "report/sweep.csv"},
                  {"summary", "report/summary.json"}});
}

void run_review_export(const PipelineConfig& c) {
    begin_stage(Stage::review_export, c);
    const auto data = load_training_data(c);
    const auto clusters = load_clusters(c, data);
    const auto study = read_trial_log(out_file(c, "trials.jsonl"));
    const auto& weights = study.best().weights.w;
    if (weights.size() != clusters.model.k) {
        throw Error(ErrorKind::stale, "trial log dimension does not match the cluster count");
    }
    const auto bundle = export_review_bundle(weights, clusters.train_windows, clusters.train_clusters, data.windows,
                                             c.review_m, derive_seed(c.seed, "review"), c.out_dir);
    std::cerr << "review-export: " << bundle.clusters.size() << " clusters written\n";
    record_stage(c, Stage::review_export, {{"review", "review"}, {"prompt", "review/prompt.txt"}});
}

void run_stage(Stage stage, const PipelineConfig& config) {
    switch (stage) {
        case Stage::preprocess: return run_preprocess(config);
        case Stage::embed: return run_embed(config);
        case Stage::cluster: return run_cluster(config);
        case Stage::search: return run_search(config);
        case Stage::sweep: return run_sweep(config);
        case Stage::report: return run_report(config);
        case Stage::review_export: return run_review_export(config);
    }
}

void run_pipeline(const PipelineConfig& config) {
    for (const auto stage : {Stage::preprocess, Stage::embed, Stage::cluster, Stage::search, Stage::sweep,
                             Stage::report, Stage::review_export}) {
        run_stage(stage, config);
    }
}

PipelineConfig write_synthetic_inputs(const fs::path& dir, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.seed = derive_seed(seed, "corpus");
    const auto corpus = generate_synthetic_corpus(spec);
    const auto& t = corpus.table;

    const auto csv = dir / "synthetic.csv";
    {
        auto out = detail::open_output(csv);
        out << t.id_column;
        for (const auto& name : t.column_names) out << ',' << name;
        out << '\n';
        for (std::size_t r = 0; r < t.rows(); ++r) {
            out << t.profile_ids[r];
            for (std::size_t j = 0; j < t.cols(); ++j) out << ',' << detail::format_double(t.values(r, j));
            out << '\n';
        }
        detail::finish_output(out, csv);
    }
    const auto schema = dir / "synthetic.schema";
    {
        auto out = detail::open_output(schema);
        out << t.id_column << " = id\n";
        for (std::size_t j = 0; j < t.cols(); ++j) out << t.column_names[j] << " = " << to_string(t.roles[j]) << '\n';
        detail::finish_output(out, schema);
    }

    PipelineConfig c;
    c.seed = seed;
    c.input = csv;
    c.schema = schema;
    c.split = corpus.split;
    c.spans = {16};
    c.window = spec.window_length;
    c.k = 12;
    c.trials = 60;
    c.train.kind = TrainerKind::ridge;
    c.train.patch_len = 10;
    return c;
}

}  // namespace tsmix
