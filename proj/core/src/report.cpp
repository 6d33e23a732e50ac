#include "tsmix/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "text_io.hpp"
#include "tsmix/error.hpp"
#include "tsmix/mixture.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

using detail::format_double;
using ordered_json = nlohmann::ordered_json;

std::vector<SweepRow> run_size_sweep(std::span<const double> fractions, std::span<const std::size_t> train_windows,
                                     std::uint64_t seed, const SubsetEvaluator& evaluate) {
    if (fractions.empty()) throw Error(ErrorKind::invalid_argument, "size sweep needs at least one fraction");
    if (std::find(fractions.begin(), fractions.end(), 1.0) == fractions.end()) {
        throw Error(ErrorKind::invalid_argument, "size sweep fractions must include 1.0");
    }
    for (const double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            throw Error(ErrorKind::invalid_argument, "sweep fraction " + std::to_string(f) + " is outside (0, 1]");
        }
    }
    std::vector<double> sorted(fractions.begin(), fractions.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = sorted[i];
        const std::size_t n = mixture_count(train_windows.size(), f);
        if (n == 0) {
            throw Error(ErrorKind::invalid_argument,
                        "sweep fraction " + std::to_string(f) + " selects zero of " +
                            std::to_string(train_windows.size()) + " training windows");
        }
        std::vector<std::size_t> subset;
        if (n == train_windows.size()) {
            subset.assign(train_windows.begin(), train_windows.end());
        } else {
            Rng rng(derive_seed(seed, "sweep", i));
            for (const auto pick : sample_without_replacement(train_windows.size(), n, rng)) {
                subset.push_back(train_windows[pick]);
            }
        }
        std::sort(subset.begin(), subset.end());
        const auto scores = evaluate(subset);
        rows.push_back({f, n, scores.val_mse, scores.test_mse});
    }
    return rows;
}

double relative_improvement(double full_mse, double best_mse) noexcept { return (full_mse - best_mse) / full_mse; }

ReportBundle build_report(const ReportInputs& inputs) {
    if (!inputs.study || inputs.study->completed_count() == 0) {
        throw Error(ErrorKind::invalid_argument, "report needs a study with at least one completed trial");
    }
    const auto& study = *inputs.study;
    const auto& best = study.best();
    const std::size_t k = best.weights.size();
    if (inputs.cluster_sizes.size() != k || best.counts.size() != k) {
        throw Error(ErrorKind::invalid_argument, "cluster sizes do not match the study dimension");
    }

    ReportBundle bundle;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return best.weights[a] > best.weights[b]; });
    for (std::size_t r = 0; r < k; ++r) bundle.weights.push_back({order[r], best.weights[order[r]], r + 1});

    for (std::size_t c = 0; c < k; ++c) {
        if (best.counts[c] > inputs.cluster_sizes[c]) {
            throw Error(ErrorKind::invalid_argument, "recorded n_k exceeds C_k for cluster " + std::to_string(c));
        }
        bundle.counts.push_back({c, inputs.cluster_sizes[c], best.counts[c]});
    }
    bundle.sweep = inputs.sweep;

    auto& s = bundle.summary;
    s.best_trial = best.id;
    s.best_val_mse = best.objective;
    s.n_mix = best.n_mix;
    s.total_windows = inputs.total_windows;
    s.compression_ratio = static_cast<double>(inputs.total_windows) / static_cast<double>(best.n_mix);
    s.mixture_fraction = static_cast<double>(best.n_mix) / static_cast<double>(inputs.total_windows);
    if (inputs.best) {
        s.best_val_mse = inputs.best->val_mse;
        s.best_test_mse = inputs.best->test_mse;
    }
    if (inputs.baseline) {
        s.full_val_mse = inputs.baseline->val_mse;
        s.full_test_mse = inputs.baseline->test_mse;
        if (s.full_test_mse && s.best_test_mse) {
            s.relative_improvement = relative_improvement(*s.full_test_mse, *s.best_test_mse);
        } else {
            s.relative_improvement = relative_improvement(*s.full_val_mse, s.best_val_mse);
        }
    } else {
        s.warnings.push_back("full-data baseline missing; relative improvement omitted");
    }
    if (inputs.sweep.empty()) s.warnings.push_back("size sweep not run; sweep.csv has no rows");
    return bundle;
}

void write_report(const ReportBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = detail::open_output(dir / "weights.csv");
        out << "cluster_id,weight,rank\n";
        for (const auto& r : bundle.weights) out << r.cluster << ',' << format_double(r.weight) << ',' << r.rank << '\n';
        detail::finish_output(out, dir / "weights.csv");
    }
    {
        auto out = detail::open_output(dir / "counts.csv");
        out << "cluster_id,original_count,weighted_count\n";
        for (const auto& r : bundle.counts) out << r.cluster << ',' << r.original << ',' << r.weighted << '\n';
        detail::finish_output(out, dir / "counts.csv");
    }
    {
        auto out = detail::open_output(dir / "sweep.csv");
        out << "fraction,n_windows,val_mse,test_mse\n";
        for (const auto& r : bundle.sweep) {
            out << format_double(r.fraction) << ',' << r.n_windows << ',' << format_double(r.val_mse) << ','
                << format_double(r.test_mse) << '\n';
        }
        detail::finish_output(out, dir / "sweep.csv");
    }
    const auto& s = bundle.summary;
    const auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    ordered_json j;
    j["schema"] = "tsmix.summary/1";
    j["best_trial"] = s.best_trial;
    j["best_val_mse"] = s.best_val_mse;
    j["best_test_mse"] = opt(s.best_test_mse);
    j["full_val_mse"] = opt(s.full_val_mse);
    j["full_test_mse"] = opt(s.full_test_mse);
    if (s.relative_improvement) j["relative_improvement"] = *s.relative_improvement;
    j["compression_ratio"] = s.compression_ratio;
    j["mixture_fraction"] = s.mixture_fraction;
    j["n_mix"] = s.n_mix;
    j["total_windows"] = s.total_windows;
    j["warnings"] = s.warnings;
    auto out = detail::open_output(dir / "summary.json");
    out << j.dump(2) << '\n';
    detail::finish_output(out, dir / "summary.json");
}

ReportBundle emit_reports(const ReportInputs& inputs, const std::filesystem::path& dir) {
    auto bundle = build_report(inputs);
    write_report(bundle, dir);
    return bundle;
}

ReviewSelection select_review_clusters(std::span<const double> weights, std::size_t per_side) {
    if (weights.size() < 2 * per_side) {
        throw Error(ErrorKind::invalid_argument, "review export needs at least " + std::to_string(2 * per_side) +
                                                     " clusters, got " + std::to_string(weights.size()));
    }
    std::vector<std::size_t> ids(weights.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    ReviewSelection sel;
    auto desc = ids;
    std::stable_sort(desc.begin(), desc.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    auto asc = ids;
    std::stable_sort(asc.begin(), asc.end(), [&](std::size_t a, std::size_t b) { return weights[a] < weights[b]; });
    sel.top.assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(per_side));
    sel.bottom.assign(asc.begin(), asc.begin() + static_cast<std::ptrdiff_t>(per_side));
    return sel;
}

namespace {

std::string review_prompt(const ReviewBundle& bundle, const WindowSet& windows, std::size_t m) {
    std::ostringstream p;
    p << "You are an expert reviewer of multivariate sensor time series.\n"
         "\n"
         "Each file below holds one window of " << windows.length << " consecutive timesteps. Columns are the\n"
         "channels; rows are timesteps in order (timestamps are implicit). Input channels:\n  ";
    for (std::size_t i = 0; i < windows.input_names.size(); ++i) p << (i ? ", " : "") << windows.input_names[i];
    p << "\nTarget channels:\n  ";
    for (std::size_t i = 0; i < windows.target_names.size(); ++i) p << (i ? ", " : "") << windows.target_names[i];
    p << "\n\n"
         "The windows come from clusters of behaviourally similar segments. A data-mixture search\n"
         "assigned every cluster a sampling weight in [0, 1]; high weights mark clusters the\n"
         "forecaster benefited from, low weights mark clusters it was better off without.\n"
         "\n"
         "For each cluster:\n"
         "  1. Summarize the dynamics you see: transients, load or set-point changes, steady\n"
         "     plateaus, oscillations, drift, flat lines, noise, spikes.\n"
         "  2. Judge how informative the segments are for predicting the target channels.\n"
         "  3. Say whether the assigned weight is consistent with that judgement, and why.\n"
         "Then contrast the high-weight group with the low-weight group in a short paragraph.\n"
         "\n"
         "Clusters (samples per cluster requested: " << m << "):\n";
    for (const auto& c : bundle.clusters) {
        p << "  - cluster " << c.cluster << " [" << (c.top ? "high" : "low") << " weight " << format_double(c.weight)
          << "]: files review/" << c.cluster << "/0.csv .. review/" << c.cluster << '/'
          << (c.windows.empty() ? 0 : c.windows.size() - 1) << ".csv";
        if (c.windows.size() < m) {
            p << " (note: only " << c.available << " windows available, all exported)";
        }
        p << '\n';
    }
    return p.str();
}

}  // namespace

ReviewBundle export_review_bundle(std::span<const double> weights, std::span<const std::size_t> train_windows,
                                  std::span<const std::size_t> window_clusters, const WindowSet& windows,
                                  std::size_t m, std::uint64_t seed, const std::filesystem::path& dir) {
    if (m < 1) throw Error(ErrorKind::invalid_argument, "review sample count must be at least 1");
    if (train_windows.size() != window_clusters.size()) {
        throw Error(ErrorKind::invalid_argument, "review export: window and cluster lists differ in length");
    }
    const auto selection = select_review_clusters(weights);
    std::vector<std::vector<std::size_t>> members(weights.size());
    for (std::size_t i = 0; i < train_windows.size(); ++i) {
        if (window_clusters[i] >= weights.size()) throw Error(ErrorKind::invalid_argument, "cluster id out of range");
        members[window_clusters[i]].push_back(train_windows[i]);
    }

    ReviewBundle bundle;
    const auto root = dir / "review";
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
    std::filesystem::create_directories(root);

    const auto add = [&](std::size_t cluster, bool top) {
        ReviewCluster rc;
        rc.cluster = cluster;
        rc.weight = weights[cluster];
        rc.top = top;
        rc.available = members[cluster].size();
        Rng rng(derive_seed(seed, "review", cluster));
        const std::size_t take = std::min(m, rc.available);
        for (const auto pick : sample_without_replacement(rc.available, take, rng)) {
            rc.windows.push_back(members[cluster][pick]);
        }
        const auto cdir = root / std::to_string(cluster);
        std::filesystem::create_directories(cdir);
        for (std::size_t n = 0; n < rc.windows.size(); ++n) {
            const auto path = cdir / (std::to_string(n) + ".csv");
            auto out = detail::open_output(path);
            bool first = true;
            for (const auto& name : windows.input_names) out << (std::exchange(first, false) ? "" : ",") << name;
            for (const auto& name : windows.target_names) out << (std::exchange(first, false) ? "" : ",") << name;
            out << '\n';
            const auto in = windows.input_block(rc.windows[n]);
            const auto tg = windows.target_block(rc.windows[n]);
            for (std::size_t t = 0; t < windows.length; ++t) {
                for (std::size_t c = 0; c < windows.input_channels(); ++c) {
                    out << (c ? "," : "") << format_double(in[t * windows.input_channels() + c]);
                }
                for (std::size_t c = 0; c < windows.target_channels(); ++c) {
                    out << ',' << format_double(tg[t * windows.target_channels() + c]);
                }
                out << '\n';
            }
            detail::finish_output(out, path);
        }
        bundle.clusters.push_back(std::move(rc));
    };
    for (const auto c : selection.top) add(c, true);
    for (const auto c : selection.bottom) add(c, false);

    bundle.prompt = review_prompt(bundle, windows, m);
    auto out = detail::open_output(root / "prompt.txt");
    out << bundle.prompt;
    detail::finish_output(out, root / "prompt.txt");
    return bundle;
}

}  // namespace tsmix
