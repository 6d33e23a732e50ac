// One PASS/FAIL line per acceptance criterion. Exit status is non-zero if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tsmix/clustering.hpp"
#include "tsmix/dataset.hpp"
#include "tsmix/error.hpp"
#include "tsmix/experiment.hpp"
#include "tsmix/mixture.hpp"
#include "tsmix/patch_net.hpp"
#include "tsmix/pipeline.hpp"
#include "tsmix/random.hpp"
#include "tsmix/study.hpp"
#include "tsmix/tpe.hpp"
#include "tsmix/trainer.hpp"

using namespace tsmix;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and counts.
constexpr int kSeeds = 10;
constexpr int kRequiredSeeds = 8;
constexpr std::size_t kTrials = 60;
constexpr double kMaxMixtureFraction = 0.60;
constexpr double kAc1BudgetS = 300.0;
constexpr double kAc2BudgetS = 600.0;
constexpr int kClusterInstances = 20;
constexpr double kClusterTol = 1e-9;
constexpr int kEq1Pairs = 1000;
constexpr int kGradBatches = 5;
constexpr double kGradStep = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradDenominatorFloor = 1e-6;
constexpr int kTokenPairs = 50;
constexpr std::uint64_t kPatchesPerWindow = 10;
constexpr double kGoldenTol = 1e-12;
constexpr int kParzenSets = 100;
constexpr std::size_t kParzenSteps = 20000;
constexpr double kParzenTol = 1e-3;

struct Verdict {
    bool pass = false;
    std::string detail;
};

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("tsmix-acceptance-" + tag + "-" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

// Both samplers over the same seeds; AC1 and AC2 read from this.
struct BenchmarkRuns {
    std::vector<BenchmarkOutcome> tpe, random;
    double tpe_seconds = 0.0, random_seconds = 0.0;
};

BenchmarkRuns run_benchmarks() {
    BenchmarkRuns runs;
    for (int seed = 0; seed < kSeeds; ++seed) {
        BenchmarkConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.trials = kTrials;
        cfg.train.kind = TrainerKind::ridge;
        auto t0 = std::chrono::steady_clock::now();
        runs.tpe.push_back(run_synthetic_benchmark(cfg));
        runs.tpe_seconds += seconds_since(t0);
        cfg.sampler = SamplerKind::random;
        t0 = std::chrono::steady_clock::now();
        runs.random.push_back(run_synthetic_benchmark(cfg));
        runs.random_seconds += seconds_since(t0);
    }
    return runs;
}

Verdict ac1(const BenchmarkRuns& runs) {
    int below = 0, small = 0, signal = 0;
    double worst_fraction = 0.0;
    for (const auto& r : runs.tpe) {
        const double fraction = static_cast<double>(r.best_n_mix) / static_cast<double>(r.total_train_windows);
        worst_fraction = std::max(worst_fraction, fraction);
        below += r.best_val_mse < r.baseline_val_mse;
        small += fraction <= kMaxMixtureFraction;
        signal += r.signal_weight_mean > r.noise_weight_mean;
    }
    const bool pass = below >= kRequiredSeeds && small == kSeeds && signal >= kRequiredSeeds &&
                      runs.tpe_seconds < kAc1BudgetS;
    return {pass, "(a) best<full in " + std::to_string(below) + "/10, (b) mixture<=60% in " + std::to_string(small) +
                      "/10 (max " + fmt(100.0 * worst_fraction, 3) + "%), (c) signal>noise weight in " +
                      std::to_string(signal) + "/10, " + fmt(runs.tpe_seconds, 3) + " s"};
}

Verdict ac2(const BenchmarkRuns& runs) {
    int wins = 0;
    for (int i = 0; i < kSeeds; ++i) wins += runs.tpe[i].best_val_mse <= runs.random[i].best_val_mse;
    const double total = runs.tpe_seconds + runs.random_seconds;
    return {wins >= kRequiredSeeds && total < kAc2BudgetS,
            "TPE<=random in " + std::to_string(wins) + "/10 pairs, " + fmt(total, 3) + " s"};
}

double brute_force_two_means(const Matrix& p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = p.rows;
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
        double total = 0.0;
        for (std::size_t side = 0; side < 2; ++side) {
            std::vector<double> mean(p.cols, 0.0);
            double count = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != side) continue;
                for (std::size_t d = 0; d < p.cols; ++d) mean[d] += p(i, d);
                count += 1.0;
            }
            for (auto& m : mean) m /= count;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != side) continue;
                for (std::size_t d = 0; d < p.cols; ++d) total += (p(i, d) - mean[d]) * (p(i, d) - mean[d]);
            }
        }
        best = std::min(best, total);
    }
    return best;
}

Verdict ac3() {
    Rng rng(derive_seed(3, "acceptance-clustering"));
    int optimal = 0;
    bool monotone = true;
    double worst = 0.0;
    for (int inst = 0; inst < kClusterInstances; ++inst) {
        const std::size_t n = 3 + uniform_index(rng, 6);
        const std::size_t dims = 1 + uniform_index(rng, 3);
        Matrix p(n, dims);
        for (auto& v : p.data) v = standard_normal(rng);
        KMeansOptions o;
        o.k = 2;
        o.seed = static_cast<std::uint64_t>(inst);
        const auto m = kmeans_fit(p, o);
        const double gap = std::abs(m.inertia - brute_force_two_means(p));
        worst = std::max(worst, gap);
        optimal += gap <= kClusterTol;
        for (const auto& trace : m.inertia_traces) {
            for (std::size_t i = 1; i < trace.size(); ++i) monotone &= trace[i] <= trace[i - 1];
        }
    }
    return {optimal == kClusterInstances && monotone,
            std::to_string(optimal) + "/20 optimal (max gap " + fmt(worst, 3) + "), traces " +
                (monotone ? "non-increasing" : "INCREASED")};
}

Verdict ac4() {
    Rng rng(derive_seed(4, "acceptance-eq1"));
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < kEq1Pairs; ++i) {
        const std::size_t c = 1 + uniform_index(rng, 5000);
        const double w = uniform01(rng);
        const std::vector<std::size_t> one_cluster(c, 0);
        const auto m = build_mixture(one_cluster, WeightVector({w}), static_cast<std::uint64_t>(i));
        const double n = m ? static_cast<double>(m->counts[0]) : 0.0;
        const double err = std::abs(n - static_cast<double>(c) * w);
        worst = std::max(worst, err);
        ok += err <= 0.5 && n == static_cast<double>(mixture_count(c, w));
    }
    std::vector<std::size_t> assignments(3000);
    for (auto& a : assignments) a = uniform_index(rng, 12);
    const auto full = build_mixture(assignments, WeightVector(std::vector<double>(12, 1.0)), 1);
    std::vector<std::size_t> all(assignments.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const bool identity = full && full->flattened() == all;
    return {ok == kEq1Pairs && identity, std::to_string(ok) + "/1000 within 0.5 (max " + fmt(worst, 3) +
                                             "), w=1 " + (identity ? "reproduces" : "DOES NOT reproduce") +
                                             " the full set"};
}

Verdict ac5() {
    Rng rng(derive_seed(5, "acceptance-gradient"));
    RawTable table;
    table.column_names = {"a", "b", "y1", "y2"};
    table.roles = {ColumnRole::input, ColumnRole::input, ColumnRole::target, ColumnRole::target};
    const std::size_t rows = 400;
    table.values = Matrix(rows, 4);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < 4; ++c) table.values(i, c) = uniform01(rng);
        table.profile_ids.push_back(0);
        table.splits.push_back(Split::train);
    }
    const auto windows = make_windows(table, 300, 1);
    PatchNetShape shape;
    shape.window_length = 300;
    shape.patch_len = 30;
    shape.input_channels = 2;
    shape.target_channels = 2;
    double worst = 0.0;
    std::size_t checked = 0;
    for (int b = 0; b < kGradBatches; ++b) {
        PatchNet net = PatchNet::initialized(shape, derive_seed(5, "net", static_cast<std::uint64_t>(b)));
        auto params = net.parameters();
        // move biases off zero so every parameter gets a non-trivial gradient
        for (auto& p : params) p += 0.05 * standard_normal(rng);
        std::vector<std::size_t> batch(4);
        for (auto& w : batch) w = uniform_index(rng, windows.size());
        std::vector<double> grad;
        net.loss_and_gradient(windows, batch, grad);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + kGradStep;
            const double up = net.loss(windows, batch);
            params[i] = keep - kGradStep;
            const double down = net.loss(windows, batch);
            params[i] = keep;
            const double fd = (up - down) / (2.0 * kGradStep);
            const double rel =
                std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), kGradDenominatorFloor});
            worst = std::max(worst, rel);
            ++checked;
        }
    }
    return {worst < kGradRelTol, std::to_string(checked) + " parameter checks, max relative error " + fmt(worst, 3)};
}

Verdict ac6() {
    Rng rng(derive_seed(6, "acceptance-tokens"));
    int ok = 0;
    for (int i = 0; i < kTokenPairs; ++i) {
        const std::uint64_t budget = 1 + uniform_index(rng, 400'000'000);
        const std::uint64_t n = 1 + uniform_index(rng, 200'000);
        const std::uint64_t e = compute_epochs(budget, n, kPatchesPerWindow);
        const bool enough = e * n * kPatchesPerWindow >= budget;
        const bool tight = (e - 1) * n * kPatchesPerWindow < budget;
        ok += enough && tight && e >= 1;
    }
    PatchNetShape s;
    s.window_length = 300;
    s.patch_len = 30;
    const bool ppw = s.patches() == kPatchesPerWindow;
    return {ok == kTokenPairs && ppw, std::to_string(ok) + "/50 pairs satisfy both bounds, W=300/patch 30 gives " +
                                          std::to_string(s.patches()) + " patches"};
}

Verdict ac7() {
    std::vector<std::string> failures;
    const auto near = [&](double got, double want, const std::string& what) {
        if (!(std::abs(got - want) <= kGoldenTol)) failures.push_back(what + " got " + fmt(got, 17));
    };

    Schema schema;
    std::istringstream schema_text("profile_id = id\nx = input\ny = target\n");
    schema = parse_schema(schema_text);
    std::istringstream csv(
        "profile_id,x,y\n"
        "1,1,0\n1,2,0\n1,3,0\n1,4,0\n"
        "2,8,1\n2,0,1\n2,4,1\n"
        "3,2,5\n3,6,5\n3,10,5\n");
    const auto raw = parse_dataset(csv, schema);
    const auto ewma = derive_ewma(raw, std::vector<int>{3});
    const std::size_t col = 2;
    // alpha = 0.5, seeded per profile
    const std::vector<double> want = {1, 1.5, 2.25, 3.125, 8, 4, 4, 2, 4, 7};
    for (std::size_t i = 0; i < want.size(); ++i) near(ewma.values(i, col), want[i], "ewma row " + std::to_string(i));

    SplitSpec split;
    split.val_profiles = {3};
    const auto tagged = split_by_profile(raw, split);
    const auto scaler = fit_scaler(tagged, split);
    const auto scaled = apply_scaler(tagged, scaler);
    // x over train rows spans [0, 8]; y over train rows spans [0, 1]
    near(scaled.values(0, 0), 1.0 / 8.0, "scaled x min-side");
    near(scaled.values(4, 0), 1.0, "scaled x at max");
    near(scaled.values(5, 0), 0.0, "scaled x at min");
    near(scaled.values(9, 0), 10.0 / 8.0, "scaled val x above range");
    near(scaled.values(7, 1), 5.0, "scaled val y above range");
    near(scaled.values(0, 1), 0.0, "scaled y at min");

    std::istringstream flat("profile_id,x,y\n1,7,1\n1,7,2\n2,7,3\n");
    const auto flat_raw = parse_dataset(flat, schema);
    const auto flat_scaled = apply_scaler(split_by_profile(flat_raw, SplitSpec{}), fit_scaler(flat_raw, SplitSpec{}));
    near(flat_scaled.values(1, 0), 0.0, "constant column");

    struct Case {
        std::size_t t, w, s, expected;
    };
    for (const auto& c : {Case{300, 300, 1, 1}, Case{299, 300, 1, 0}, Case{1000, 300, 1, 701}, Case{10, 3, 2, 4},
                          Case{10, 3, 3, 3}, Case{5, 5, 7, 1}}) {
        if (window_count(c.t, c.w, c.s) != c.expected) {
            failures.push_back("window_count(" + std::to_string(c.t) + "," + std::to_string(c.w) + "," +
                               std::to_string(c.s) + ")");
        }
    }
    const auto windows = make_windows(tagged, 3, 1);
    if (windows.size() != 2 + 1 + 1) failures.push_back("make_windows total");

    std::string detail = "EWMA span 3, scaler endpoints, window counts";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

Verdict ac8() {
    TempDir dir("determinism");
    std::vector<std::string> differing;
    auto a = write_synthetic_inputs(dir.path(), 2024);
    a.jobs = 1;
    a.train.kind = TrainerKind::ridge;
    auto b = a;
    a.out_dir = dir.path() / "run_a";
    b.out_dir = dir.path() / "run_b";
    run_pipeline(a);
    run_pipeline(b);
    for (const char* f : {"report/summary.json", "report/weights.csv", "report/counts.csv"}) {
        const auto x = slurp(a.out_dir / f);
        if (x.empty() || x != slurp(b.out_dir / f)) differing.push_back(f);
    }
    std::string detail = "summary.json, weights.csv, counts.csv ";
    detail += differing.empty() ? "byte-identical" : "differ:";
    for (const auto& f : differing) detail += " " + f;
    return {differing.empty(), detail};
}

Verdict ac9() {
    Rng rng(derive_seed(9, "acceptance-parzen"));
    double worst = 0.0;
    for (int s = 0; s < kParzenSets; ++s) {
        std::vector<double> obs(uniform_index(rng, 50));
        for (auto& v : obs) v = uniform01(rng);
        // some sets hug the bounds
        if (s % 4 == 0 && !obs.empty()) obs[0] = 0.0;
        if (s % 4 == 1 && !obs.empty()) obs[0] = 1.0;
        const ParzenEstimator p(obs);
        const double h = 1.0 / static_cast<double>(kParzenSteps);
        double sum = 0.5 * (p.density(0.0) + p.density(1.0));
        for (std::size_t i = 1; i < kParzenSteps; ++i) sum += p.density(static_cast<double>(i) * h);
        worst = std::max(worst, std::abs(sum * h - 1.0));
    }
    return {worst <= kParzenTol, "100 sets, max |integral - 1| = " + fmt(worst, 3)};
}

Verdict ac10() {
    TempDir dir("external");
    Matrix x(6, 1, 0.0), y(6, 2, 1.0);
    TrainingData data;
    data.windows.length = 1;
    data.windows.inputs = x;
    data.windows.targets = y;
    data.windows.input_names = {"x"};
    data.windows.target_names = {"yoke", "tooth"};
    for (std::size_t i = 0; i < 6; ++i) data.windows.windows.push_back({i, 0, i < 4 ? Split::train : Split::val, 0});
    data.features = x;

    const std::string good =
        R"(printf '{"avg_mse": 2.0, "targets": {"yoke": {"mse": 1.75, "mae": 0.5}, "tooth": {"mse": 2.25, "mae": 0.5}}}' > {handoff}/metrics.json)";
    TrainConfig config;
    config.kind = TrainerKind::external;
    config.patch_len = 1;
    const auto ext = [&](const std::string& command) {
        ExternalTrainerConfig e;
        e.command = command;
        e.handoff_root = dir.path();
        e.timeout_s = 30.0;
        return e;
    };
    const auto good_ext = ext(good);
    const auto round_trip = train_and_score(std::vector<std::size_t>{0, 1}, data, config, false, &good_ext, {});
    const bool echo = round_trip.val.avg_mse == 2.0 && round_trip.val.targets.size() == 2 &&
                      round_trip.val.targets[1].mse == 2.25;

    const std::vector<ExternalTrainerConfig> stubs = {good_ext, ext("exit 7"),
                                                      ext("printf '{\"avg_mse\": ' > {handoff}/metrics.json")};
    StudyConfig sc;
    sc.k = 2;
    sc.n_trials = 9;
    sc.seed = 10;
    StudyResult study;
    bool aborted = false;
    try {
        study = run_study(sc, [&](const TrialContext& ctx) {
            const auto& e = stubs[ctx.trial_id % 3];
            const auto s = train_and_score(std::vector<std::size_t>{0}, data, config, false, &e,
                                           {ctx.trial_id, ctx.seed, "trial"});
            return TrialOutcome{s.val.avg_mse, 1, {1, 0}, s.val.targets};
        });
    } catch (const std::exception&) {
        aborted = true;
    }
    std::size_t nonzero = 0, malformed = 0;
    for (const auto& t : study.trials) {
        nonzero += !t.completed() && t.failure.find("status 7") != std::string::npos;
        malformed += !t.completed() && t.failure.find("malformed") != std::string::npos;
    }
    const bool pass = echo && !aborted && study.trials.size() == 9 && study.completed_count() == 3 && nonzero == 3 &&
                      malformed == 3 && study.best().objective == 2.0;
    return {pass, std::string("round trip ") + (echo ? "ok" : "WRONG") + ", study " +
                      (aborted ? "ABORTED" : "completed") + " with " + std::to_string(study.completed_count()) +
                      " ok, " + std::to_string(nonzero) + " nonzero-exit and " + std::to_string(malformed) +
                      " malformed failures"};
}

}  // namespace

int main() {
    int failures = 0;
    const auto report = [&](const char* id, const std::function<Verdict()>& check) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        std::cout << (v.pass ? "PASS " : "FAIL ") << id << ": " << v.detail << std::endl;
        failures += !v.pass;
    };

    BenchmarkRuns runs;
    bool benchmarks_ok = true;
    std::string benchmark_error;
    try {
        runs = run_benchmarks();
    } catch (const std::exception& e) {
        benchmarks_ok = false;
        benchmark_error = e.what();
    }
    const auto needs_runs = [&](Verdict (*f)(const BenchmarkRuns&)) {
        return [&, f] { return benchmarks_ok ? f(runs) : Verdict{false, "benchmark threw: " + benchmark_error}; };
    };
    report("AC1", needs_runs(ac1));
    report("AC2", needs_runs(ac2));
    report("AC3", ac3);
    report("AC4", ac4);
    report("AC5", ac5);
    report("AC6", ac6);
    report("AC7", ac7);
    report("AC8", ac8);
    report("AC9", ac9);
    report("AC10", ac10);
    std::cout << (failures == 0 ? "acceptance: PASS" : "acceptance: FAIL (" + std::to_string(failures) + ")")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
