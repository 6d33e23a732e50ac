#include "tsmix/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "text_io.hpp"
#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

using nlohmann::json;

namespace {

constexpr std::string_view kTrialSchema = "tsmix.trial/1";
constexpr std::string_view kStudySchema = "tsmix.study/1";

}  // namespace

const char* to_string(SamplerKind kind) noexcept { return kind == SamplerKind::tpe ? "tpe" : "random"; }

SamplerKind parse_sampler(std::string_view text) {
    if (text == "tpe") return SamplerKind::tpe;
    if (text == "random") return SamplerKind::random;
    throw Error(ErrorKind::invalid_argument, "unknown sampler '" + std::string(text) + "' (expected tpe|random)");
}

void StudyConfig::validate() const {
    if (n_trials < 1) throw Error(ErrorKind::invalid_argument, "n_trials must be at least 1");
    if (jobs < 1) throw Error(ErrorKind::invalid_argument, "jobs must be at least 1");
    if (k < 1) throw Error(ErrorKind::invalid_argument, "k must be at least 1");
    if (tpe.n_candidates < 1) throw Error(ErrorKind::invalid_argument, "n_candidates must be at least 1");
}

const TrialRecord& StudyResult::best() const {
    if (!best_trial) throw Error(ErrorKind::invalid_argument, "study has no completed trial");
    return trials.at(*best_trial);
}

std::size_t StudyResult::completed_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(trials.begin(), trials.end(), [](const TrialRecord& t) { return t.completed(); }));
}

std::optional<std::size_t> find_best_trial(const std::vector<TrialRecord>& trials) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (!trials[i].completed()) continue;
        if (!best || trials[i].objective < trials[*best].objective) best = i;
    }
    return best;
}

StudyResult run_study(const StudyConfig& config, const TrialObjective& objective) {
    config.validate();

    std::mutex mutex;
    std::vector<TrialRecord> history;
    history.reserve(config.n_trials);
    std::size_t next_id = 0;

    const auto worker = [&] {
        while (true) {
            std::size_t id = 0;
            std::vector<TrialRecord> snapshot;
            {
                std::lock_guard lock(mutex);
                if (next_id >= config.n_trials) return;
                id = next_id++;
                snapshot = history;
            }
            // Sort so the proposal does not depend on completion order.
            std::sort(snapshot.begin(), snapshot.end(),
                      [](const TrialRecord& a, const TrialRecord& b) { return a.id < b.id; });

            Rng rng(derive_seed(config.seed, "propose", id));
            TrialRecord record;
            record.id = id;
            record.weights = config.sampler == SamplerKind::tpe ? tpe_suggest(snapshot, config.k, config.tpe, rng)
                                                                : random_suggest(config.k, rng);

            const auto start = std::chrono::steady_clock::now();
            try {
                const TrialContext ctx{id, record.weights, derive_seed(config.seed, "trial", id)};
                TrialOutcome outcome = objective(ctx);
                if (!std::isfinite(outcome.objective)) throw TrialFailure("objective is not finite");
                record.objective = outcome.objective;
                record.n_mix = outcome.n_mix;
                record.counts = std::move(outcome.counts);
                record.targets = std::move(outcome.targets);
                record.state = TrialState::complete;
            } catch (const std::exception& e) {
                record.state = TrialState::failed;
                record.failure = e.what();
            } catch (...) {
                record.state = TrialState::failed;
                record.failure = "unknown exception";
            }
            record.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

            std::lock_guard lock(mutex);
            history.push_back(std::move(record));
        }
    };

    const std::size_t n_threads = std::min(config.jobs, config.n_trials);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    std::sort(history.begin(), history.end(), [](const TrialRecord& a, const TrialRecord& b) { return a.id < b.id; });

    StudyResult result;
    result.k = config.k;
    result.sampler = config.sampler;
    result.n_startup = config.tpe.n_startup;
    result.n_candidates = config.tpe.n_candidates;
    result.seed = config.seed;
    result.trials = std::move(history);
    result.best_trial = find_best_trial(result.trials);
    if (!result.best_trial) {
        const std::string cause = result.trials.empty() ? "no trials" : result.trials.front().failure;
        throw Error(ErrorKind::numeric, "all " + std::to_string(result.trials.size()) +
                                            " trials failed; first cause: " + cause);
    }
    return result;
}

namespace {

json targets_to_json(const std::vector<TargetMetric>& targets) {
    json out = json::object();
    for (const auto& t : targets) out[t.name] = {{"mse", t.mse}, {"mae", t.mae}};
    return out;
}

}  // namespace

void write_trial_log(const StudyResult& study, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    const json header = {
        {"schema", kStudySchema},
        {"k", study.k},
        {"bounds", {0.0, 1.0}},
        {"sampler", to_string(study.sampler)},
        {"n_startup", study.n_startup},
        {"n_candidates", study.n_candidates},
        {"seed", study.seed},
        {"n_trials", study.trials.size()},
    };
    out << header.dump() << '\n';
    for (const auto& t : study.trials) {
        json line = {
            {"schema", kTrialSchema},
            {"trial_id", t.id},
            {"state", to_string(t.state)},
            {"weights", t.weights.w},
            {"n_mix", t.n_mix},
            {"counts", t.counts},
            {"wall_time_s", t.wall_time_s},
        };
        if (t.completed()) {
            line["objective"] = t.objective;
            line["targets"] = targets_to_json(t.targets);
        } else {
            line["objective"] = nullptr;
            line["error"] = t.failure;
        }
        // Target order is kept explicitly since JSON objects are unordered.
        json order = json::array();
        for (const auto& m : t.targets) order.push_back(m.name);
        line["target_order"] = std::move(order);
        out << line.dump() << '\n';
    }
    detail::finish_output(out, path);
}

StudyResult read_trial_log(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::string line;
    StudyResult study;
    bool have_header = false;
    std::size_t line_no = 0;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            const json j = json::parse(line);
            const auto schema = j.at("schema").get<std::string>();
            if (schema == kStudySchema) {
                study.k = j.at("k").get<std::size_t>();
                study.sampler = parse_sampler(j.at("sampler").get<std::string>());
                study.n_startup = j.at("n_startup").get<std::size_t>();
                study.n_candidates = j.at("n_candidates").get<std::size_t>();
                study.seed = j.at("seed").get<std::uint64_t>();
                have_header = true;
                continue;
            }
            if (schema != kTrialSchema) throw Error(ErrorKind::parse, "unknown schema '" + schema + "'");
            TrialRecord t;
            t.id = j.at("trial_id").get<std::size_t>();
            t.state = j.at("state").get<std::string>() == "complete" ? TrialState::complete : TrialState::failed;
            t.weights = WeightVector(j.at("weights").get<std::vector<double>>());
            t.n_mix = j.at("n_mix").get<std::size_t>();
            t.counts = j.at("counts").get<std::vector<std::size_t>>();
            t.wall_time_s = j.at("wall_time_s").get<double>();
            if (t.completed()) {
                t.objective = j.at("objective").get<double>();
                const auto& targets = j.at("targets");
                for (const auto& name : j.at("target_order")) {
                    const auto key = name.get<std::string>();
                    t.targets.push_back({key, targets.at(key).at("mse").get<double>(),
                                         targets.at(key).at("mae").get<double>()});
                }
            } else {
                t.failure = j.value("error", std::string{});
            }
            study.trials.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) throw Error(ErrorKind::parse, path.string() + ": missing study header line");
    for (std::size_t i = 0; i < study.trials.size(); ++i) {
        if (study.trials[i].id != i) throw Error(ErrorKind::parse, path.string() + ": trial ids are not dense");
    }
    study.best_trial = find_best_trial(study.trials);
    return study;
}

void write_best_weights(const StudyResult& study, const std::filesystem::path& path) {
    const auto& best = study.best();
    json out = json::object();
    for (std::size_t j = 0; j < best.weights.size(); ++j) out[std::to_string(j)] = best.weights[j];
    auto file = detail::open_output(path);
    file << out.dump(2) << '\n';
    detail::finish_output(file, path);
}

}  // namespace tsmix
