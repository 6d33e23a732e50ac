#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "text_io.hpp"
#include "tsmix/error.hpp"
#include "tsmix/trainer.hpp"

namespace tsmix {

using nlohmann::json;

namespace {

std::string expand_command(std::string command, const std::string& handoff) {
    const std::string key = "{handoff}";
    for (auto pos = command.find(key); pos != std::string::npos; pos = command.find(key, pos + handoff.size())) {
        command.replace(pos, key.size(), handoff);
    }
    return command;
}

// Runs `/bin/sh -c command` in its own process group with output captured to
// `log_path`. Returns the exit status; throws on timeout.
int run_command(const std::string& command, const std::filesystem::path& log_path, double timeout_s) {
    const std::string log = log_path.string();
    const pid_t pid = fork();
    if (pid < 0) throw TrialFailure(std::string("fork failed: ") + std::strerror(errno), ErrorKind::external);
    if (pid == 0) {
        setpgid(0, 0);
        const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDOUT_FILENO);
            dup2(fd, STDERR_FILENO);
            close(fd);
        }
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    int status = 0;
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) {
            throw TrialFailure(std::string("waitpid failed: ") + std::strerror(errno), ErrorKind::external);
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            throw TrialFailure("external trainer timed out after " + std::to_string(timeout_s) + " s",
                               ErrorKind::external);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

TrialMetrics parse_metric_block(const json& block, std::span<const std::string> target_names, const std::string& where) {
    const auto fail = [&](const std::string& what) -> TrialFailure {
        return TrialFailure(where + ": schema error: " + what, ErrorKind::external);
    };
    if (!block.is_object()) throw fail("expected an object");
    if (!block.contains("avg_mse") || !block["avg_mse"].is_number()) throw fail("missing numeric 'avg_mse'");
    if (!block.contains("targets") || !block["targets"].is_object()) throw fail("missing 'targets' object");

    TrialMetrics metrics;
    const auto& targets = block["targets"];
    for (const auto& name : target_names) {
        if (!targets.contains(name)) throw fail("missing entry for target '" + name + "'");
        const auto& entry = targets[name];
        if (!entry.is_object() || !entry.contains("mse") || !entry.contains("mae") || !entry["mse"].is_number() ||
            !entry["mae"].is_number()) {
            throw fail("target '" + name + "' needs numeric 'mse' and 'mae'");
        }
        metrics.targets.push_back({name, entry["mse"].get<double>(), entry["mae"].get<double>()});
    }
    metrics.avg_mse = block["avg_mse"].get<double>();
    if (!std::isfinite(metrics.avg_mse)) throw fail("'avg_mse' is not finite");
    const double mean = average_mse(metrics.targets);
    if (std::abs(mean - metrics.avg_mse) > 1e-6 * std::max(1.0, std::abs(mean))) {
        throw fail("'avg_mse' does not equal the mean of the per-target MSEs");
    }
    if (block.contains("tokens") && block["tokens"].is_number_unsigned()) metrics.tokens = block["tokens"].get<std::uint64_t>();
    if (block.contains("epochs") && block["epochs"].is_number_unsigned()) metrics.epochs = block["epochs"].get<std::uint64_t>();
    return metrics;
}

}  // namespace

ExternalResult parse_metrics_file(const std::filesystem::path& path, std::span<const std::string> target_names) {
    std::ifstream in(path);
    if (!in) throw TrialFailure("external trainer wrote no metrics file at " + path.string(), ErrorKind::external);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw TrialFailure(path.string() + ": malformed JSON: " + e.what(), ErrorKind::external);
    }
    ExternalResult result;
    result.val = parse_metric_block(doc, target_names, path.string());
    if (doc.contains("test")) result.test = parse_metric_block(doc["test"], target_names, path.string() + " (test)");
    return result;
}

ExternalResult external_trainer_invoke(std::span<const std::size_t> mixture, const TrainingData& data,
                                       const TrainConfig& config, const ExternalTrainerConfig& external,
                                       const ExternalRequest& request) {
    if (external.command.empty()) throw Error(ErrorKind::invalid_argument, "no external trainer command configured");
    const auto dir = external.handoff_root / (request.tag + "_" + std::to_string(request.trial_id));
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    std::filesystem::create_directories(dir);

    {
        auto out = detail::open_output(dir / "mixture.csv");
        out << "window_index\n";
        for (const auto w : mixture) out << w << '\n';
        detail::finish_output(out, dir / "mixture.csv");
    }
    {
        json cfg = {
            {"schema", "tsmix.handoff/1"},
            {"trial_id", request.trial_id},
            {"tag", request.tag},
            {"seed", request.seed},
            {"n_windows", mixture.size()},
            {"window_length", data.windows.length},
            {"stride", data.windows.stride},
            {"input_names", data.windows.input_names},
            {"target_names", data.windows.target_names},
            {"token_budget", config.token_budget},
            {"batch_size", config.batch_size},
            {"peak_lr", config.peak_lr},
            {"warmup_fraction", config.warmup_fraction},
            {"patch_len", config.patch_len},
            {"metrics_file", "metrics.json"},
        };
        for (const auto& [key, value] : external.context) cfg["context"][key] = value;
        auto out = detail::open_output(dir / "config.json");
        out << cfg.dump(2) << '\n';
        detail::finish_output(out, dir / "config.json");
    }

    const std::string command = expand_command(external.command, dir.string());
    const int status = run_command(command, dir / "trainer.log", external.timeout_s);
    if (status != 0) {
        throw TrialFailure("external trainer exited with status " + std::to_string(status) + " (log: " +
                               (dir / "trainer.log").string() + ")",
                           ErrorKind::external);
    }
    return parse_metrics_file(dir / "metrics.json", data.windows.target_names);
}

}  // namespace tsmix
