#include "tsmix/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Dense>

#include "text_io.hpp"
#include "tsmix/embedding.hpp"
#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

const char* to_string(TrainerKind kind) noexcept {
    switch (kind) {
        case TrainerKind::ridge: return "ridge";
        case TrainerKind::patch_net: return "patch-net";
        case TrainerKind::external: return "external";
    }
    return "?";
}

TrainerKind parse_trainer(std::string_view text) {
    if (text == "ridge") return TrainerKind::ridge;
    if (text == "patch-net") return TrainerKind::patch_net;
    if (text == "external") return TrainerKind::external;
    throw Error(ErrorKind::invalid_argument,
                "unknown trainer '" + std::string(text) + "' (expected ridge|patch-net|external)");
}

void TrainConfig::validate(std::size_t window_length) const {
    if (token_budget < 1) throw Error(ErrorKind::invalid_argument, "token budget must be at least 1");
    if (batch_size < 1) throw Error(ErrorKind::invalid_argument, "batch size must be at least 1");
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
        throw Error(ErrorKind::invalid_argument, "warmup fraction must lie strictly between 0 and 1");
    }
    if (patch_len == 0 || window_length % patch_len != 0) {
        throw Error(ErrorKind::invalid_argument, "patch length " + std::to_string(patch_len) +
                                                     " must divide the window length " + std::to_string(window_length));
    }
    if (kind == TrainerKind::ridge && !(ridge_lambda > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "ridge penalty must be positive");
    }
    if (!(peak_lr > 0.0)) throw Error(ErrorKind::invalid_argument, "learning rate must be positive");
}

TrainingData prepare_training_data(WindowSet windows) {
    TrainingData data;
    data.features = featurize_windows(windows);
    data.windows = std::move(windows);
    return data;
}

std::uint64_t compute_epochs(std::uint64_t budget, std::uint64_t n_windows, std::uint64_t patches_per_window) {
    if (budget < 1 || n_windows < 1 || patches_per_window < 1) {
        throw Error(ErrorKind::invalid_argument, "compute_epochs: all inputs must be at least 1");
    }
    const std::uint64_t per_epoch = n_windows * patches_per_window;
    return std::max<std::uint64_t>(1, (budget + per_epoch - 1) / per_epoch);
}

double lr_at_step(std::size_t step, std::size_t total_steps, double peak, double warmup_fraction) {
    if (total_steps == 0 || step >= total_steps) {
        throw Error(ErrorKind::invalid_argument, "lr_at_step: step outside [0, total_steps)");
    }
    const auto warmup = static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
    return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

std::vector<double> RidgeModel::predict(std::span<const double> features) const {
    const std::size_t F = coefficients.rows - 1;
    if (features.size() != F) throw Error(ErrorKind::invalid_argument, "ridge: feature size mismatch");
    std::vector<double> out(coefficients.cols);
    for (std::size_t t = 0; t < coefficients.cols; ++t) {
        double y = coefficients(F, t);
        for (std::size_t f = 0; f < F; ++f) y += coefficients(f, t) * features[f];
        out[t] = y;
    }
    return out;
}

RidgeModel train_ridge(std::span<const std::size_t> mixture, const TrainingData& data, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "ridge penalty must be positive");
    if (mixture.empty()) throw TrialFailure("ridge: empty mixture", ErrorKind::invalid_argument);
    const auto F = static_cast<Eigen::Index>(data.features.cols);
    const auto T = static_cast<Eigen::Index>(data.windows.target_channels());
    const auto n = static_cast<Eigen::Index>(mixture.size());

    Eigen::MatrixXd X(n, F + 1);
    Eigen::MatrixXd Y(n, T);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto w = mixture[static_cast<std::size_t>(r)];
        const auto f = data.features.row(w);
        for (Eigen::Index c = 0; c < F; ++c) X(r, c) = f[static_cast<std::size_t>(c)];
        X(r, F) = 1.0;
        const auto y = data.windows.last_target(w);
        for (Eigen::Index t = 0; t < T; ++t) Y(r, t) = y[static_cast<std::size_t>(t)];
    }
    Eigen::MatrixXd A = X.transpose() * X;
    A.diagonal().head(F).array() += lambda;
    const Eigen::MatrixXd B = X.transpose() * Y;

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15) {
        throw TrialFailure("ridge system is numerically singular (rcond " + std::to_string(ldlt.rcond()) +
                           "); increase the penalty");
    }
    const Eigen::MatrixXd coef = ldlt.solve(B);
    if (!coef.allFinite()) throw TrialFailure("ridge solve produced non-finite coefficients");

    RidgeModel model;
    model.coefficients = Matrix(static_cast<std::size_t>(F + 1), static_cast<std::size_t>(T));
    for (Eigen::Index r = 0; r <= F; ++r) {
        for (Eigen::Index t = 0; t < T; ++t) {
            model.coefficients(static_cast<std::size_t>(r), static_cast<std::size_t>(t)) = coef(r, t);
        }
    }
    return model;
}

PatchNet train_patch_net(std::span<const std::size_t> mixture, const TrainingData& data, const TrainConfig& config,
                         TrainingLog* log) {
    const auto& windows = data.windows;
    config.validate(windows.length);
    if (mixture.empty()) throw TrialFailure("patch-net: empty mixture", ErrorKind::invalid_argument);

    PatchNetShape shape;
    shape.window_length = windows.length;
    shape.patch_len = config.patch_len;
    shape.input_channels = windows.input_channels();
    shape.target_channels = windows.target_channels();
    shape.embed_dim = config.embed_dim;
    shape.hidden = config.hidden;
    PatchNet net = PatchNet::initialized(shape, derive_seed(config.seed, "patch-net-init"));

    const std::uint64_t ppw = shape.patches();
    const std::uint64_t n = mixture.size();
    const std::uint64_t epochs = compute_epochs(config.token_budget, n, ppw);
    const std::size_t B = config.batch_size;

    // Steps needed to reach the budget, stopping mid-epoch when it is hit.
    std::size_t total_steps = 0;
    {
        std::uint64_t tokens = 0;
        for (std::uint64_t e = 0; e < epochs && tokens < config.token_budget; ++e) {
            for (std::uint64_t start = 0; start < n && tokens < config.token_budget; start += B) {
                tokens += std::min<std::uint64_t>(B, n - start) * ppw;
                ++total_steps;
            }
        }
    }

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto params = net.parameters();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    std::vector<std::size_t> order(mixture.begin(), mixture.end());
    Rng shuffle_rng(derive_seed(config.seed, "patch-net-shuffle"));

    TrainingLog local;
    std::size_t step = 0;
    double b1t = 1.0, b2t = 1.0;
    for (std::uint64_t e = 0; e < epochs && step < total_steps; ++e) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
        double epoch_sum = 0.0;
        std::size_t epoch_windows = 0;
        for (std::size_t start = 0; start < order.size() && step < total_steps; start += B) {
            const std::span<const std::size_t> batch(order.data() + start, std::min(B, order.size() - start));
            const double loss = net.loss_and_gradient(windows, batch, grad);
            if (!std::isfinite(loss)) {
                throw TrialFailure("patch-net loss became non-finite at step " + std::to_string(step) + " (epoch " +
                                   std::to_string(e) + ")");
            }
            const double lr = lr_at_step(step, total_steps, config.peak_lr, config.warmup_fraction);
            b1t *= beta1;
            b2t *= beta2;
            for (std::size_t p = 0; p < params.size(); ++p) {
                m[p] = beta1 * m[p] + (1.0 - beta1) * grad[p];
                v[p] = beta2 * v[p] + (1.0 - beta2) * grad[p] * grad[p];
                const double m_hat = m[p] / (1.0 - b1t);
                const double v_hat = v[p] / (1.0 - b2t);
                params[p] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
            epoch_sum += loss * static_cast<double>(batch.size());
            epoch_windows += batch.size();
            local.tokens += batch.size() * ppw;
            ++step;
        }
        local.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_windows));
    }
    local.epochs = local.epoch_loss.size();
    local.steps = step;
    if (log) *log = std::move(local);
    return net;
}

std::vector<double> predict(const ForecastModel& model, const TrainingData& data, std::size_t window) {
    if (const auto* ridge = std::get_if<RidgeModel>(&model)) return ridge->predict(data.features.row(window));
    return std::get<PatchNet>(model).predict(data.windows.input_block(window));
}

TrialMetrics evaluate(const ForecastModel& model, const TrainingData& data, Split split) {
    if (split == Split::train) throw Error(ErrorKind::invalid_argument, "evaluate only scores val or test windows");
    const auto& windows = data.windows;
    const std::size_t T = windows.target_channels();
    std::vector<double> se(T, 0.0), ae(T, 0.0);
    std::size_t n = 0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        if (windows.windows[w].split != split) continue;
        const auto y = predict(model, data, w);
        const auto target = windows.last_target(w);
        for (std::size_t t = 0; t < T; ++t) {
            const double d = y[t] - target[t];
            se[t] += d * d;
            ae[t] += std::abs(d);
        }
        ++n;
    }
    if (n == 0) throw Error(ErrorKind::invalid_argument, std::string("no ") + to_string(split) + " windows to evaluate");

    TrialMetrics metrics;
    for (std::size_t t = 0; t < T; ++t) {
        metrics.targets.push_back({windows.target_names[t], se[t] / static_cast<double>(n), ae[t] / static_cast<double>(n)});
    }
    metrics.avg_mse = average_mse(metrics.targets);
    return metrics;
}

MixtureScores train_and_score(std::span<const std::size_t> mixture, const TrainingData& data,
                              const TrainConfig& config, bool with_test, const ExternalTrainerConfig* external,
                              const ExternalRequest& request) {
    config.validate(data.windows.length);
    MixtureScores scores;
    switch (config.kind) {
        case TrainerKind::ridge: {
            const ForecastModel model = train_ridge(mixture, data, config.ridge_lambda);
            scores.val = evaluate(model, data, Split::val);
            if (with_test) scores.test = evaluate(model, data, Split::test);
            break;
        }
        case TrainerKind::patch_net: {
            TrainingLog log;
            const ForecastModel model = train_patch_net(mixture, data, config, &log);
            scores.val = evaluate(model, data, Split::val);
            scores.val.tokens = log.tokens;
            scores.val.epochs = log.epochs;
            if (with_test) {
                scores.test = evaluate(model, data, Split::test);
                scores.test->tokens = log.tokens;
                scores.test->epochs = log.epochs;
            }
            break;
        }
        case TrainerKind::external: {
            if (!external || external->command.empty()) {
                throw Error(ErrorKind::invalid_argument, "external trainer selected but no command configured");
            }
            auto result = external_trainer_invoke(mixture, data, config, *external, request);
            scores.val = std::move(result.val);
            if (with_test) scores.test = std::move(result.test);
            break;
        }
    }
    return scores;
}

}  // namespace tsmix
