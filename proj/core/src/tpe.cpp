#include "tsmix/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tsmix {

namespace {

constexpr double kLow = 0.0;
constexpr double kHigh = 1.0;

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

std::size_t default_gamma(std::size_t n) noexcept {
    const std::size_t quarter = (n + 3) / 4;
    return std::min<std::size_t>(quarter, 25);
}

GammaSplit gamma_split(std::span<const TrialRecord> history, const GammaFn& gamma) {
    std::vector<const TrialRecord*> done;
    for (const auto& t : history) {
        if (t.completed()) done.push_back(&t);
    }
    std::sort(done.begin(), done.end(), [](const TrialRecord* a, const TrialRecord* b) {
        if (a->objective != b->objective) return a->objective < b->objective;
        return a->id < b->id;
    });
    const std::size_t n_good = std::min(gamma(done.size()), done.size());
    GammaSplit split;
    split.good.assign(done.begin(), done.begin() + static_cast<std::ptrdiff_t>(n_good));
    split.bad.assign(done.begin() + static_cast<std::ptrdiff_t>(n_good), done.end());
    return split;
}

ParzenEstimator::ParzenEstimator(std::span<const double> observations)
    : mus_(observations.begin(), observations.end()) {
    std::sort(mus_.begin(), mus_.end());
    sigmas_.resize(mus_.size());
    norms_.resize(mus_.size());
    // Bandwidth: the larger gap to the neighbouring observation (or bound),
    // floored at range / min(100, n + 2), counting the prior as a kernel.
    const double floor = (kHigh - kLow) / static_cast<double>(std::min<std::size_t>(100, mus_.size() + 2));
    for (std::size_t i = 0; i < mus_.size(); ++i) {
        const double left = i == 0 ? kLow : mus_[i - 1];
        const double right = i + 1 == mus_.size() ? kHigh : mus_[i + 1];
        const double sigma = std::max(mus_[i] - left, right - mus_[i]);
        sigmas_[i] = std::max(sigma, floor);
        norms_[i] = normal_cdf((kHigh - mus_[i]) / sigmas_[i]) - normal_cdf((kLow - mus_[i]) / sigmas_[i]);
    }
}

double ParzenEstimator::density(double x) const {
    if (x < kLow || x > kHigh) return 0.0;
    double sum = 1.0 / (kHigh - kLow);
    for (std::size_t i = 0; i < mus_.size(); ++i) {
        const double z = (x - mus_[i]) / sigmas_[i];
        sum += std::exp(-0.5 * z * z) / (sigmas_[i] * std::sqrt(2.0 * std::numbers::pi) * norms_[i]);
    }
    return sum / static_cast<double>(mus_.size() + 1);
}

double ParzenEstimator::sample(Rng& rng) const {
    const std::size_t component = uniform_index(rng, mus_.size() + 1);
    if (component == mus_.size()) return kLow + (kHigh - kLow) * uniform01(rng);
    // Rejection from the untruncated Gaussian; acceptance is at least ~1/2
    // because every centre lies inside the bounds.
    while (true) {
        const double x = mus_[component] + sigmas_[component] * standard_normal(rng);
        if (x >= kLow && x <= kHigh) return x;
    }
}

double parzen_density(std::span<const double> observations, double x) {
    return ParzenEstimator(observations).density(x);
}

WeightVector random_suggest(std::size_t k, Rng& rng) {
    std::vector<double> w(k);
    for (auto& v : w) v = uniform01(rng);
    return WeightVector(std::move(w));
}

WeightVector tpe_suggest(std::span<const TrialRecord> history, std::size_t k, const TpeOptions& options, Rng& rng) {
    const auto split = gamma_split(history, options.gamma);
    if (split.good.size() + split.bad.size() < std::max<std::size_t>(options.n_startup, 1)) {
        return random_suggest(k, rng);
    }

    std::vector<double> w(k);
    std::vector<double> good_obs, bad_obs;
    for (std::size_t d = 0; d < k; ++d) {
        good_obs.clear();
        bad_obs.clear();
        for (const auto* t : split.good) good_obs.push_back(t->weights[d]);
        for (const auto* t : split.bad) bad_obs.push_back(t->weights[d]);
        const ParzenEstimator below(good_obs);
        const ParzenEstimator above(bad_obs);

        double best_x = below.sample(rng);
        double best_score = below.density(best_x) / (above.density(best_x) + options.epsilon);
        for (std::size_t c = 1; c < options.n_candidates; ++c) {
            const double x = below.sample(rng);
            const double score = below.density(x) / (above.density(x) + options.epsilon);
            if (score > best_score) {
                best_score = score;
                best_x = x;
            }
        }
        w[d] = best_x;
    }
    return WeightVector(std::move(w));
}

}  // namespace tsmix
