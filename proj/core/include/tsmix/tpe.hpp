#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tsmix/mixture.hpp"
#include "tsmix/random.hpp"
#include "tsmix/trial.hpp"

namespace tsmix {

/// Maps the number of completed trials to the size of the "good" set.
using GammaFn = std::function<std::size_t(std::size_t)>;

/// min(ceil(0.25 n), 25)
std::size_t default_gamma(std::size_t n) noexcept;

struct GammaSplit {
    std::vector<const TrialRecord*> good;
    std::vector<const TrialRecord*> bad;
};

/// Sorts completed trials ascending by objective (ties by id) and puts the
/// first gamma(n) into the good set. Failed trials are ignored.
GammaSplit gamma_split(std::span<const TrialRecord> history, const GammaFn& gamma = default_gamma);

/// Univariate Parzen estimator on [0, 1]: an equal-weight mixture of the
/// uniform prior and one truncated Gaussian per observation.
class ParzenEstimator {
public:
    explicit ParzenEstimator(std::span<const double> observations);

    double density(double x) const;
    double sample(Rng& rng) const;

    const std::vector<double>& centers() const noexcept { return mus_; }
    const std::vector<double>& bandwidths() const noexcept { return sigmas_; }

private:
    std::vector<double> mus_;
    std::vector<double> sigmas_;
    std::vector<double> norms_;
};

double parzen_density(std::span<const double> observations, double x);

struct TpeOptions {
    std::size_t n_startup = 10;
    std::size_t n_candidates = 24;
    GammaFn gamma = default_gamma;
    double epsilon = 1e-12;
};

/// Random until n_startup trials have completed, then per dimension the
/// candidate drawn from l(x) that maximizes l(x) / (g(x) + epsilon).
WeightVector tpe_suggest(std::span<const TrialRecord> history, std::size_t k, const TpeOptions& options, Rng& rng);

/// I.i.d. uniform on [0, 1]^k.
WeightVector random_suggest(std::size_t k, Rng& rng);

}  // namespace tsmix
