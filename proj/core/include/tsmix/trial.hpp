#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tsmix/metrics.hpp"
#include "tsmix/mixture.hpp"

namespace tsmix {

enum class TrialState { complete, failed };

const char* to_string(TrialState state) noexcept;

struct TrialRecord {
    std::size_t id = 0;
    WeightVector weights;
    std::size_t n_mix = 0;
    /// n_k per cluster for the mixture actually drawn.
    std::vector<std::size_t> counts;
    /// Validation average MSE; NaN for failed trials.
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<TargetMetric> targets;
    TrialState state = TrialState::failed;
    double wall_time_s = 0.0;
    std::string failure;

    bool completed() const noexcept { return state == TrialState::complete; }
};

}  // namespace tsmix
