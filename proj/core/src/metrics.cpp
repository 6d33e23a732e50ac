#include "tsmix/metrics.hpp"

#include "tsmix/trial.hpp"

namespace tsmix {

double average_mse(const std::vector<TargetMetric>& targets) {
    if (targets.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : targets) sum += t.mse;
    return sum / static_cast<double>(targets.size());
}

const char* to_string(TrialState state) noexcept {
    return state == TrialState::complete ? "complete" : "failed";
}

}  // namespace tsmix
