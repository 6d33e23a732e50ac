#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsmix {

struct TargetMetric {
    std::string name;
    double mse = 0.0;
    double mae = 0.0;

    friend bool operator==(const TargetMetric&, const TargetMetric&) = default;
};

struct TrialMetrics {
    std::vector<TargetMetric> targets;
    /// Unweighted mean of the per-target MSEs.
    double avg_mse = 0.0;
    std::uint64_t tokens = 0;
    std::uint64_t epochs = 0;

    friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

double average_mse(const std::vector<TargetMetric>& targets);

}  // namespace tsmix
