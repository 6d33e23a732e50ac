#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "tsmix/dataset.hpp"

namespace tsmix {

/// Planted-regime corpus for the "less is more" benchmark. Each regime has
/// its own input dynamics. In signal regimes the target is a fixed linear
/// function of the inputs; in noise regimes it is independent noise around a
/// regime-specific level. Validation and test profiles cover every regime
/// and always follow the linear law.
struct SyntheticSpec {
    std::size_t regimes = 12;
    std::vector<std::size_t> signal_regimes = {0, 6, 9};
    std::size_t train_profiles_per_regime = 2;
    std::size_t train_profile_length = 529;
    std::size_t eval_profile_length = 129;
    std::size_t window_length = 30;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    RawTable table;
    SplitSpec split;
    std::map<std::int64_t, std::size_t> regime_of_profile;
    std::set<std::size_t> signal_regimes;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace tsmix
