#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsmix/dataset.hpp"
#include "tsmix/matrix.hpp"

namespace tsmix {

struct PatchNetShape {
    std::size_t window_length = 300;
    std::size_t patch_len = 30;
    std::size_t input_channels = 1;
    std::size_t target_channels = 1;
    std::size_t embed_dim = 32;
    std::size_t hidden = 32;

    std::size_t patches() const noexcept { return window_length / patch_len; }
    std::size_t patch_size() const noexcept { return patch_len * input_channels; }
    void validate() const;

    friend bool operator==(const PatchNetShape&, const PatchNetShape&) = default;
};

/// Sinusoidal position table, `patches x embed_dim`:
/// pe[p][2i] = sin(p / 10000^(2i/d)), pe[p][2i+1] = cos(p / 10000^(2i/d)).
Matrix sinusoidal_positions(std::size_t patches, std::size_t embed_dim);

/// Small patch forecaster:
///
///   e_p = E x_p + b_E + pe_p        shared projection of each flattened patch
///   a_p = tanh(e_p)
///   m   = mean_p a_p
///   h   = tanh(W1 m + b1)
///   y   = W2 h + b2                  one output per target channel
///
/// Parameters live in one flat vector so the optimizer and gradient checks
/// can treat them uniformly.
class PatchNet {
public:
    /// All parameters zero.
    explicit PatchNet(const PatchNetShape& shape);

    /// Glorot-uniform weights, zero biases.
    static PatchNet initialized(const PatchNetShape& shape, std::uint64_t seed);

    const PatchNetShape& shape() const noexcept { return shape_; }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::span<double> head_bias() noexcept;

    /// `input` is window_length x input_channels, row-major.
    std::vector<double> predict(std::span<const double> input) const;

    /// Mean squared error over the batch and all target channels, predicting
    /// each window's final-timestep targets.
    double loss(const WindowSet& windows, std::span<const std::size_t> batch) const;

    /// Same loss; writes d(loss)/d(parameters) into `gradient` (resized).
    double loss_and_gradient(const WindowSet& windows, std::span<const std::size_t> batch,
                             std::vector<double>& gradient) const;

private:
    struct Layout {
        std::size_t embed_w, embed_b, hidden_w, hidden_b, head_w, head_b, total;
    };
    static Layout layout_for(const PatchNetShape& shape) noexcept;

    struct Activations;
    void forward(std::span<const double> input, Activations& act) const;

    PatchNetShape shape_;
    Layout layout_;
    Matrix positions_;
    std::vector<double> params_;
};

}  // namespace tsmix
