#include "tsmix/patch_net.hpp"

#include <cmath>

#include "tsmix/error.hpp"
#include "tsmix/random.hpp"

namespace tsmix {

void PatchNetShape::validate() const {
    if (patch_len == 0 || window_length == 0 || window_length % patch_len != 0) {
        throw Error(ErrorKind::invalid_argument, "patch length " + std::to_string(patch_len) +
                                                     " must divide the window length " + std::to_string(window_length));
    }
    if (input_channels == 0 || target_channels == 0 || embed_dim == 0 || hidden == 0) {
        throw Error(ErrorKind::invalid_argument, "patch-net dimensions must be positive");
    }
}

Matrix sinusoidal_positions(std::size_t patches, std::size_t embed_dim) {
    Matrix pe(patches, embed_dim);
    for (std::size_t p = 0; p < patches; ++p) {
        for (std::size_t i = 0; i < embed_dim; ++i) {
            const double pair = static_cast<double>(i - i % 2);
            const double angle = static_cast<double>(p) / std::pow(10000.0, pair / static_cast<double>(embed_dim));
            pe(p, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

struct PatchNet::Activations {
    std::vector<double> a;  // patches x embed_dim, post-tanh
    std::vector<double> m;  // embed_dim
    std::vector<double> h;  // hidden, post-tanh
    std::vector<double> y;  // target_channels
};

PatchNet::Layout PatchNet::layout_for(const PatchNetShape& s) noexcept {
    Layout l{};
    l.embed_w = 0;
    l.embed_b = l.embed_w + s.embed_dim * s.patch_size();
    l.hidden_w = l.embed_b + s.embed_dim;
    l.hidden_b = l.hidden_w + s.hidden * s.embed_dim;
    l.head_w = l.hidden_b + s.hidden;
    l.head_b = l.head_w + s.target_channels * s.hidden;
    l.total = l.head_b + s.target_channels;
    return l;
}

PatchNet::PatchNet(const PatchNetShape& shape)
    : shape_(shape),
      layout_((shape.validate(), layout_for(shape))),
      positions_(sinusoidal_positions(shape.patches(), shape.embed_dim)),
      params_(layout_.total, 0.0) {}

PatchNet PatchNet::initialized(const PatchNetShape& shape, std::uint64_t seed) {
    PatchNet net(shape);
    Rng rng(seed);
    const auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < fan_out * fan_in; ++i) {
            net.params_[offset + i] = (2.0 * uniform01(rng) - 1.0) * limit;
        }
    };
    fill(net.layout_.embed_w, shape.embed_dim, shape.patch_size());
    fill(net.layout_.hidden_w, shape.hidden, shape.embed_dim);
    fill(net.layout_.head_w, shape.target_channels, shape.hidden);
    return net;
}

std::span<double> PatchNet::head_bias() noexcept {
    return std::span<double>(params_).subspan(layout_.head_b, shape_.target_channels);
}

void PatchNet::forward(std::span<const double> input, Activations& act) const {
    const auto& s = shape_;
    const std::size_t P = s.patches(), D = s.embed_dim, S = s.patch_size(), H = s.hidden, T = s.target_channels;
    const double* E = params_.data() + layout_.embed_w;
    const double* bE = params_.data() + layout_.embed_b;
    const double* W1 = params_.data() + layout_.hidden_w;
    const double* b1 = params_.data() + layout_.hidden_b;
    const double* W2 = params_.data() + layout_.head_w;
    const double* b2 = params_.data() + layout_.head_b;

    act.a.assign(P * D, 0.0);
    act.m.assign(D, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        const double* x = input.data() + p * S;
        for (std::size_t i = 0; i < D; ++i) {
            double e = bE[i] + positions_(p, i);
            const double* row = E + i * S;
            for (std::size_t j = 0; j < S; ++j) e += row[j] * x[j];
            const double a = std::tanh(e);
            act.a[p * D + i] = a;
            act.m[i] += a;
        }
    }
    for (auto& v : act.m) v /= static_cast<double>(P);

    act.h.assign(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
        double z = b1[i];
        for (std::size_t j = 0; j < D; ++j) z += W1[i * D + j] * act.m[j];
        act.h[i] = std::tanh(z);
    }
    act.y.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double y = b2[t];
        for (std::size_t j = 0; j < H; ++j) y += W2[t * H + j] * act.h[j];
        act.y[t] = y;
    }
}

std::vector<double> PatchNet::predict(std::span<const double> input) const {
    if (input.size() != shape_.window_length * shape_.input_channels) {
        throw Error(ErrorKind::invalid_argument, "patch-net input has the wrong size");
    }
    Activations act;
    forward(input, act);
    return act.y;
}

double PatchNet::loss(const WindowSet& windows, std::span<const std::size_t> batch) const {
    if (batch.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
    Activations act;
    double sum = 0.0;
    for (const auto w : batch) {
        forward(windows.input_block(w), act);
        const auto target = windows.last_target(w);
        for (std::size_t t = 0; t < act.y.size(); ++t) {
            const double d = act.y[t] - target[t];
            sum += d * d;
        }
    }
    return sum / static_cast<double>(batch.size() * shape_.target_channels);
}

double PatchNet::loss_and_gradient(const WindowSet& windows, std::span<const std::size_t> batch,
                                   std::vector<double>& gradient) const {
    if (batch.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
    const auto& s = shape_;
    const std::size_t P = s.patches(), D = s.embed_dim, S = s.patch_size(), H = s.hidden, T = s.target_channels;
    const double* W1 = params_.data() + layout_.hidden_w;
    const double* W2 = params_.data() + layout_.head_w;

    gradient.assign(layout_.total, 0.0);
    double* gE = gradient.data() + layout_.embed_w;
    double* gbE = gradient.data() + layout_.embed_b;
    double* gW1 = gradient.data() + layout_.hidden_w;
    double* gb1 = gradient.data() + layout_.hidden_b;
    double* gW2 = gradient.data() + layout_.head_w;
    double* gb2 = gradient.data() + layout_.head_b;

    const double scale = 1.0 / static_cast<double>(batch.size() * T);
    Activations act;
    std::vector<double> gy(T), gz1(H), gm(D);
    double sum = 0.0;

    for (const auto w : batch) {
        const auto input = windows.input_block(w);
        forward(input, act);
        const auto target = windows.last_target(w);
        for (std::size_t t = 0; t < T; ++t) {
            const double d = act.y[t] - target[t];
            sum += d * d;
            gy[t] = 2.0 * d * scale;
        }
        // head
        for (std::size_t t = 0; t < T; ++t) {
            gb2[t] += gy[t];
            for (std::size_t j = 0; j < H; ++j) gW2[t * H + j] += gy[t] * act.h[j];
        }
        // hidden layer
        for (std::size_t j = 0; j < H; ++j) {
            double gh = 0.0;
            for (std::size_t t = 0; t < T; ++t) gh += W2[t * H + j] * gy[t];
            gz1[j] = gh * (1.0 - act.h[j] * act.h[j]);
            gb1[j] += gz1[j];
            for (std::size_t i = 0; i < D; ++i) gW1[j * D + i] += gz1[j] * act.m[i];
        }
        for (std::size_t i = 0; i < D; ++i) {
            double g = 0.0;
            for (std::size_t j = 0; j < H; ++j) g += W1[j * D + i] * gz1[j];
            gm[i] = g / static_cast<double>(P);
        }
        // patch projection, shared across patches
        for (std::size_t p = 0; p < P; ++p) {
            const double* x = input.data() + p * S;
            for (std::size_t i = 0; i < D; ++i) {
                const double a = act.a[p * D + i];
                const double ge = gm[i] * (1.0 - a * a);
                gbE[i] += ge;
                double* row = gE + i * S;
                for (std::size_t j = 0; j < S; ++j) row[j] += ge * x[j];
            }
        }
    }
    return sum * scale;
}

}  // namespace tsmix
