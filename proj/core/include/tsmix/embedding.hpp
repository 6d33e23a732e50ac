#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tsmix/dataset.hpp"
#include "tsmix/matrix.hpp"

namespace tsmix {

enum class Provenance { builtin, external };

/// One embedding vector per window, row-major. Values are held as doubles in
/// memory and stored as float32 on disk.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dims = 0;
    std::vector<double> data;
    Provenance provenance = Provenance::builtin;

    std::span<const double> row(std::size_t r) const { return {data.data() + r * dims, dims}; }
    Matrix as_matrix() const;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

/// Statistics emitted per channel, in output order.
enum class ChannelStat { mean, stddev, min, max, last, slope, lag1_autocorr };
inline constexpr std::size_t kStatsPerChannel = 7;

/// Channel-major feature vector for a `W x channels` row-major window:
/// for each channel {mean, population std, min, max, last, least-squares
/// slope per step, lag-1 autocorrelation}. A constant channel yields std,
/// slope and autocorrelation of exactly 0.
std::vector<double> featurize_statistical(std::span<const double> window, std::size_t channels);

/// Features of every window's input block, one row per window.
Matrix featurize_windows(const WindowSet& windows);

EmbeddingMatrix to_embedding(const Matrix& features, Provenance provenance = Provenance::builtin);

/// Binary layout: "TSEM", u32 version (1), u64 rows, u32 dims, then
/// rows * dims float32 values, all little-endian, row-major.
void write_embedding_file(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_embedding_file(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_rows = std::nullopt);

/// Per-dimension z-normalization. Dimensions with zero spread pass through centered.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix& points, std::span<const std::size_t> rows);
    Matrix apply(const Matrix& points) const;
};

}  // namespace tsmix
