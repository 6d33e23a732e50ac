#include "tsmix/embedding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "text_io.hpp"
#include "tsmix/error.hpp"

namespace tsmix {

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'S', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4;

template <typename T>
void put_le(std::string& buf, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
    }
}

template <typename T>
T get_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

// Pearson correlation of (x_0..x_{n-2}) with (x_1..x_{n-1}); 0 when either
// segment is constant.
double lag1_autocorrelation(std::span<const double> x, std::size_t stride, std::size_t n) {
    const std::size_t m = n - 1;
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        mean_a += x[t * stride];
        mean_b += x[(t + 1) * stride];
    }
    mean_a /= static_cast<double>(m);
    mean_b /= static_cast<double>(m);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        const double a = x[t * stride] - mean_a;
        const double b = x[(t + 1) * stride] - mean_b;
        cov += a * b;
        var_a += a * a;
        var_b += b * b;
    }
    if (var_a <= 0.0 || var_b <= 0.0) return 0.0;
    return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

}  // namespace

Matrix EmbeddingMatrix::as_matrix() const {
    Matrix m(rows, dims);
    m.data = data;
    return m;
}

std::vector<double> featurize_statistical(std::span<const double> window, std::size_t channels) {
    if (channels == 0 || window.size() % channels != 0) {
        throw Error(ErrorKind::invalid_argument, "window size is not a multiple of the channel count");
    }
    const std::size_t n = window.size() / channels;
    if (n < 2) throw Error(ErrorKind::invalid_argument, "featurize_statistical needs at least 2 timesteps");

    std::vector<double> out;
    out.reserve(channels * kStatsPerChannel);
    const double t_mean = static_cast<double>(n - 1) / 2.0;
    double t_ss = 0.0;
    for (std::size_t t = 0; t < n; ++t) t_ss += (static_cast<double>(t) - t_mean) * (static_cast<double>(t) - t_mean);

    for (std::size_t c = 0; c < channels; ++c) {
        const auto at = [&](std::size_t t) { return window[t * channels + c]; };
        double lo = at(0), hi = at(0), sum = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            lo = std::min(lo, at(t));
            hi = std::max(hi, at(t));
            sum += at(t);
        }
        const double mean = sum / static_cast<double>(n);
        double var = 0.0, slope_num = 0.0;
        double std_dev = 0.0, slope = 0.0, autocorr = 0.0;
        if (hi > lo) {
            for (std::size_t t = 0; t < n; ++t) {
                const double d = at(t) - mean;
                var += d * d;
                slope_num += (static_cast<double>(t) - t_mean) * d;
            }
            std_dev = std::sqrt(var / static_cast<double>(n));
            slope = slope_num / t_ss;
            autocorr = lag1_autocorrelation(window.subspan(c), channels, n);
        }
        out.insert(out.end(), {hi > lo ? mean : lo, std_dev, lo, hi, at(n - 1), slope, autocorr});
    }
    return out;
}

Matrix featurize_windows(const WindowSet& windows) {
    const std::size_t dims = windows.input_channels() * kStatsPerChannel;
    Matrix out(windows.size(), dims);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto f = featurize_statistical(windows.input_block(i), windows.input_channels());
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

EmbeddingMatrix to_embedding(const Matrix& features, Provenance provenance) {
    return {features.rows, features.cols, features.data, provenance};
}

void write_embedding_file(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    if (matrix.dims == 0) throw Error(ErrorKind::invalid_argument, "embedding dimension must be at least 1");
    if (matrix.data.size() != matrix.rows * matrix.dims) {
        throw Error(ErrorKind::invalid_argument, "embedding payload does not match rows x dims");
    }
    std::string buf;
    buf.reserve(kHeaderBytes + matrix.data.size() * 4);
    buf.append(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(buf, kVersion);
    put_le<std::uint64_t>(buf, matrix.rows);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(matrix.dims));
    for (const double v : matrix.data) {
        if (!std::isfinite(v)) throw Error(ErrorKind::invalid_argument, "embedding contains a non-finite value");
        put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    auto out = detail::open_output(path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    detail::finish_output(out, path);
}

EmbeddingMatrix read_embedding_file(const std::filesystem::path& path, std::optional<std::size_t> expected_rows) {
    auto in = detail::open_input(path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::string where = path.string();

    if (bytes.size() < kHeaderBytes) throw Error(ErrorKind::parse, where + ": truncated embedding header");
    if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) throw Error(ErrorKind::parse, where + ": bad magic (expected TSEM)");
    const auto version = get_le<std::uint32_t>(p + 4);
    if (version != kVersion) {
        throw Error(ErrorKind::parse, where + ": unsupported embedding version " + std::to_string(version));
    }
    const auto rows = get_le<std::uint64_t>(p + 8);
    const auto dims = get_le<std::uint32_t>(p + 16);
    if (dims == 0) throw Error(ErrorKind::parse, where + ": embedding dimension is 0");
    const std::uint64_t payload = bytes.size() - kHeaderBytes;
    if (rows > payload / 4 / dims || payload != rows * dims * 4) {
        throw Error(ErrorKind::parse, where + ": truncated or oversized payload (" + std::to_string(payload) +
                                          " bytes for " + std::to_string(rows) + " x " + std::to_string(dims) + ")");
    }
    if (expected_rows && rows != *expected_rows) {
        throw Error(ErrorKind::invalid_argument, where + ": row-count mismatch, file has " + std::to_string(rows) +
                                                     " rows, expected " + std::to_string(*expected_rows));
    }

    EmbeddingMatrix m;
    m.rows = rows;
    m.dims = dims;
    m.provenance = Provenance::external;
    m.data.resize(rows * dims);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        const float f = std::bit_cast<float>(get_le<std::uint32_t>(p + kHeaderBytes + 4 * i));
        if (!std::isfinite(f)) {
            throw Error(ErrorKind::parse, where + ": non-finite value at row " + std::to_string(i / dims) +
                                              ", dim " + std::to_string(i % dims));
        }
        m.data[i] = f;
    }
    return m;
}

Standardizer Standardizer::fit(const Matrix& points, std::span<const std::size_t> rows) {
    if (rows.empty()) throw Error(ErrorKind::invalid_argument, "cannot standardize over zero rows");
    Standardizer s;
    s.mean.assign(points.cols, 0.0);
    s.scale.assign(points.cols, 1.0);
    for (const auto r : rows) {
        for (std::size_t c = 0; c < points.cols; ++c) s.mean[c] += points(r, c);
    }
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    std::vector<double> var(points.cols, 0.0);
    for (const auto r : rows) {
        for (std::size_t c = 0; c < points.cols; ++c) {
            const double d = points(r, c) - s.mean[c];
            var[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < points.cols; ++c) {
        const double sd = std::sqrt(var[c] / static_cast<double>(rows.size()));
        s.scale[c] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& points) const {
    Matrix out = points;
    for (std::size_t r = 0; r < out.rows; ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < out.cols; ++c) row[c] = (row[c] - mean[c]) / scale[c];
    }
    return out;
}

}  // namespace tsmix
