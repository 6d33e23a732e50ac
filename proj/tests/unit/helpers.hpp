#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "tsmix/dataset.hpp"
#include "tsmix/trainer.hpp"

namespace tsmix::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("tsmix-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// One-timestep windows over explicit feature and target rows, for trainer
/// tests that bypass featurization.
inline TrainingData make_linear_data(const Matrix& features, const Matrix& targets,
                                     const std::vector<Split>& splits) {
    TrainingData data;
    auto& w = data.windows;
    w.length = 1;
    w.stride = 1;
    w.inputs = Matrix(features.rows, 1);
    w.targets = targets;
    for (std::size_t t = 0; t < targets.cols; ++t) w.target_names.push_back("y" + std::to_string(t));
    w.input_names = {"x"};
    for (std::size_t i = 0; i < features.rows; ++i) {
        w.windows.push_back({i, static_cast<std::int64_t>(i), splits.empty() ? Split::train : splits[i], 0});
    }
    data.features = features;
    return data;
}

}  // namespace tsmix::test
