#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsmix/matrix.hpp"

namespace tsmix {

enum class ColumnRole { input, target, id, ignore };
enum class Split : std::uint8_t { train, val, test };

const char* to_string(ColumnRole role) noexcept;
const char* to_string(Split split) noexcept;
ColumnRole parse_role(std::string_view text);
Split parse_split(std::string_view text);

/// Column-role map, in declaration order. Exactly one column must be `id`.
struct Schema {
    std::vector<std::pair<std::string, ColumnRole>> columns;

    const ColumnRole* find(std::string_view name) const;
};

/// Reads `name = role` lines. Blank lines and lines starting with '#' are skipped.
Schema read_schema_file(const std::filesystem::path& path);
Schema parse_schema(std::istream& in);

/// Multivariate time series table. `values` holds only input and target
/// columns; the profile id lives in `profile_ids`. Rows of one profile are
/// contiguous and keep their file order.
struct RawTable {
    std::string id_column = "profile_id";
    std::vector<std::string> column_names;
    std::vector<ColumnRole> roles;
    std::vector<std::int64_t> profile_ids;
    Matrix values;
    /// Empty until split_by_profile has run.
    std::vector<Split> splits;

    std::size_t rows() const noexcept { return values.rows; }
    std::size_t cols() const noexcept { return values.cols; }
    bool tagged() const noexcept { return !splits.empty(); }
    std::vector<std::size_t> columns_with_role(ColumnRole role) const;
    /// Distinct profile ids in order of first appearance.
    std::vector<std::int64_t> profiles() const;
};

RawTable load_dataset(const std::filesystem::path& path, const Schema& schema);
RawTable parse_dataset(std::istream& in, const Schema& schema, std::string_view source = "<stream>");

/// Appends one EWMA column per (input column, span), alpha = 2 / (span + 1),
/// seeded with the first observation of each profile. New columns are named
/// `<column>_ewma<span>` and get the input role.
RawTable derive_ewma(const RawTable& table, std::span<const int> spans);

struct SplitSpec {
    std::set<std::int64_t> test_profiles;
    std::set<std::int64_t> val_profiles;

    Split split_of(std::int64_t profile) const noexcept;
    /// Throws if test and val overlap.
    void validate() const;
};

struct SplitReport {
    std::size_t train_rows = 0;
    std::size_t val_rows = 0;
    std::size_t test_rows = 0;
    /// Listed profiles that do not occur in the data. Not an error.
    std::vector<std::int64_t> missing_profiles;
};

RawTable split_by_profile(const RawTable& table, const SplitSpec& split, SplitReport* report = nullptr);

struct ColumnScale {
    std::string name;
    ColumnRole role = ColumnRole::input;
    double min = 0.0;
    double max = 0.0;

    /// Constant on the training rows; such a column scales to 0.
    bool degenerate() const noexcept { return !(max > min); }

    friend bool operator==(const ColumnScale&, const ColumnScale&) = default;
};

struct Scaler {
    std::vector<ColumnScale> columns;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Min/max over rows whose profile is neither test nor val.
Scaler fit_scaler(const RawTable& table, const SplitSpec& split);
/// (x - min) / (max - min) per column, unclamped.
RawTable apply_scaler(const RawTable& table, const Scaler& scaler);

void write_scaler(const Scaler& scaler, const std::filesystem::path& path);
Scaler read_scaler(const std::filesystem::path& path);

/// Persists a tagged table as CSV: id column, `split`, then every value
/// column. Values use 17 significant digits so a reload is exact.
void write_table_csv(const RawTable& table, const std::filesystem::path& path);
/// Reads a table written by write_table_csv; column roles come from the scaler sidecar.
RawTable read_table_csv(const std::filesystem::path& path, const Scaler& scaler);

struct Window {
    std::size_t first_row = 0;
    std::int64_t profile = 0;
    Split split = Split::train;
    /// Offset of the first row within its profile.
    std::size_t start = 0;
};

/// Fixed-length windows over a tagged table. Input and target channels are
/// stored once, row-aligned with the source table; a window is a contiguous
/// block of `length` rows.
struct WindowSet {
    std::size_t length = 0;
    std::size_t stride = 1;
    std::vector<std::string> input_names;
    std::vector<std::string> target_names;
    Matrix inputs;
    Matrix targets;
    std::vector<Window> windows;

    std::size_t size() const noexcept { return windows.size(); }
    std::size_t input_channels() const noexcept { return inputs.cols; }
    std::size_t target_channels() const noexcept { return targets.cols; }

    /// length x input_channels, row-major.
    std::span<const double> input_block(std::size_t i) const;
    /// length x target_channels, row-major.
    std::span<const double> target_block(std::size_t i) const;
    /// Target vector at the final timestep of window i.
    std::span<const double> last_target(std::size_t i) const;

    std::vector<std::size_t> indices(Split split) const;
};

/// Closed-form window count for a profile of `rows` timesteps.
std::size_t window_count(std::size_t rows, std::size_t length, std::size_t stride) noexcept;

/// Cuts windows per profile at offsets 0, stride, 2*stride, ... Profiles
/// shorter than `length` contribute nothing and are reported in `short_profiles`.
WindowSet make_windows(const RawTable& table, std::size_t length, std::size_t stride,
                       std::vector<std::int64_t>* short_profiles = nullptr);

}  // namespace tsmix
