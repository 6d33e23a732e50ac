#include "tsmix/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "text_io.hpp"
#include "tsmix/error.hpp"

namespace tsmix {

using detail::format_double;
using detail::parse_double;
using detail::parse_int;
using detail::split_fields;
using detail::trim;

const char* to_string(ColumnRole role) noexcept {
    switch (role) {
        case ColumnRole::input: return "input";
        case ColumnRole::target: return "target";
        case ColumnRole::id: return "id";
        case ColumnRole::ignore: return "ignore";
    }
    return "?";
}

const char* to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

ColumnRole parse_role(std::string_view text) {
    text = trim(text);
    if (text == "input") return ColumnRole::input;
    if (text == "target") return ColumnRole::target;
    if (text == "id") return ColumnRole::id;
    if (text == "ignore") return ColumnRole::ignore;
    throw Error(ErrorKind::parse, "unknown column role '" + std::string(text) + "' (expected input|target|id|ignore)");
}

Split parse_split(std::string_view text) {
    text = trim(text);
    if (text == "train") return Split::train;
    if (text == "val") return Split::val;
    if (text == "test") return Split::test;
    throw Error(ErrorKind::parse, "unknown split tag '" + std::string(text) + "'");
}

const ColumnRole* Schema::find(std::string_view name) const {
    for (const auto& [column, role] : columns) {
        if (column == name) return &role;
    }
    return nullptr;
}

Schema parse_schema(std::istream& in) {
    Schema schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::parse, "schema line " + std::to_string(line_no) + ": expected 'column = role'");
        }
        const std::string name(trim(text.substr(0, eq)));
        if (name.empty()) throw Error(ErrorKind::parse, "schema line " + std::to_string(line_no) + ": empty column name");
        if (schema.find(name)) throw Error(ErrorKind::parse, "schema declares column '" + name + "' twice");
        schema.columns.emplace_back(name, parse_role(text.substr(eq + 1)));
    }
    std::size_t ids = 0, inputs = 0, targets = 0;
    for (const auto& [name, role] : schema.columns) {
        ids += role == ColumnRole::id;
        inputs += role == ColumnRole::input;
        targets += role == ColumnRole::target;
    }
    if (ids != 1) throw Error(ErrorKind::parse, "schema must declare exactly one id column");
    if (inputs == 0 || targets == 0) {
        throw Error(ErrorKind::parse, "schema must declare at least one input and one target column");
    }
    return schema;
}

Schema read_schema_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_schema(in);
}

std::vector<std::size_t> RawTable::columns_with_role(ColumnRole role) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < roles.size(); ++c) {
        if (roles[c] == role) out.push_back(c);
    }
    return out;
}

std::vector<std::int64_t> RawTable::profiles() const {
    std::vector<std::int64_t> out;
    for (std::size_t r = 0; r < profile_ids.size(); ++r) {
        if (r == 0 || profile_ids[r] != profile_ids[r - 1]) {
            if (std::find(out.begin(), out.end(), profile_ids[r]) == out.end()) out.push_back(profile_ids[r]);
        }
    }
    return out;
}

namespace {

// Stable grouping by profile in order of first appearance.
void group_by_profile(RawTable& table) {
    const auto order = table.profiles();
    std::unordered_map<std::int64_t, std::size_t> rank;
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;

    std::vector<std::size_t> perm(table.rows());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return rank[table.profile_ids[a]] < rank[table.profile_ids[b]];
    });
    if (std::is_sorted(perm.begin(), perm.end())) return;

    Matrix values = select_rows(table.values, perm);
    std::vector<std::int64_t> ids(perm.size());
    std::vector<Split> splits(table.splits.empty() ? 0 : perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        ids[i] = table.profile_ids[perm[i]];
        if (!splits.empty()) splits[i] = table.splits[perm[i]];
    }
    table.values = std::move(values);
    table.profile_ids = std::move(ids);
    table.splits = std::move(splits);
}

void check_finite(const RawTable& table) {
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            if (!std::isfinite(table.values(r, c))) {
                throw Error(ErrorKind::parse, "non-finite value at row " + std::to_string(r + 1) + ", column '" +
                                                  table.column_names[c] + "'");
            }
        }
    }
}

}  // namespace

RawTable parse_dataset(std::istream& in, const Schema& schema, std::string_view source) {
    const std::string where(source);
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw Error(ErrorKind::parse, where + ": empty file (no header row)");
    }
    const auto header = split_fields(line);

    // Map every schema column to its header position.
    std::vector<std::string> header_names(header.begin(), header.end());
    for (const auto& [name, role] : schema.columns) {
        if (std::find(header_names.begin(), header_names.end(), name) == header_names.end()) {
            throw Error(ErrorKind::parse, where + ": missing column '" + name + "' in header");
        }
    }
    for (const auto& name : header_names) {
        if (!schema.find(name)) {
            throw Error(ErrorKind::parse, where + ": header column '" + name + "' has no role in the schema");
        }
    }

    RawTable table;
    std::size_t id_pos = 0;
    std::vector<std::size_t> value_pos;
    for (std::size_t i = 0; i < header_names.size(); ++i) {
        const ColumnRole role = *schema.find(header_names[i]);
        if (role == ColumnRole::id) {
            id_pos = i;
            table.id_column = header_names[i];
        } else if (role != ColumnRole::ignore) {
            value_pos.push_back(i);
            table.column_names.push_back(header_names[i]);
            table.roles.push_back(role);
        }
    }

    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header_names.size()) {
            throw Error(ErrorKind::parse, where + ": row " + std::to_string(row) + " has " +
                                              std::to_string(fields.size()) + " fields, expected " +
                                              std::to_string(header_names.size()));
        }
        const auto id = parse_int(fields[id_pos]);
        if (!id) {
            throw Error(ErrorKind::parse, where + ": row " + std::to_string(row) + ", column '" +
                                              header_names[id_pos] + "': profile id '" +
                                              std::string(fields[id_pos]) + "' is not an integer");
        }
        table.profile_ids.push_back(*id);
        for (const std::size_t pos : value_pos) {
            const auto v = parse_double(fields[pos]);
            if (!v || !std::isfinite(*v)) {
                throw Error(ErrorKind::parse, where + ": row " + std::to_string(row) + ", column '" +
                                                  header_names[pos] + "': cannot parse '" +
                                                  std::string(fields[pos]) + "' as a finite number");
            }
            values.push_back(*v);
        }
    }
    if (row == 0) throw Error(ErrorKind::parse, where + ": empty file (header only)");

    table.values.rows = row;
    table.values.cols = value_pos.size();
    table.values.data = std::move(values);
    group_by_profile(table);
    return table;
}

RawTable load_dataset(const std::filesystem::path& path, const Schema& schema) {
    auto in = detail::open_input(path);
    return parse_dataset(in, schema, path.string());
}

RawTable derive_ewma(const RawTable& table, std::span<const int> spans) {
    if (table.rows() == 0) throw Error(ErrorKind::invalid_argument, "derive_ewma: empty table");
    for (const int span : spans) {
        if (span <= 0) throw Error(ErrorKind::invalid_argument, "EWMA span must be positive, got " + std::to_string(span));
    }
    const auto inputs = table.columns_with_role(ColumnRole::input);
    const std::size_t added = inputs.size() * spans.size();

    RawTable out;
    out.id_column = table.id_column;
    out.profile_ids = table.profile_ids;
    out.splits = table.splits;
    out.column_names = table.column_names;
    out.roles = table.roles;
    for (const std::size_t c : inputs) {
        for (const int span : spans) {
            out.column_names.push_back(table.column_names[c] + "_ewma" + std::to_string(span));
            out.roles.push_back(ColumnRole::input);
        }
    }
    out.values = Matrix(table.rows(), table.cols() + added);

    // Running state per profile, so interleaved profiles never mix.
    std::unordered_map<std::int64_t, std::vector<double>> state;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto src = table.values.row(r);
        auto dst = out.values.row(r);
        std::copy(src.begin(), src.end(), dst.begin());

        auto [it, fresh] = state.try_emplace(table.profile_ids[r], added, 0.0);
        auto& ewma = it->second;
        std::size_t slot = 0;
        for (const std::size_t c : inputs) {
            const double x = src[c];
            for (const int span : spans) {
                const double alpha = 2.0 / (static_cast<double>(span) + 1.0);
                ewma[slot] = fresh ? x : alpha * x + (1.0 - alpha) * ewma[slot];
                dst[table.cols() + slot] = ewma[slot];
                ++slot;
            }
        }
    }
    return out;
}

Split SplitSpec::split_of(std::int64_t profile) const noexcept {
    if (test_profiles.contains(profile)) return Split::test;
    if (val_profiles.contains(profile)) return Split::val;
    return Split::train;
}

void SplitSpec::validate() const {
    for (const auto p : test_profiles) {
        if (val_profiles.contains(p)) {
            throw Error(ErrorKind::invalid_argument,
                        "profile " + std::to_string(p) + " is listed in both the test and validation sets");
        }
    }
}

RawTable split_by_profile(const RawTable& table, const SplitSpec& split, SplitReport* report) {
    split.validate();
    const auto present = table.profiles();
    const std::set<std::int64_t> present_set(present.begin(), present.end());

    std::size_t train_profiles = 0;
    for (const auto p : present) train_profiles += split.split_of(p) == Split::train;
    std::size_t test_present = 0, val_present = 0;
    for (const auto p : present) {
        test_present += split.split_of(p) == Split::test;
        val_present += split.split_of(p) == Split::val;
    }
    if (test_present == present.size() || val_present == present.size() || train_profiles == 0) {
        throw Error(ErrorKind::invalid_argument, "split leaves no training profiles");
    }

    RawTable out = table;
    out.splits.resize(table.rows());
    SplitReport counts;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const Split s = split.split_of(table.profile_ids[r]);
        out.splits[r] = s;
        switch (s) {
            case Split::train: ++counts.train_rows; break;
            case Split::val: ++counts.val_rows; break;
            case Split::test: ++counts.test_rows; break;
        }
    }
    for (const auto& listed : {split.test_profiles, split.val_profiles}) {
        for (const auto p : listed) {
            if (!present_set.contains(p)) counts.missing_profiles.push_back(p);
        }
    }
    if (report) *report = std::move(counts);
    return out;
}

Scaler fit_scaler(const RawTable& table, const SplitSpec& split) {
    Scaler scaler;
    scaler.columns.resize(table.cols());
    std::vector<bool> seen(table.cols(), false);
    for (std::size_t c = 0; c < table.cols(); ++c) {
        scaler.columns[c].name = table.column_names[c];
        scaler.columns[c].role = table.roles[c];
    }
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (split.split_of(table.profile_ids[r]) != Split::train) continue;
        const auto row = table.values.row(r);
        for (std::size_t c = 0; c < table.cols(); ++c) {
            auto& col = scaler.columns[c];
            if (!seen[c]) {
                col.min = col.max = row[c];
                seen[c] = true;
            } else {
                col.min = std::min(col.min, row[c]);
                col.max = std::max(col.max, row[c]);
            }
        }
    }
    if (table.cols() > 0 && !seen[0]) {
        throw Error(ErrorKind::invalid_argument, "fit_scaler: no training rows");
    }
    return scaler;
}

RawTable apply_scaler(const RawTable& table, const Scaler& scaler) {
    if (scaler.columns.size() != table.cols()) {
        throw Error(ErrorKind::invalid_argument, "scaler has " + std::to_string(scaler.columns.size()) +
                                                     " columns, table has " + std::to_string(table.cols()));
    }
    for (std::size_t c = 0; c < table.cols(); ++c) {
        if (scaler.columns[c].name != table.column_names[c]) {
            throw Error(ErrorKind::invalid_argument, "scaler column '" + scaler.columns[c].name +
                                                         "' does not match table column '" + table.column_names[c] + "'");
        }
    }
    RawTable out = table;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.values.row(r);
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const auto& col = scaler.columns[c];
            row[c] = col.degenerate() ? 0.0 : (row[c] - col.min) / (col.max - col.min);
        }
    }
    return out;
}

void write_scaler(const Scaler& scaler, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "# tsmix scaler v1\n# column\trole\tmin\tmax\n";
    for (const auto& col : scaler.columns) {
        out << col.name << '\t' << to_string(col.role) << '\t' << format_double(col.min) << '\t'
            << format_double(col.max) << '\n';
    }
    detail::finish_output(out, path);
}

Scaler read_scaler(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    Scaler scaler;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto fields = split_fields(text, '\t');
        const auto lo = fields.size() == 4 ? parse_double(fields[2]) : std::nullopt;
        const auto hi = fields.size() == 4 ? parse_double(fields[3]) : std::nullopt;
        if (!lo || !hi) {
            throw Error(ErrorKind::parse, path.string() + ": malformed scaler line " + std::to_string(line_no));
        }
        scaler.columns.push_back({std::string(fields[0]), parse_role(fields[1]), *lo, *hi});
    }
    return scaler;
}

void write_table_csv(const RawTable& table, const std::filesystem::path& path) {
    if (!table.tagged()) throw Error(ErrorKind::invalid_argument, "write_table_csv: table has no split tags");
    auto out = detail::open_output(path);
    out << table.id_column << ",split";
    for (const auto& name : table.column_names) out << ',' << name;
    out << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.profile_ids[r] << ',' << to_string(table.splits[r]);
        for (const double v : table.values.row(r)) out << ',' << format_double(v);
        out << '\n';
    }
    detail::finish_output(out, path);
}

RawTable read_table_csv(const std::filesystem::path& path, const Scaler& scaler) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty table file");
    const auto header = split_fields(line);
    if (header.size() != scaler.columns.size() + 2 || header[1] != "split") {
        throw Error(ErrorKind::parse, path.string() + ": header does not match the scaler sidecar");
    }
    RawTable table;
    table.id_column = std::string(header[0]);
    for (std::size_t c = 0; c < scaler.columns.size(); ++c) {
        if (header[c + 2] != scaler.columns[c].name) {
            throw Error(ErrorKind::parse, path.string() + ": column '" + std::string(header[c + 2]) +
                                              "' does not match scaler column '" + scaler.columns[c].name + "'");
        }
        table.column_names.push_back(scaler.columns[c].name);
        table.roles.push_back(scaler.columns[c].role);
    }
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) + " has the wrong field count");
        }
        const auto id = parse_int(fields[0]);
        if (!id) throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) + ": bad profile id");
        table.profile_ids.push_back(*id);
        table.splits.push_back(parse_split(fields[1]));
        for (std::size_t c = 2; c < fields.size(); ++c) {
            const auto v = parse_double(fields[c]);
            if (!v) {
                throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) + ", column '" +
                                                  std::string(header[c]) + "': bad number");
            }
            values.push_back(*v);
        }
    }
    table.values.rows = row;
    table.values.cols = scaler.columns.size();
    table.values.data = std::move(values);
    check_finite(table);
    return table;
}

std::span<const double> WindowSet::input_block(std::size_t i) const {
    return {inputs.data.data() + windows[i].first_row * inputs.cols, length * inputs.cols};
}

std::span<const double> WindowSet::target_block(std::size_t i) const {
    return {targets.data.data() + windows[i].first_row * targets.cols, length * targets.cols};
}

std::span<const double> WindowSet::last_target(std::size_t i) const {
    return targets.row(windows[i].first_row + length - 1);
}

std::vector<std::size_t> WindowSet::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].split == split) out.push_back(i);
    }
    return out;
}

std::size_t window_count(std::size_t rows, std::size_t length, std::size_t stride) noexcept {
    if (length == 0 || stride == 0 || rows < length) return 0;
    return (rows - length) / stride + 1;
}

WindowSet make_windows(const RawTable& table, std::size_t length, std::size_t stride,
                       std::vector<std::int64_t>* short_profiles) {
    if (length < 1) throw Error(ErrorKind::invalid_argument, "window length must be at least 1");
    if (stride < 1) throw Error(ErrorKind::invalid_argument, "window stride must be at least 1");
    if (!table.tagged()) throw Error(ErrorKind::invalid_argument, "make_windows needs a split-tagged table");

    const auto in_cols = table.columns_with_role(ColumnRole::input);
    const auto tgt_cols = table.columns_with_role(ColumnRole::target);
    if (in_cols.empty() || tgt_cols.empty()) {
        throw Error(ErrorKind::invalid_argument, "table needs at least one input and one target column");
    }

    WindowSet set;
    set.length = length;
    set.stride = stride;
    for (const auto c : in_cols) set.input_names.push_back(table.column_names[c]);
    for (const auto c : tgt_cols) set.target_names.push_back(table.column_names[c]);
    set.inputs = Matrix(table.rows(), in_cols.size());
    set.targets = Matrix(table.rows(), tgt_cols.size());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t j = 0; j < in_cols.size(); ++j) set.inputs(r, j) = table.values(r, in_cols[j]);
        for (std::size_t j = 0; j < tgt_cols.size(); ++j) set.targets(r, j) = table.values(r, tgt_cols[j]);
    }

    std::size_t begin = 0;
    while (begin < table.rows()) {
        std::size_t end = begin;
        while (end < table.rows() && table.profile_ids[end] == table.profile_ids[begin]) ++end;
        const std::size_t n = window_count(end - begin, length, stride);
        if (n == 0 && short_profiles) short_profiles->push_back(table.profile_ids[begin]);
        for (std::size_t w = 0; w < n; ++w) {
            const std::size_t offset = w * stride;
            set.windows.push_back({begin + offset, table.profile_ids[begin], table.splits[begin], offset});
        }
        begin = end;
    }
    return set;
}

}  // namespace tsmix
