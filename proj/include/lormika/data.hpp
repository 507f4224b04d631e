#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lormika {

enum class ColumnKind { numeric, categorical };

/// Half-open numeric range (lo, hi]; an empty bound is unbounded on that side.
struct Interval {
    std::optional<double> lo;
    std::optional<double> hi;

    [[nodiscard]] bool contains(double v) const noexcept {
        return (!lo || v > *lo) && (!hi || v <= *hi);
    }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    std::vector<std::string> categories;
    /// One interval per category when the column was produced by discretizing
    /// a numeric column; empty otherwise.
    std::vector<Interval> bins;

    static ColumnSpec numeric(std::string name);
    static ColumnSpec categorical(std::string name, std::vector<std::string> categories);

    [[nodiscard]] std::optional<std::size_t> category_index(std::string_view value) const;
    [[nodiscard]] bool is_numeric() const noexcept { return kind == ColumnKind::numeric; }

    friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

class DatasetSchema {
public:
    DatasetSchema() = default;
    /// Validates the column set; class labels are the target column's categories.
    DatasetSchema(std::vector<ColumnSpec> columns, std::string target);

    [[nodiscard]] const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }
    [[nodiscard]] const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
    [[nodiscard]] std::size_t num_columns() const noexcept { return columns_.size(); }
    [[nodiscard]] const std::string& target() const noexcept { return target_; }
    [[nodiscard]] std::size_t target_index() const noexcept { return target_index_; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const {
        return columns_.at(target_index_).categories;
    }
    [[nodiscard]] std::size_t num_classes() const { return class_labels().size(); }
    [[nodiscard]] std::optional<std::size_t> column_index(std::string_view name) const;
    /// Column indices excluding the target, in schema order.
    [[nodiscard]] std::vector<std::size_t> feature_indices() const;

    friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;

private:
    std::vector<ColumnSpec> columns_;
    std::string target_;
    std::size_t target_index_ = 0;
};

struct Missing {
    friend bool operator==(Missing, Missing) = default;
};

struct Category {
    std::size_t index = 0;
    friend auto operator<=>(Category, Category) = default;
};

using Cell = std::variant<Missing, double, Category>;

[[nodiscard]] inline bool is_missing(const Cell& c) noexcept { return std::holds_alternative<Missing>(c); }

struct Instance {
    std::vector<Cell> values;
    friend bool operator==(const Instance&, const Instance&) = default;
};

/// Rows checked against the schema on construction; immutable afterwards.
class InstanceTable {
public:
    InstanceTable() = default;
    InstanceTable(DatasetSchema schema, std::vector<Instance> rows);

    [[nodiscard]] const DatasetSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<Instance>& rows() const noexcept { return rows_; }
    [[nodiscard]] const Instance& row(std::size_t i) const { return rows_.at(i); }
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }

    friend bool operator==(const InstanceTable&, const InstanceTable&) = default;

private:
    DatasetSchema schema_;
    std::vector<Instance> rows_;
};

/// Throws schema_mismatch / unknown_category if the instance does not fit the schema.
void validate_instance(const DatasetSchema& schema, const Instance& instance);

/// Class index of the target cell, or nullopt when it is missing.
[[nodiscard]] std::optional<std::size_t> class_of(const DatasetSchema& schema, const Instance& instance);

// CSV ----------------------------------------------------------------------

/// RFC-4180 style records: comma separated, double-quote escaping, LF or CRLF.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);
std::string csv_escape(std::string_view field);

/// Parses one field under a column spec. Empty or (numeric) unparseable text is Missing.
Cell parse_cell(const ColumnSpec& column, std::string_view text);
std::string format_cell(const ColumnSpec& column, const Cell& cell);
std::optional<double> parse_number(std::string_view text);

InstanceTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema);
InstanceTable read_csv(std::istream& in, const DatasetSchema& schema);
DatasetSchema infer_schema(const std::filesystem::path& path, const std::string& target);
DatasetSchema infer_schema(std::istream& in, const std::string& target);
void write_csv(std::ostream& out, const InstanceTable& table);

}  // namespace lormika
