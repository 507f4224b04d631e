#include "lormika/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "lormika/error.hpp"

namespace lormika {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    return in;
}

void strip_bom(std::vector<std::vector<std::string>>& records) {
    if (records.empty() || records.front().empty()) return;
    auto& first = records.front().front();
    if (first.rfind("\xEF\xBB\xBF", 0) == 0) first.erase(0, 3);
}

}  // namespace

ColumnSpec ColumnSpec::numeric(std::string name) {
    return ColumnSpec{std::move(name), ColumnKind::numeric, {}, {}};
}

ColumnSpec ColumnSpec::categorical(std::string name, std::vector<std::string> categories) {
    return ColumnSpec{std::move(name), ColumnKind::categorical, std::move(categories), {}};
}

std::optional<std::size_t> ColumnSpec::category_index(std::string_view value) const {
    const auto it = std::find(categories.begin(), categories.end(), value);
    if (it == categories.end()) return std::nullopt;
    return static_cast<std::size_t>(it - categories.begin());
}

DatasetSchema::DatasetSchema(std::vector<ColumnSpec> columns, std::string target)
    : columns_(std::move(columns)), target_(std::move(target)) {
    std::unordered_set<std::string> names;
    for (const auto& c : columns_) {
        if (!names.insert(c.name).second)
            throw Error(ErrorCode::schema_mismatch, "duplicate column name '" + c.name + "'");
        if (c.kind == ColumnKind::categorical) {
            if (c.categories.empty())
                throw Error(ErrorCode::schema_mismatch, "categorical column '" + c.name + "' has no categories");
            std::unordered_set<std::string> seen(c.categories.begin(), c.categories.end());
            if (seen.size() != c.categories.size())
                throw Error(ErrorCode::schema_mismatch, "duplicate category in column '" + c.name + "'");
            if (!c.bins.empty() && c.bins.size() != c.categories.size())
                throw Error(ErrorCode::schema_mismatch, "bin count mismatch in column '" + c.name + "'");
        }
    }
    const auto idx = column_index(target_);
    if (!idx) throw Error(ErrorCode::target_not_found, "target '" + target_ + "' is not a column");
    target_index_ = *idx;
    if (columns_[target_index_].kind != ColumnKind::categorical)
        throw Error(ErrorCode::schema_mismatch, "target '" + target_ + "' must be categorical");
}

std::optional<std::size_t> DatasetSchema::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::size_t> DatasetSchema::feature_indices() const {
    std::vector<std::size_t> out;
    out.reserve(columns_.size());
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (i != target_index_) out.push_back(i);
    return out;
}

void validate_instance(const DatasetSchema& schema, const Instance& instance) {
    if (instance.values.size() != schema.num_columns())
        throw Error(ErrorCode::schema_mismatch,
                    fmt::format("row has {} cells, schema has {} columns", instance.values.size(),
                                schema.num_columns()));
    for (std::size_t i = 0; i < instance.values.size(); ++i) {
        const auto& col = schema.column(i);
        const auto& cell = instance.values[i];
        if (is_missing(cell)) continue;
        if (col.is_numeric()) {
            const auto* v = std::get_if<double>(&cell);
            if (v == nullptr)
                throw Error(ErrorCode::schema_mismatch, "non-numeric cell in numeric column '" + col.name + "'");
            if (!std::isfinite(*v))
                throw Error(ErrorCode::schema_mismatch, "non-finite value in column '" + col.name + "'");
        } else {
            const auto* c = std::get_if<Category>(&cell);
            if (c == nullptr)
                throw Error(ErrorCode::schema_mismatch, "non-categorical cell in column '" + col.name + "'");
            if (c->index >= col.categories.size())
                throw Error(ErrorCode::unknown_category,
                            fmt::format("category index {} out of range for '{}'", c->index, col.name));
        }
    }
}

std::optional<std::size_t> class_of(const DatasetSchema& schema, const Instance& instance) {
    const auto& cell = instance.values.at(schema.target_index());
    if (const auto* c = std::get_if<Category>(&cell)) return c->index;
    return std::nullopt;
}

InstanceTable::InstanceTable(DatasetSchema schema, std::vector<Instance> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
    for (const auto& r : rows_) validate_instance(schema_, r);
}

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool any_in_record = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        if (any_in_record || field_started || !record.empty()) {
            end_field();
            records.push_back(std::move(record));
        }
        record.clear();
        any_in_record = false;
    };

    char ch = 0;
    while (in.get(ch)) {
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
            case '"':
                in_quotes = true;
                field_started = true;
                any_in_record = true;
                break;
            case ',':
                end_field();
                any_in_record = true;
                break;
            case '\r':
                if (in.peek() == '\n') in.get(ch);
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(ch);
                field_started = true;
                any_in_record = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::schema_mismatch, "unterminated quoted field");
    end_record();
    return records;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    if (text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

Cell parse_cell(const ColumnSpec& column, std::string_view text) {
    const auto t = trim(text);
    if (t.empty()) return Missing{};
    if (column.is_numeric()) {
        if (auto v = parse_number(t)) return *v;
        return Missing{};
    }
    if (auto idx = column.category_index(t)) return Category{*idx};
    throw Error(ErrorCode::unknown_category, "value '" + std::string(t) + "' not declared for '" + column.name + "'");
}

std::string format_cell(const ColumnSpec& column, const Cell& cell) {
    if (is_missing(cell)) return {};
    if (const auto* v = std::get_if<double>(&cell)) return fmt::format("{}", *v);
    return column.categories.at(std::get<Category>(cell).index);
}

InstanceTable read_csv(std::istream& in, const DatasetSchema& schema) {
    auto records = read_csv_records(in);
    strip_bom(records);
    if (records.empty()) throw Error(ErrorCode::schema_mismatch, "missing header row");
    const auto& header = records.front();
    if (header.size() != schema.num_columns())
        throw Error(ErrorCode::schema_mismatch,
                    fmt::format("header has {} columns, schema has {}", header.size(), schema.num_columns()));
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) != schema.column(i).name)
            throw Error(ErrorCode::schema_mismatch,
                        "header column '" + header[i] + "' does not match '" + schema.column(i).name + "'");

    std::vector<Instance> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != schema.num_columns())
            throw Error(ErrorCode::schema_mismatch, fmt::format("record {} has {} fields", r, rec.size()));
        Instance inst;
        inst.values.reserve(rec.size());
        for (std::size_t c = 0; c < rec.size(); ++c) inst.values.push_back(parse_cell(schema.column(c), rec[c]));
        rows.push_back(std::move(inst));
    }
    return InstanceTable(schema, std::move(rows));
}

InstanceTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
    auto in = open_or_throw(path);
    return read_csv(in, schema);
}

DatasetSchema infer_schema(std::istream& in, const std::string& target) {
    auto records = read_csv_records(in);
    strip_bom(records);
    if (records.size() < 2) throw Error(ErrorCode::empty_file, "need a header row and at least one data row");
    const auto& header = records.front();
    std::vector<ColumnSpec> columns;
    columns.reserve(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name(trim(header[c]));
        bool numeric = true;
        std::set<std::string> distinct;
        for (std::size_t r = 1; r < records.size(); ++r) {
            if (records[r].size() != header.size())
                throw Error(ErrorCode::schema_mismatch, fmt::format("record {} has {} fields", r, records[r].size()));
            const auto cell = trim(records[r][c]);
            if (cell.empty()) continue;
            distinct.emplace(cell);
            if (numeric && !parse_number(cell)) numeric = false;
        }
        if (name == target) numeric = false;
        if (numeric) {
            columns.push_back(ColumnSpec::numeric(name));
        } else {
            if (distinct.empty())
                throw Error(ErrorCode::schema_mismatch, "column '" + name + "' has no values");
            columns.push_back(ColumnSpec::categorical(name, {distinct.begin(), distinct.end()}));
        }
    }
    if (std::none_of(columns.begin(), columns.end(), [&](const auto& c) { return c.name == target; }))
        throw Error(ErrorCode::target_not_found, "target '" + target + "' not in header");
    return DatasetSchema(std::move(columns), target);
}

DatasetSchema infer_schema(const std::filesystem::path& path, const std::string& target) {
    auto in = open_or_throw(path);
    return infer_schema(in, target);
}

void write_csv(std::ostream& out, const InstanceTable& table) {
    const auto& schema = table.schema();
    for (std::size_t c = 0; c < schema.num_columns(); ++c) {
        if (c) out << ',';
        out << csv_escape(schema.column(c).name);
    }
    out << '\n';
    for (const auto& row : table.rows()) {
        for (std::size_t c = 0; c < row.values.size(); ++c) {
            if (c) out << ',';
            out << csv_escape(format_cell(schema.column(c), row.values[c]));
        }
        out << '\n';
    }
}

}  // namespace lormika
