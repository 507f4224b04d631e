#include "lormika/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lormika/error.hpp"

namespace lormika {

double interpolated_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::empty_table, "quantile of empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::size_t bin_index(const std::array<double, kNumBins - 1>& edges, double v) noexcept {
    std::size_t bin = 0;
    while (bin < edges.size() && v > edges[bin]) ++bin;
    return bin;
}

namespace {

DatasetSchema make_discretized_schema(const DatasetSchema& schema, const std::vector<NumericStats>& numeric) {
    auto columns = schema.columns();
    for (const auto& s : numeric) {
        auto& col = columns[s.column];
        col.kind = ColumnKind::categorical;
        col.categories.clear();
        col.bins.clear();
        for (std::size_t b = 0; b < kNumBins; ++b) {
            col.categories.push_back(fmt::format("bin_{}", b));
            Interval iv;
            if (b > 0) iv.lo = s.bin_edges[b - 1];
            if (b < kNumBins - 1) iv.hi = s.bin_edges[b];
            col.bins.push_back(iv);
        }
    }
    return DatasetSchema(std::move(columns), schema.target());
}

}  // namespace

PreprocessorModel::PreprocessorModel(DatasetSchema schema, std::vector<NumericStats> numeric,
                                     std::vector<CategoricalStats> categorical)
    : schema_(std::move(schema)), numeric_(std::move(numeric)), categorical_(std::move(categorical)) {
    width_ = numeric_.size();
    std::size_t expected = numeric_.size();
    for (const auto& c : categorical_) {
        if (c.one_hot_offset != expected)
            throw Error(ErrorCode::schema_mismatch, "one-hot offsets are not contiguous");
        expected += c.width;
    }
    width_ = expected;
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
        const auto& s = numeric_[i];
        if (s.slot != i || !(s.stddev >= 0.0) || s.bin_edges[0] > s.bin_edges[1])
            throw Error(ErrorCode::schema_mismatch, "invalid numeric statistics");
    }
    discretized_schema_ = make_discretized_schema(schema_, numeric_);
}

PreprocessorModel fit(const InstanceTable& train) {
    if (train.empty()) throw Error(ErrorCode::empty_table, "cannot fit on an empty table");
    const auto& schema = train.schema();
    std::vector<NumericStats> numeric;
    std::vector<CategoricalStats> categorical;

    for (std::size_t c : schema.feature_indices()) {
        const auto& col = schema.column(c);
        if (!col.is_numeric()) continue;
        std::vector<double> values;
        values.reserve(train.size());
        for (const auto& row : train.rows())
            if (const auto* v = std::get_if<double>(&row.values[c])) values.push_back(*v);
        if (values.empty()) throw Error(ErrorCode::all_missing_column, "column '" + col.name + "' is all missing");

        NumericStats s;
        s.column = c;
        s.slot = numeric.size();
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
        s.impute_value = s.mean;
        std::sort(values.begin(), values.end());
        for (std::size_t b = 0; b < kNumBins - 1; ++b)
            s.bin_edges[b] = interpolated_quantile(values, static_cast<double>(b + 1) / static_cast<double>(kNumBins));
        numeric.push_back(s);
    }

    std::size_t offset = numeric.size();
    for (std::size_t c : schema.feature_indices()) {
        const auto& col = schema.column(c);
        if (col.is_numeric()) continue;
        std::vector<std::size_t> counts(col.categories.size(), 0);
        std::size_t present = 0;
        for (const auto& row : train.rows())
            if (const auto* cat = std::get_if<Category>(&row.values[c])) {
                ++counts[cat->index];
                ++present;
            }
        if (present == 0) throw Error(ErrorCode::all_missing_column, "column '" + col.name + "' is all missing");
        CategoricalStats s;
        s.column = c;
        // max_element returns the first maximum, so ties go to the lowest index.
        s.mode_index = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        s.one_hot_offset = offset;
        s.width = col.categories.size();
        offset += s.width;
        categorical.push_back(s);
    }
    return PreprocessorModel(schema, std::move(numeric), std::move(categorical));
}

void PreprocessorModel::check_schema(const DatasetSchema& other) const {
    if (!(other == schema_)) throw Error(ErrorCode::schema_mismatch, "table schema differs from the fitted schema");
}

Instance PreprocessorModel::impute(const Instance& instance) const {
    if (instance.values.size() != schema_.num_columns())
        throw Error(ErrorCode::schema_mismatch, "instance arity differs from the fitted schema");
    Instance out = instance;
    for (const auto& s : numeric_)
        if (is_missing(out.values[s.column])) out.values[s.column] = s.impute_value;
    for (const auto& s : categorical_)
        if (is_missing(out.values[s.column])) out.values[s.column] = Category{s.mode_index};
    return out;
}

EncodedInstance PreprocessorModel::encode(const Instance& instance) const {
    const Instance full = impute(instance);
    EncodedInstance out(width_, 0.0);
    for (const auto& s : numeric_) {
        const auto* v = std::get_if<double>(&full.values[s.column]);
        if (v == nullptr) throw Error(ErrorCode::schema_mismatch, "expected numeric cell");
        out[s.slot] = s.stddev > 0.0 ? (*v - s.mean) / s.stddev : 0.0;
    }
    for (const auto& s : categorical_) {
        const auto* cat = std::get_if<Category>(&full.values[s.column]);
        if (cat == nullptr || cat->index >= s.width) throw Error(ErrorCode::schema_mismatch, "expected category cell");
        out[s.one_hot_offset + cat->index] = 1.0;
    }
    return out;
}

std::vector<EncodedInstance> PreprocessorModel::transform(const InstanceTable& table) const {
    check_schema(table.schema());
    std::vector<EncodedInstance> out;
    out.reserve(table.size());
    for (const auto& row : table.rows()) out.push_back(encode(row));
    return out;
}

Instance PreprocessorModel::discretize(const Instance& instance) const {
    Instance out = impute(instance);
    for (const auto& s : numeric_) {
        const auto* v = std::get_if<double>(&out.values[s.column]);
        if (v == nullptr) throw Error(ErrorCode::schema_mismatch, "expected numeric cell");
        out.values[s.column] = Category{bin_index(s.bin_edges, *v)};
    }
    return out;
}

InstanceTable PreprocessorModel::discretize(const InstanceTable& table) const {
    check_schema(table.schema());
    std::vector<Instance> rows;
    rows.reserve(table.size());
    for (const auto& row : table.rows()) rows.push_back(discretize(row));
    return InstanceTable(discretized_schema_, std::move(rows));
}

nlohmann::json PreprocessorModel::to_json() const {
    nlohmann::json doc;
    doc["encoded_width"] = width_;
    auto& num = doc["numeric"] = nlohmann::json::array();
    for (const auto& s : numeric_) {
        num.push_back({{"column", schema_.column(s.column).name},
                       {"mean", s.mean},
                       {"stddev", s.stddev},
                       {"impute_value", s.impute_value},
                       {"bin_edges", s.bin_edges}});
    }
    auto& cat = doc["categorical"] = nlohmann::json::array();
    for (const auto& s : categorical_) {
        const auto& col = schema_.column(s.column);
        cat.push_back({{"column", col.name},
                       {"mode", col.categories[s.mode_index]},
                       {"one_hot_offset", s.one_hot_offset},
                       {"width", s.width}});
    }
    return doc;
}

PreprocessorModel PreprocessorModel::from_json(const nlohmann::json& doc, const DatasetSchema& schema) {
    auto column_of = [&](const nlohmann::json& item) {
        const auto name = item.at("column").get<std::string>();
        const auto idx = schema.column_index(name);
        if (!idx) throw Error(ErrorCode::schema_mismatch, "unknown column '" + name + "' in preprocessor document");
        return *idx;
    };
    try {
        std::vector<NumericStats> numeric;
        for (const auto& item : doc.at("numeric")) {
            NumericStats s;
            s.column = column_of(item);
            s.slot = numeric.size();
            s.mean = item.at("mean").get<double>();
            s.stddev = item.at("stddev").get<double>();
            s.impute_value = item.at("impute_value").get<double>();
            s.bin_edges = item.at("bin_edges").get<std::array<double, kNumBins - 1>>();
            numeric.push_back(s);
        }
        std::vector<CategoricalStats> categorical;
        for (const auto& item : doc.at("categorical")) {
            CategoricalStats s;
            s.column = column_of(item);
            const auto mode = schema.column(s.column).category_index(item.at("mode").get<std::string>());
            if (!mode) throw Error(ErrorCode::unknown_category, "mode not declared in schema");
            s.mode_index = *mode;
            s.one_hot_offset = item.at("one_hot_offset").get<std::size_t>();
            s.width = item.at("width").get<std::size_t>();
            categorical.push_back(s);
        }
        return PreprocessorModel(schema, std::move(numeric), std::move(categorical));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_mismatch, std::string("malformed preprocessor document: ") + e.what());
    }
}

std::vector<EncodedInstance> transform(const PreprocessorModel& model, const InstanceTable& table) {
    return model.transform(table);
}

InstanceTable discretize(const PreprocessorModel& model, const InstanceTable& table) {
    return model.discretize(table);
}

}  // namespace lormika
