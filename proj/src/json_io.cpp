#include "lormika/json_io.hpp"

#include "lormika/error.hpp"

namespace lormika {

nlohmann::json schema_to_json(const DatasetSchema& schema) {
    auto cols = nlohmann::json::array();
    for (const auto& c : schema.columns()) {
        nlohmann::json col{{"name", c.name}, {"kind", c.is_numeric() ? "numeric" : "categorical"}};
        if (!c.is_numeric()) col["categories"] = c.categories;
        if (!c.bins.empty()) {
            auto bins = nlohmann::json::array();
            for (const auto& b : c.bins) {
                bins.push_back({b.lo ? nlohmann::json(*b.lo) : nlohmann::json(nullptr),
                                b.hi ? nlohmann::json(*b.hi) : nlohmann::json(nullptr)});
            }
            col["bins"] = std::move(bins);
        }
        cols.push_back(std::move(col));
    }
    return {{"columns", std::move(cols)}, {"target", schema.target()}};
}

DatasetSchema schema_from_json(const nlohmann::json& doc) {
    try {
        std::vector<ColumnSpec> columns;
        for (const auto& col : doc.at("columns")) {
            const auto kind = col.at("kind").get<std::string>();
            auto name = col.at("name").get<std::string>();
            if (kind == "numeric") {
                columns.push_back(ColumnSpec::numeric(std::move(name)));
            } else if (kind == "categorical") {
                auto spec = ColumnSpec::categorical(std::move(name), col.at("categories").get<std::vector<std::string>>());
                if (col.contains("bins")) {
                    for (const auto& b : col.at("bins")) {
                        Interval iv;
                        if (!b.at(0).is_null()) iv.lo = b.at(0).get<double>();
                        if (!b.at(1).is_null()) iv.hi = b.at(1).get<double>();
                        spec.bins.push_back(iv);
                    }
                }
                columns.push_back(std::move(spec));
            } else {
                throw Error(ErrorCode::schema_mismatch, "unknown column kind '" + kind + "'");
            }
        }
        return DatasetSchema(std::move(columns), doc.at("target").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_mismatch, std::string("malformed schema document: ") + e.what());
    }
}

nlohmann::json cell_to_json(const ColumnSpec& column, const Cell& cell) {
    if (is_missing(cell)) return nullptr;
    if (const auto* v = std::get_if<double>(&cell)) return *v;
    return column.categories.at(std::get<Category>(cell).index);
}

Cell cell_from_json(const ColumnSpec& column, const nlohmann::json& value) {
    if (value.is_null()) return Missing{};
    if (column.is_numeric()) {
        if (!value.is_number()) throw Error(ErrorCode::schema_mismatch, "expected number for '" + column.name + "'");
        return value.get<double>();
    }
    const auto text = value.is_string() ? value.get<std::string>() : value.dump();
    if (auto idx = column.category_index(text)) return Category{*idx};
    throw Error(ErrorCode::unknown_category, "value '" + text + "' not declared for '" + column.name + "'");
}

nlohmann::json instance_to_object(const DatasetSchema& schema, const Instance& instance) {
    auto obj = nlohmann::json::object();
    for (std::size_t c = 0; c < schema.num_columns(); ++c)
        obj[schema.column(c).name] = cell_to_json(schema.column(c), instance.values.at(c));
    return obj;
}

nlohmann::json feature_row(const DatasetSchema& schema, const Instance& instance) {
    auto row = nlohmann::json::array();
    for (std::size_t c : schema.feature_indices()) row.push_back(cell_to_json(schema.column(c), instance.values.at(c)));
    return row;
}

}  // namespace lormika
