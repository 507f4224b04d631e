#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "lormika/data.hpp"

namespace lormika {

nlohmann::json schema_to_json(const DatasetSchema& schema);
DatasetSchema schema_from_json(const nlohmann::json& doc);

/// Cell as a wire value: number, category string, or null.
nlohmann::json cell_to_json(const ColumnSpec& column, const Cell& cell);
Cell cell_from_json(const ColumnSpec& column, const nlohmann::json& value);

/// {"column": value, ...} over every column, in schema order.
nlohmann::json instance_to_object(const DatasetSchema& schema, const Instance& instance);

/// Feature cells (target excluded) as a positional array, as sent to external models.
nlohmann::json feature_row(const DatasetSchema& schema, const Instance& instance);

}  // namespace lormika
