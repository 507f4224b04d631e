#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "lormika/data.hpp"

namespace lormika {

/// Dense encoding: z-scored numeric features first (schema order), then one
/// one-hot block per categorical feature.
using EncodedInstance = std::vector<double>;

inline constexpr std::size_t kNumBins = 3;

struct NumericStats {
    std::size_t column = 0;  // schema column index
    std::size_t slot = 0;    // position in the encoded vector
    double mean = 0.0;
    double stddev = 0.0;  // population convention
    double impute_value = 0.0;
    std::array<double, kNumBins - 1> bin_edges{};

    friend bool operator==(const NumericStats&, const NumericStats&) = default;
};

struct CategoricalStats {
    std::size_t column = 0;
    std::size_t mode_index = 0;
    std::size_t one_hot_offset = 0;
    std::size_t width = 0;

    friend bool operator==(const CategoricalStats&, const CategoricalStats&) = default;
};

/// Quantile with linear interpolation between order statistics; `sorted` must be ascending.
double interpolated_quantile(std::span<const double> sorted, double p);

/// Bin index of v under interior edges, using (edge[i-1], edge[i]] ranges.
std::size_t bin_index(const std::array<double, kNumBins - 1>& edges, double v) noexcept;

class PreprocessorModel {
public:
    PreprocessorModel() = default;
    PreprocessorModel(DatasetSchema schema, std::vector<NumericStats> numeric,
                      std::vector<CategoricalStats> categorical);

    [[nodiscard]] const DatasetSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<NumericStats>& numeric() const noexcept { return numeric_; }
    [[nodiscard]] const std::vector<CategoricalStats>& categorical() const noexcept { return categorical_; }
    [[nodiscard]] std::size_t encoded_width() const noexcept { return width_; }
    /// Schema of discretized tables: numeric features become three-bin categoricals.
    [[nodiscard]] const DatasetSchema& discretized_schema() const noexcept { return discretized_schema_; }

    /// Fills missing feature cells with the fitted mean / mode. The target cell is untouched.
    [[nodiscard]] Instance impute(const Instance& instance) const;
    [[nodiscard]] EncodedInstance encode(const Instance& instance) const;
    [[nodiscard]] std::vector<EncodedInstance> transform(const InstanceTable& table) const;
    [[nodiscard]] Instance discretize(const Instance& instance) const;
    [[nodiscard]] InstanceTable discretize(const InstanceTable& table) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static PreprocessorModel from_json(const nlohmann::json& doc, const DatasetSchema& schema);

    friend bool operator==(const PreprocessorModel& a, const PreprocessorModel& b) {
        return a.schema_ == b.schema_ && a.numeric_ == b.numeric_ && a.categorical_ == b.categorical_;
    }

private:
    void check_schema(const DatasetSchema& other) const;

    DatasetSchema schema_;
    DatasetSchema discretized_schema_;
    std::vector<NumericStats> numeric_;
    std::vector<CategoricalStats> categorical_;
    std::size_t width_ = 0;
};

/// Fits imputation, z-score, one-hot and equal-frequency bin parameters on the
/// feature columns of `train`.
PreprocessorModel fit(const InstanceTable& train);
std::vector<EncodedInstance> transform(const PreprocessorModel& model, const InstanceTable& table);
InstanceTable discretize(const PreprocessorModel& model, const InstanceTable& table);

}  // namespace lormika
