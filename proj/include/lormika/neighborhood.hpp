#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "lormika/data.hpp"
#include "lormika/preprocess.hpp"

namespace lormika {

struct SimilarityParams {
    double kernel_width = 1.0;        // w
    std::size_t min_per_class = 40;   // L
    std::size_t max_per_class = 200;  // M

    /// L = 40, M = 5L, w = 0.75 * sqrt(encoded width).
    static SimilarityParams defaults(std::size_t encoded_width);
    void validate() const;
};

struct GenerationParams {
    std::size_t n_generated = 1000;
    double crossover_fraction = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SelectedInstance {
    std::size_t row = 0;  // index into the training table
    Instance instance;
    double similarity = 0.0;

    friend bool operator==(const SelectedInstance&, const SelectedInstance&) = default;
};

struct Selection {
    std::vector<SelectedInstance> selected;  // ascending row order
    double cut_point = 0.0;                  // S_ct
};

struct Neighborhood {
    std::vector<SelectedInstance> selected;
    std::vector<Instance> generated;
    Instance explained;
    double cut_point = 0.0;
    std::uint64_t seed = 0;

    /// Selected instances followed by generated ones.
    [[nodiscard]] std::vector<Instance> combined() const;
    [[nodiscard]] nlohmann::json to_json(const DatasetSchema& schema) const;

    friend bool operator==(const Neighborhood&, const Neighborhood&) = default;
};

/// exp(-d^2 / (2 w^2)) with d the Euclidean distance.
double similarity(std::span<const double> a, std::span<const double> b, double kernel_width);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Training neighbours above the per-class cut point, capped at M per class.
/// Rows whose target is missing take no part.
Selection select_neighbors(std::span<const EncodedInstance> train_encoded, const InstanceTable& train_raw,
                           const EncodedInstance& explained, const SimilarityParams& params, std::uint64_t seed);

/// x + (y - x) * alpha on numeric features; other features copied from `closest`.
Instance crossover_child(const DatasetSchema& schema, const Instance& x, const Instance& y, double alpha,
                         const Instance& closest);
/// x + (y - z) * sigma on numeric features; other features copied from `closest`.
Instance mutation_child(const DatasetSchema& schema, const Instance& x, const Instance& y, const Instance& z,
                        double sigma, const Instance& closest);

/// Synthesizes instances from the selected parents: floor(fraction * n) by
/// crossover, the rest by mutation. Parents are imputed before arithmetic.
std::vector<Instance> generate_instances(std::span<const Instance> parents, const EncodedInstance& explained,
                                         const PreprocessorModel& model, const GenerationParams& params);

Neighborhood build_neighborhood(const PreprocessorModel& model, const InstanceTable& train,
                                std::span<const EncodedInstance> train_encoded, const Instance& explained,
                                const SimilarityParams& sim, const GenerationParams& gen);

}  // namespace lormika
