#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lormika/blackbox.hpp"
#include "lormika/data.hpp"
#include "lormika/explain.hpp"

namespace lormika {

/// |lift - 1|.
double rate_of_interestingness(double lift);

/// |A ∩ B| / |A ∪ B|, and 1 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

/// Distinct column names used in the antecedent.
std::set<std::string> antecedent_features(const Rule& rule);

/// Supporting rule with the highest confidence, or nullptr when there is none.
const ExplainedRule* top_supporting_rule(const ExplanationSet& explanation);

struct TrainTestSplit {
    InstanceTable train;
    InstanceTable test;
    std::vector<std::size_t> train_rows;  // source row indices
    std::vector<std::size_t> test_rows;
};

/// Seeded shuffle split; rows keep source order within each part.
TrainTestSplit split_train_test(const InstanceTable& data, double test_fraction, std::uint64_t seed);

struct BenchmarkConfig {
    std::size_t n_instances = 20;
    std::size_t n_repeats = 2;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::size_t count = 0;

    static Summary of(const std::vector<double>& values);
};

struct InstanceResult {
    std::size_t row = 0;  // index into the candidate table
    bool ok = false;
    std::string error;
    /// Per repeat; NaN where the explanation had no supporting rule.
    std::vector<double> coverage;
    std::vector<double> confidence;
    std::vector<double> interestingness;
    std::vector<double> n_features;
    std::vector<double> wall_time_seconds;
    std::vector<std::vector<std::string>> features;
    double jaccard_distinct = 1.0;
    double jaccard_same_seed = 1.0;
    bool same_seed_identical = true;
};

struct EvalReport {
    std::string dataset;
    nlohmann::json model;
    nlohmann::json config;
    std::size_t n_instances = 0;
    std::size_t n_repeats = 0;
    std::size_t n_failed = 0;
    std::size_t n_without_rule = 0;
    /// Set when n_repeats = 1 and the distinct-seed Jaccard is 1 by convention.
    bool jaccard_single_run = false;

    Summary coverage;
    Summary confidence;
    Summary interestingness;
    Summary n_features;
    Summary wall_time_seconds;
    Summary jaccard_distinct;
    Summary jaccard_same_seed;

    std::vector<InstanceResult> instances;

    [[nodiscard]] nlohmann::json to_json(bool include_timing = true) const;
    [[nodiscard]] std::string to_table() const;
    [[nodiscard]] std::string to_csv() const;
};

/// Explains n_instances rows sampled from `candidates`, each n_repeats times
/// with distinct derived seeds, plus one replay of the first repeat's seed.
/// Scores come from the top supporting rule of each explanation. A failing
/// instance is logged in the report and the run continues.
EvalReport run_benchmark(const InstanceTable& train, const InstanceTable& candidates, ModelEndpoint& endpoint,
                         const ExplainConfig& explain, const BenchmarkConfig& bench);

}  // namespace lormika
