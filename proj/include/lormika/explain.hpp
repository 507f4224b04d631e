#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lormika/blackbox.hpp"
#include "lormika/data.hpp"
#include "lormika/miner.hpp"
#include "lormika/neighborhood.hpp"
#include "lormika/preprocess.hpp"
#include "lormika/rules.hpp"

namespace lormika {

inline constexpr const char* kExplanationFormat = "lormika/1";

struct ExplainConfig {
    /// Unset means 0.75 * sqrt(encoded width).
    std::optional<double> kernel_width;
    std::size_t min_per_class = 40;
    /// Unset means 5 * min_per_class.
    std::optional<std::size_t> max_per_class;
    std::size_t n_generated = 1000;
    double crossover_fraction = 0.5;
    /// objective and target_classes are ignored; every class is mined once per objective.
    MiningConfig mining;
    std::vector<Objective> objectives{kAllObjectives.begin(), kAllObjectives.end()};
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] SimilarityParams similarity_params(std::size_t encoded_width) const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Keys absent from `doc` keep the values already in `base`.
    static ExplainConfig from_json(const nlohmann::json& doc, ExplainConfig base);
    static ExplainConfig from_json(const nlohmann::json& doc);
};

enum class RuleCategory { current_supporting, current_contradicting, hypothetically_supporting, counterfactual };

std::string_view to_string(RuleCategory category) noexcept;

/// A mined rule with the objectives whose top-k produced it.
struct ExplainedRule {
    Rule rule;
    std::vector<Objective> found_by;
};

struct ExplanationSet {
    std::vector<ExplainedRule> current_supporting;
    std::vector<ExplainedRule> current_contradicting;
    std::vector<ExplainedRule> hypothetically_supporting;
    std::vector<ExplainedRule> counterfactual;
    Instance explained_instance;
    Prediction global_prediction;
    nlohmann::json provenance = nlohmann::json::object();

    [[nodiscard]] const std::vector<ExplainedRule>& list(RuleCategory category) const;
    [[nodiscard]] std::size_t total_rules() const noexcept;
};

/// True iff every antecedent condition holds on the discretized instance.
bool lhs_truth(const Rule& rule, const Instance& discretized);

RuleCategory categorize_rule(const Rule& rule, const Instance& discretized, Prediction prediction);

/// Splits rules by (LHS truth, consequent == prediction). Supporting lists are
/// ordered by m-estimate confidence, the other two by m-estimate lift; ties go
/// to higher coverage, then shorter and lexicographically smaller antecedents.
ExplanationSet categorize(std::span<const ExplainedRule> rules, const Instance& discretized, Prediction prediction);
ExplanationSet categorize(std::span<const Rule> rules, const Instance& discretized, Prediction prediction);

/// Everything the pipeline produced on the way to one explanation.
struct ExplanationTrace {
    Neighborhood neighborhood;
    /// Labels of neighborhood.combined(), in order.
    std::vector<Prediction> predictions;
    /// Discretized neighborhood labelled with the black-box predictions.
    InstanceTable labelled;
};

/// Fits preprocessing on the training table once and explains any number of
/// instances against a black-box endpoint.
class Explainer {
public:
    Explainer(const InstanceTable& train, ModelEndpoint& endpoint, ExplainConfig config);

    [[nodiscard]] ExplanationSet explain(const Instance& instance, ExplanationTrace* trace = nullptr) const;
    /// Same as explain() with the configured seed replaced.
    [[nodiscard]] ExplanationSet explain(const Instance& instance, std::uint64_t seed,
                                         ExplanationTrace* trace = nullptr) const;

    [[nodiscard]] const PreprocessorModel& preprocessor() const noexcept { return preprocessor_; }
    [[nodiscard]] const ExplainConfig& config() const noexcept { return config_; }
    [[nodiscard]] const InstanceTable& train() const noexcept { return train_; }

private:
    const InstanceTable& train_;
    ModelEndpoint& endpoint_;
    ExplainConfig config_;
    PreprocessorModel preprocessor_;
    std::vector<EncodedInstance> train_encoded_;
};

ExplanationSet explain_instance(const InstanceTable& train, const Instance& instance, ModelEndpoint& endpoint,
                                const ExplainConfig& config);

/// Mines every configured objective on a labelled discretized table, dedupes
/// each objective's rules and returns their union without repeats.
std::vector<ExplainedRule> mine_objectives(const InstanceTable& labelled, const MiningConfig& mining,
                                           std::span<const Objective> objectives);

nlohmann::json explanation_to_json(const DatasetSchema& schema, const ExplanationSet& explanation);
std::string render_explanation(const DatasetSchema& schema, const ExplanationSet& explanation);

}  // namespace lormika
