#include "lormika/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include <fmt/format.h>

#include "lormika/error.hpp"
#include "lormika/json_io.hpp"

namespace lormika {

// Configuration ---------------------------------------------------------------

void ExplainConfig::validate() const {
    if (kernel_width && !(*kernel_width > 0.0 && std::isfinite(*kernel_width)))
        throw Error(ErrorCode::non_positive_width, "kernel width must be positive");
    similarity_params(1).validate();
    GenerationParams{n_generated, crossover_fraction, seed}.validate();
    mining.validate();
    if (objectives.empty()) throw Error(ErrorCode::invalid_config, "at least one objective is required");
}

SimilarityParams ExplainConfig::similarity_params(std::size_t encoded_width) const {
    auto p = SimilarityParams::defaults(encoded_width);
    if (kernel_width) p.kernel_width = *kernel_width;
    p.min_per_class = min_per_class;
    p.max_per_class = max_per_class.value_or(5 * min_per_class);
    return p;
}

nlohmann::json ExplainConfig::to_json() const {
    auto objs = nlohmann::json::array();
    for (auto o : objectives) objs.push_back(to_string(o));
    return {{"kernel_width", kernel_width ? nlohmann::json(*kernel_width) : nlohmann::json(nullptr)},
            {"min_per_class", min_per_class},
            {"max_per_class", max_per_class ? nlohmann::json(*max_per_class) : nlohmann::json(nullptr)},
            {"n_generated", n_generated},
            {"crossover_fraction", crossover_fraction},
            {"k", mining.k},
            {"objectives", std::move(objs)},
            {"max_antecedent_len", mining.max_antecedent_len},
            {"min_coverage_count", mining.min_coverage_count},
            {"fisher_alpha", mining.fisher_alpha},
            {"m", mining.m},
            {"seed", seed}};
}

ExplainConfig ExplainConfig::from_json(const nlohmann::json& doc, ExplainConfig base) {
    if (!doc.is_object()) throw Error(ErrorCode::invalid_config, "explain config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "kernel_width") {
                base.kernel_width = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
            } else if (key == "min_per_class") {
                base.min_per_class = value.get<std::size_t>();
            } else if (key == "max_per_class") {
                base.max_per_class =
                    value.is_null() ? std::nullopt : std::optional<std::size_t>(value.get<std::size_t>());
            } else if (key == "n_generated") {
                base.n_generated = value.get<std::size_t>();
            } else if (key == "crossover_fraction") {
                base.crossover_fraction = value.get<double>();
            } else if (key == "k") {
                base.mining.k = value.get<std::size_t>();
            } else if (key == "objectives") {
                base.objectives.clear();
                for (const auto& name : value) {
                    const auto o = parse_objective(name.get<std::string>());
                    if (!o) throw Error(ErrorCode::invalid_config, "unknown objective " + name.dump());
                    base.objectives.push_back(*o);
                }
            } else if (key == "max_antecedent_len") {
                base.mining.max_antecedent_len = value.get<std::size_t>();
            } else if (key == "min_coverage_count") {
                base.mining.min_coverage_count = value.get<std::size_t>();
            } else if (key == "fisher_alpha") {
                base.mining.fisher_alpha = value.get<double>();
            } else if (key == "m") {
                base.mining.m = value.get<double>();
            } else if (key == "seed") {
                base.seed = value.get<std::uint64_t>();
            } else {
                throw Error(ErrorCode::invalid_config, "unknown explain setting '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_config, std::string("bad explain setting: ") + e.what());
    }
    return base;
}

ExplainConfig ExplainConfig::from_json(const nlohmann::json& doc) { return from_json(doc, ExplainConfig{}); }

// Categories ----------------------------------------------------------------

std::string_view to_string(RuleCategory category) noexcept {
    switch (category) {
        case RuleCategory::current_supporting: return "current_supporting";
        case RuleCategory::current_contradicting: return "current_contradicting";
        case RuleCategory::hypothetically_supporting: return "hypothetically_supporting";
        case RuleCategory::counterfactual: return "counterfactual";
    }
    return "unknown";
}

const std::vector<ExplainedRule>& ExplanationSet::list(RuleCategory category) const {
    switch (category) {
        case RuleCategory::current_supporting: return current_supporting;
        case RuleCategory::current_contradicting: return current_contradicting;
        case RuleCategory::hypothetically_supporting: return hypothetically_supporting;
        case RuleCategory::counterfactual: return counterfactual;
    }
    return counterfactual;
}

std::size_t ExplanationSet::total_rules() const noexcept {
    return current_supporting.size() + current_contradicting.size() + hypothetically_supporting.size() +
           counterfactual.size();
}

bool lhs_truth(const Rule& rule, const Instance& discretized) { return antecedent_matches(rule.antecedent, discretized); }

RuleCategory categorize_rule(const Rule& rule, const Instance& discretized, Prediction prediction) {
    const bool lhs = lhs_truth(rule, discretized);
    const bool rhs = rule.consequent == prediction.class_index;
    if (lhs) return rhs ? RuleCategory::current_supporting : RuleCategory::current_contradicting;
    return rhs ? RuleCategory::hypothetically_supporting : RuleCategory::counterfactual;
}

namespace {

bool ordered_before(const Rule& a, const Rule& b, Objective key) {
    const double sa = rule_score(a, key);
    const double sb = rule_score(b, key);
    if (sa != sb) return sa > sb;
    if (a.metrics.coverage != b.metrics.coverage) return a.metrics.coverage > b.metrics.coverage;
    if (a.antecedent.size() != b.antecedent.size()) return a.antecedent.size() < b.antecedent.size();
    if (a.antecedent != b.antecedent)
        return std::lexicographical_compare(a.antecedent.begin(), a.antecedent.end(), b.antecedent.begin(),
                                            b.antecedent.end());
    return a.consequent < b.consequent;
}

void sort_list(std::vector<ExplainedRule>& rules, Objective key) {
    std::sort(rules.begin(), rules.end(),
              [key](const ExplainedRule& a, const ExplainedRule& b) { return ordered_before(a.rule, b.rule, key); });
}

}  // namespace

ExplanationSet categorize(std::span<const ExplainedRule> rules, const Instance& discretized, Prediction prediction) {
    ExplanationSet out;
    for (const auto& r : rules) {
        switch (categorize_rule(r.rule, discretized, prediction)) {
            case RuleCategory::current_supporting: out.current_supporting.push_back(r); break;
            case RuleCategory::current_contradicting: out.current_contradicting.push_back(r); break;
            case RuleCategory::hypothetically_supporting: out.hypothetically_supporting.push_back(r); break;
            case RuleCategory::counterfactual: out.counterfactual.push_back(r); break;
        }
    }
    sort_list(out.current_supporting, Objective::confidence);
    sort_list(out.hypothetically_supporting, Objective::confidence);
    sort_list(out.current_contradicting, Objective::lift);
    sort_list(out.counterfactual, Objective::lift);
    out.explained_instance = discretized;
    out.global_prediction = prediction;
    return out;
}

ExplanationSet categorize(std::span<const Rule> rules, const Instance& discretized, Prediction prediction) {
    std::vector<ExplainedRule> wrapped;
    wrapped.reserve(rules.size());
    for (const auto& r : rules) wrapped.push_back({r, {}});
    return categorize(wrapped, discretized, prediction);
}

// Pipeline --------------------------------------------------------------------

std::vector<ExplainedRule> mine_objectives(const InstanceTable& labelled, const MiningConfig& mining,
                                           std::span<const Objective> objectives) {
    const RuleData data(labelled);
    std::vector<ExplainedRule> out;
    std::map<std::pair<std::size_t, std::vector<Condition>>, std::size_t> seen;
    for (auto objective : objectives) {
        MiningConfig cfg = mining;
        cfg.objective = objective;
        cfg.target_classes.clear();
        const auto mined = mine_k_optimal(data, cfg);
        for (auto& rule : dedupe_redundant(mined, objective)) {
            auto key = std::make_pair(rule.consequent, rule.antecedent);
            if (const auto it = seen.find(key); it != seen.end()) {
                out[it->second].found_by.push_back(objective);
                continue;
            }
            seen.emplace(std::move(key), out.size());
            out.push_back({std::move(rule), {objective}});
        }
    }
    return out;
}

Explainer::Explainer(const InstanceTable& train, ModelEndpoint& endpoint, ExplainConfig config)
    : train_(train), endpoint_(endpoint), config_(std::move(config)) {
    config_.validate();
    preprocessor_ = fit(train_);
    train_encoded_ = preprocessor_.transform(train_);
}

ExplanationSet Explainer::explain(const Instance& instance, ExplanationTrace* trace) const {
    return explain(instance, config_.seed, trace);
}

ExplanationSet Explainer::explain(const Instance& instance, std::uint64_t seed, ExplanationTrace* trace) const {
    const auto& schema = train_.schema();
    validate_instance(schema, instance);
    const auto sim = config_.similarity_params(preprocessor_.encoded_width());
    const GenerationParams gen{config_.n_generated, config_.crossover_fraction, seed};

    auto neighborhood = build_neighborhood(preprocessor_, train_, train_encoded_, instance, sim, gen);

    // One batch: the neighborhood followed by the explained instance itself.
    auto batch = neighborhood.combined();
    batch.push_back(instance);
    auto predictions = predict_batch(endpoint_, batch);
    const Prediction global = predictions.back();
    predictions.pop_back();
    batch.pop_back();

    const auto target = schema.target_index();
    std::vector<Instance> rows;
    rows.reserve(batch.size());
    std::vector<std::size_t> label_counts(schema.num_classes(), 0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Instance row = preprocessor_.discretize(batch[i]);
        row.values[target] = Category{predictions[i].class_index};
        ++label_counts[predictions[i].class_index];
        rows.push_back(std::move(row));
    }
    InstanceTable labelled(preprocessor_.discretized_schema(), std::move(rows));

    const auto rules = mine_objectives(labelled, config_.mining, config_.objectives);
    const Instance explained_disc = preprocessor_.discretize(instance);
    auto result = categorize(rules, explained_disc, global);
    result.explained_instance = instance;

    auto effective = config_.to_json();
    effective["seed"] = seed;
    effective["kernel_width"] = sim.kernel_width;
    effective["max_per_class"] = sim.max_per_class;
    nlohmann::json labels = nlohmann::json::object();
    for (std::size_t c = 0; c < label_counts.size(); ++c) labels[schema.class_labels()[c]] = label_counts[c];
    result.provenance = {{"seed", seed},
                         {"config", std::move(effective)},
                         {"model", endpoint_.describe()},
                         {"neighborhood",
                          {{"selected", neighborhood.selected.size()},
                           {"generated", neighborhood.generated.size()},
                           {"cut_point", neighborhood.cut_point},
                           {"label_counts", std::move(labels)}}},
                         {"rules_mined", rules.size()}};

    if (trace != nullptr) {
        trace->neighborhood = std::move(neighborhood);
        trace->predictions = std::move(predictions);
        trace->labelled = std::move(labelled);
    }
    return result;
}

ExplanationSet explain_instance(const InstanceTable& train, const Instance& instance, ModelEndpoint& endpoint,
                                const ExplainConfig& config) {
    return Explainer(train, endpoint, config).explain(instance);
}

// Output ----------------------------------------------------------------------

namespace {

constexpr RuleCategory kCategories[] = {RuleCategory::current_supporting, RuleCategory::current_contradicting,
                                        RuleCategory::hypothetically_supporting, RuleCategory::counterfactual};

std::string_view heading(RuleCategory category) {
    switch (category) {
        case RuleCategory::current_supporting: return "Current supporting rules";
        case RuleCategory::current_contradicting: return "Current contradicting rules";
        case RuleCategory::hypothetically_supporting: return "Hypothetically supporting rules";
        case RuleCategory::counterfactual: return "Counterfactual rules";
    }
    return "";
}

}  // namespace

nlohmann::json explanation_to_json(const DatasetSchema& schema, const ExplanationSet& explanation) {
    nlohmann::json doc;
    doc["format"] = kExplanationFormat;
    doc["explained_instance"] = instance_to_object(schema, explanation.explained_instance);
    doc["global_prediction"] = schema.class_labels().at(explanation.global_prediction.class_index);
    for (auto category : kCategories) {
        auto list = nlohmann::json::array();
        for (const auto& r : explanation.list(category)) {
            auto item = rule_to_json(r.rule);
            auto objs = nlohmann::json::array();
            for (auto o : r.found_by) objs.push_back(to_string(o));
            item["objectives"] = std::move(objs);
            list.push_back(std::move(item));
        }
        doc[std::string(to_string(category))] = std::move(list);
    }
    doc["provenance"] = explanation.provenance;
    return doc;
}

std::string render_explanation(const DatasetSchema& schema, const ExplanationSet& explanation) {
    std::string out = fmt::format("Prediction: {}\n", schema.class_labels().at(explanation.global_prediction.class_index));
    for (auto category : kCategories) {
        const auto& list = explanation.list(category);
        out += fmt::format("\n{} ({})\n", heading(category), list.size());
        for (const auto& r : list) out += "  " + render_rule(r.rule) + "\n";
    }
    return out;
}

}  // namespace lormika
