#include <doctest.h>

#include <map>
#include <set>

#include "lormika/blackbox.hpp"
#include "lormika/error.hpp"
#include "lormika/eval.hpp"
#include "lormika/explain.hpp"
#include "support.hpp"

using namespace lormika;

namespace {

InstanceTable german() {
    const auto path = testsupport::data_dir() / "german.csv";
    return load_csv(path, infer_schema(path, "class"));
}

std::vector<std::pair<std::size_t, std::vector<Condition>>> keys(const std::vector<ExplainedRule>& rules) {
    std::vector<std::pair<std::size_t, std::vector<Condition>>> out;
    for (const auto& r : rules) out.emplace_back(r.rule.consequent, r.rule.antecedent);
    return out;
}

ExplainConfig small_config(std::uint64_t seed) {
    ExplainConfig cfg;
    cfg.n_generated = 300;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_SUITE("explain") {
    TEST_CASE("recidivism example rules land in their categories") {
        const auto f = testsupport::compas_fixture();
        CHECK(std::get<Category>(f.discretized.values[0]).index == 1);
        CHECK(std::get<Category>(f.discretized.values[1]).index == 0);
        CHECK(lhs_truth(f.contradicting, f.discretized));
        CHECK_FALSE(lhs_truth(f.counterfactual, f.discretized));
        CHECK(categorize_rule(f.supporting, f.discretized, f.prediction) == RuleCategory::current_supporting);
        CHECK(categorize_rule(f.contradicting, f.discretized, f.prediction) == RuleCategory::current_contradicting);
        CHECK(categorize_rule(f.counterfactual, f.discretized, f.prediction) == RuleCategory::counterfactual);
        CHECK(categorize_rule(f.hypothetical, f.discretized, f.prediction) ==
              RuleCategory::hypothetically_supporting);

        const std::vector<Rule> rules{f.counterfactual, f.hypothetical, f.supporting, f.contradicting};
        const auto set = categorize(rules, f.discretized, f.prediction);
        CHECK(set.total_rules() == 4);
        CHECK(set.current_supporting.at(0).rule == f.supporting);
        CHECK(set.current_contradicting.at(0).rule == f.contradicting);
        CHECK(set.counterfactual.at(0).rule == f.counterfactual);
        CHECK(set.hypothetically_supporting.at(0).rule == f.hypothetical);
        CHECK(render_rule(f.supporting).rfind("(25 < age ≤ 29.25 & is_violent_recid = 1) ⇒ High", 0) == 0);
    }

    TEST_CASE("property: categories partition any rule set, independent of input order") {
        Rng rng(41);
        for (int trial = 0; trial < 300; ++trial) {
            const auto table = testsupport::random_categorical_table(rng, 5, 3, 30);
            const auto& schema = table.schema();
            const auto features = schema.feature_indices();
            Instance inst;
            for (std::size_t c = 0; c < schema.num_columns(); ++c)
                inst.values.emplace_back(c == schema.target_index() || rng.below(10) == 0
                                             ? Cell{Missing{}}
                                             : Cell{Category{rng.below(schema.column(c).categories.size())}});
            const Prediction pred{rng.below(schema.num_classes())};

            std::map<std::pair<std::size_t, std::vector<Condition>>, Rule> unique;
            for (std::size_t i = 0, n = rng.below(25); i < n; ++i) {
                Rule r;
                for (auto c : features)
                    if (rng.below(3) == 0) r.antecedent.push_back(make_condition(schema, c, rng.below(schema.column(c).categories.size())));
                if (r.antecedent.empty()) continue;
                r.consequent = rng.below(schema.num_classes());
                r.metrics.confidence_m = static_cast<double>(rng.below(4)) / 4.0;
                r.metrics.lift_m = static_cast<double>(rng.below(4)) / 2.0;
                r.metrics.coverage = static_cast<double>(rng.below(3)) / 3.0;
                unique.emplace(std::make_pair(r.consequent, r.antecedent), r);
            }
            std::vector<Rule> rules;
            for (const auto& [k, r] : unique) rules.push_back(r);

            const auto set = categorize(rules, inst, pred);
            CHECK(set.total_rules() == rules.size());
            std::set<std::pair<std::size_t, std::vector<Condition>>> seen;
            for (auto cat : {RuleCategory::current_supporting, RuleCategory::current_contradicting,
                             RuleCategory::hypothetically_supporting, RuleCategory::counterfactual}) {
                for (const auto& r : set.list(cat)) {
                    CHECK(seen.emplace(r.rule.consequent, r.rule.antecedent).second);
                    const bool lhs = lhs_truth(r.rule, inst);
                    const bool rhs = r.rule.consequent == pred.class_index;
                    CHECK(categorize_rule(r.rule, inst, pred) == cat);
                    CHECK(lhs == (cat == RuleCategory::current_supporting || cat == RuleCategory::current_contradicting));
                    CHECK(rhs == (cat == RuleCategory::current_supporting ||
                                  cat == RuleCategory::hypothetically_supporting));
                }
            }
            CHECK(seen.size() == rules.size());

            auto shuffled = rules;
            for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
            const auto again = categorize(shuffled, inst, pred);
            for (auto cat : {RuleCategory::current_supporting, RuleCategory::current_contradicting,
                             RuleCategory::hypothetically_supporting, RuleCategory::counterfactual})
                CHECK(keys(again.list(cat)) == keys(set.list(cat)));
        }
    }

    TEST_CASE("German explanations are reproducible and report honest metrics") {
        const auto split = split_train_test(german(), 0.2, 42);
        auto model = train_builtin(EndpointKind::builtin_logistic, split.train);
        const Explainer explainer(split.train, *model, small_config(5));
        for (std::size_t row : {0u, 9u}) {
            ExplanationTrace trace;
            const auto a = explainer.explain(split.test.row(row), &trace);
            const auto b = explainer.explain(split.test.row(row));
            CHECK(explanation_to_json(split.train.schema(), a).dump() ==
                  explanation_to_json(split.train.schema(), b).dump());
            CHECK(a.total_rules() > 0);
            CHECK(a.global_prediction == model->predict(std::span(&split.test.row(row), 1)).front());
            CHECK(trace.predictions.size() == trace.neighborhood.selected.size() + trace.neighborhood.generated.size());
            CHECK(trace.labelled.size() == trace.predictions.size());
            CHECK(a.provenance["neighborhood"]["selected"] == trace.neighborhood.selected.size());

            for (auto cat : {RuleCategory::current_supporting, RuleCategory::current_contradicting,
                             RuleCategory::hypothetically_supporting, RuleCategory::counterfactual}) {
                for (const auto& r : a.list(cat)) {
                    const auto m = compute_metrics(r.rule.antecedent, r.rule.consequent, trace.labelled, 2.0);
                    CHECK(m == r.rule.metrics);
                    CHECK_FALSE(r.found_by.empty());
                    CHECK(r.rule.metrics.fisher_p <= 0.05);
                }
            }
            const auto other = explainer.explain(split.test.row(row), 6);
            CHECK(other.provenance["seed"] == 6);
        }
    }

    TEST_CASE("one-split tree: a counterfactual names the split column") {
        DatasetSchema schema({ColumnSpec::numeric("x"), ColumnSpec::numeric("noise"),
                              ColumnSpec::categorical("y", {"low", "high"})},
                             "y");
        Rng rng(12);
        std::vector<Instance> rows;
        for (int i = 0; i < 400; ++i) {
            const double x = rng.uniform(0, 10);
            rows.push_back({{x, rng.uniform(0, 10), Category{x > 5 ? 1u : 0u}}});
        }
        const InstanceTable train(schema, rows);
        const auto pre = fit(train);
        const auto& xs = pre.numeric()[0];
        DecisionTreeModel tree(pre, {{0, (5.0 - xs.mean) / xs.stddev, 1, 2, 0}, {-1, 0, 0, 0, 0}, {-1, 0, 0, 0, 1}});
        ExplainConfig cfg;
        cfg.seed = 3;
        for (double x : {2.0, 4.0, 7.5}) {
            const Instance inst{{x, 5.0, Missing{}}};
            const auto set = Explainer(train, tree, cfg).explain(inst);
            CHECK(set.global_prediction.class_index == (x > 5 ? 1u : 0u));
            const bool names_x = std::any_of(set.counterfactual.begin(), set.counterfactual.end(), [](const auto& r) {
                return std::any_of(r.rule.antecedent.begin(), r.rule.antecedent.end(),
                                   [](const Condition& c) { return c.column_name == "x"; });
            });
            CHECK(names_x);
        }
    }

    TEST_CASE("objective union keeps one copy per rule and records its objectives") {
        Rng rng(8);
        const auto table = testsupport::random_categorical_table(rng, 6, 3, 200);
        MiningConfig mining;
        const auto rules = mine_objectives(table, mining, kAllObjectives);
        std::set<std::pair<std::size_t, std::vector<Condition>>> seen;
        for (const auto& r : rules) {
            CHECK(seen.emplace(r.rule.consequent, r.rule.antecedent).second);
            CHECK_FALSE(r.found_by.empty());
            for (auto o : r.found_by) {
                MiningConfig cfg = mining;
                cfg.objective = o;
                cfg.target_classes = {r.rule.consequent};
                const auto top = dedupe_redundant(mine_k_optimal(table, cfg), o);
                CHECK(std::find(top.begin(), top.end(), r.rule) != top.end());
            }
        }
    }

    TEST_CASE("output formats") {
        const auto f = testsupport::compas_fixture();
        const std::vector<Rule> rules{f.supporting, f.counterfactual};
        auto set = categorize(rules, f.discretized, f.prediction);
        set.explained_instance = f.instance;
        const auto& schema = f.model.schema();
        const auto doc = explanation_to_json(schema, set);
        CHECK(doc["format"] == kExplanationFormat);
        CHECK(doc["global_prediction"] == "High");
        CHECK(doc["current_supporting"].size() == 1);
        CHECK(doc["counterfactual"].size() == 1);
        CHECK(doc["explained_instance"]["age"] == 27.0);
        const auto text = render_explanation(schema, set);
        CHECK(text.find("Prediction: High") != std::string::npos);
        CHECK(text.find("Current supporting rules (1)") != std::string::npos);
        CHECK(text.find("Counterfactual rules (1)") != std::string::npos);
    }

    TEST_CASE("configuration round trip and validation") {
        ExplainConfig cfg;
        cfg.kernel_width = 1.5;
        cfg.max_per_class = 90;
        cfg.objectives = {Objective::lift, Objective::support};
        cfg.mining.k = 7;
        cfg.seed = 11;
        const auto back = ExplainConfig::from_json(cfg.to_json());
        CHECK(back.to_json() == cfg.to_json());
        CHECK_THROWS_AS(ExplainConfig::from_json({{"bogus", 1}}), Error);
        CHECK_THROWS_AS(ExplainConfig::from_json({{"objectives", {"gain"}}}), Error);
        ExplainConfig bad;
        bad.kernel_width = 0.0;
        CHECK_THROWS_AS(bad.validate(), Error);
        bad = {};
        bad.objectives.clear();
        CHECK_THROWS_AS(bad.validate(), Error);
        CHECK(ExplainConfig{}.similarity_params(16).max_per_class == 200);
    }

    TEST_CASE("instances with the wrong shape are rejected") {
        const auto split = split_train_test(german(), 0.2, 42);
        auto model = train_builtin(EndpointKind::builtin_tree, split.train);
        const Explainer explainer(split.train, *model, small_config(1));
        try {
            (void)explainer.explain(Instance{{1.0}});
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::schema_mismatch);
        }
    }
}
