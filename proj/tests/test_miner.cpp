#include <doctest.h>

#include "lormika/error.hpp"
#include "support.hpp"

using namespace lormika;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> atoms_of(const Rule& r) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : r.antecedent) out.emplace_back(c.column, c.value);
    return out;
}

Rule rule_with(const DatasetSchema& schema, std::vector<std::pair<std::size_t, std::size_t>> atoms, std::size_t q,
               double conf) {
    Rule r;
    for (auto [c, v] : atoms) r.antecedent.push_back(make_condition(schema, c, v));
    r.consequent = q;
    r.metrics.confidence_m = conf;
    return r;
}

bool is_subset(const Rule& small, const Rule& big) {
    return std::includes(big.antecedent.begin(), big.antecedent.end(), small.antecedent.begin(), small.antecedent.end());
}

}  // namespace

TEST_SUITE("miner") {
    TEST_CASE("a perfect single predictor is found with confidence one") {
        DatasetSchema schema({ColumnSpec::categorical("a", {"x", "y"}), ColumnSpec::categorical("b", {"u", "v"}),
                              ColumnSpec::categorical("t", {"n", "p"})},
                             "t");
        std::vector<Instance> rows;
        for (std::size_t i = 0; i < 30; ++i) rows.push_back({{Category{i % 2}, Category{(i / 2) % 2}, Category{i % 2}}});
        MiningConfig cfg;
        cfg.k = 1;
        const auto rules = mine_top_k(RuleData(InstanceTable(schema, rows)), cfg, 1);
        REQUIRE(rules.size() == 1);
        CHECK(atoms_of(rules[0]) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
        CHECK(rules[0].metrics.confidence == 1.0);
        CHECK(rules[0].consequent_label == "p");
    }

    TEST_CASE("eight-row lift example matches enumeration") {
        DatasetSchema schema({ColumnSpec::categorical("a", {"0", "1"}), ColumnSpec::categorical("b", {"0", "1"}),
                              ColumnSpec::categorical("c", {"0", "1"}), ColumnSpec::categorical("t", {"n", "p"})},
                             "t");
        std::vector<Instance> rows;
        const int bits[8][4] = {{1, 1, 0, 1}, {1, 0, 1, 1}, {1, 1, 1, 1}, {0, 1, 0, 0},
                                {0, 0, 1, 0}, {1, 0, 0, 0}, {0, 1, 1, 1}, {0, 0, 0, 0}};
        for (const auto& b : bits)
            rows.push_back({{Category{std::size_t(b[0])}, Category{std::size_t(b[1])}, Category{std::size_t(b[2])},
                             Category{std::size_t(b[3])}}});
        const InstanceTable t(schema, rows);
        MiningConfig cfg;
        cfg.k = 3;
        cfg.objective = Objective::lift;
        cfg.max_antecedent_len = 2;
        cfg.min_coverage_count = 1;
        cfg.fisher_alpha = 1.0;
        const auto got = mine_top_k(RuleData(t), cfg, 1);
        const auto want = testsupport::brute_force_top_k(t, cfg, 1);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(atoms_of(got[i]) == want[i].atoms);
            CHECK(rule_score(got[i], cfg.objective) == doctest::Approx(want[i].score).epsilon(1e-12));
        }
    }

    TEST_CASE("property: every objective matches exhaustive enumeration on random tables") {
        Rng rng(2024);
        for (int trial = 0; trial < 60; ++trial) {
            const auto table = testsupport::random_categorical_table(rng);
            const RuleData data(table);
            for (auto objective : kAllObjectives) {
                MiningConfig cfg;
                cfg.objective = objective;
                cfg.k = 1 + rng.below(8);
                cfg.max_antecedent_len = 1 + rng.below(3);
                cfg.min_coverage_count = 1 + rng.below(6);
                cfg.fisher_alpha = rng.below(3) == 0 ? 1.0 : 0.05;
                for (std::size_t q = 0; q < table.schema().num_classes(); ++q) {
                    const auto got = mine_top_k(data, cfg, q);
                    const auto want = testsupport::brute_force_top_k(table, cfg, q);
                    REQUIRE(got.size() == want.size());
                    for (std::size_t i = 0; i < got.size(); ++i) {
                        CHECK(atoms_of(got[i]) == want[i].atoms);
                        CHECK(std::abs(rule_score(got[i], objective) - want[i].score) <= 1e-12);
                    }
                }
            }
        }
    }

    TEST_CASE("property: output is sorted, bounded by k and admissible") {
        Rng rng(77);
        for (int trial = 0; trial < 60; ++trial) {
            const auto table = testsupport::random_categorical_table(rng);
            MiningConfig cfg;
            cfg.objective = kAllObjectives[rng.below(5)];
            cfg.k = 1 + rng.below(10);
            const auto rules = mine_k_optimal(table, cfg);
            std::size_t start = 0;
            while (start < rules.size()) {
                std::size_t end = start;
                while (end < rules.size() && rules[end].consequent == rules[start].consequent) ++end;
                CHECK(end - start <= cfg.k);
                for (std::size_t i = start + 1; i < end; ++i)
                    CHECK(rule_score(rules[i - 1], cfg.objective) >= rule_score(rules[i], cfg.objective));
                start = end;
            }
            for (const auto& r : rules) {
                CHECK(r.metrics.counts.n_p >= cfg.min_coverage_count);
                CHECK(r.metrics.fisher_p <= cfg.fisher_alpha);
                CHECK(r.antecedent.size() <= cfg.max_antecedent_len);
                CHECK(std::is_sorted(r.antecedent.begin(), r.antecedent.end()));
            }
        }
    }

    TEST_CASE("property: extending an antecedent never raises coverage or support") {
        Rng rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto table = testsupport::random_categorical_table(rng, 6, 3, 80);
            const auto& schema = table.schema();
            const auto features = schema.feature_indices();
            const auto c1 = features[rng.below(features.size())];
            const auto c2 = features[rng.below(features.size())];
            if (c1 == c2) continue;
            const std::vector<Condition> small{make_condition(schema, c1, rng.below(schema.column(c1).categories.size()))};
            auto big = small;
            big.push_back(make_condition(schema, c2, rng.below(schema.column(c2).categories.size())));
            std::sort(big.begin(), big.end());
            const auto q = rng.below(schema.num_classes());
            try {
                const auto ms = compute_metrics(small, q, table);
                const auto mb = compute_metrics(big, q, table);
                CHECK(mb.coverage <= ms.coverage);
                CHECK(mb.support <= ms.support);
            } catch (const Error& e) {
                CHECK((e.code() == ErrorCode::zero_coverage || e.code() == ErrorCode::empty_data));
            }
        }
    }

    TEST_CASE("dedupe examples") {
        DatasetSchema schema({ColumnSpec::categorical("A", {"0", "1"}), ColumnSpec::categorical("B", {"0", "1"}),
                              ColumnSpec::categorical("t", {"q", "r"})},
                             "t");
        const auto a = rule_with(schema, {{0, 1}}, 0, 0.9);
        const auto ab_same = rule_with(schema, {{0, 1}, {1, 1}}, 0, 0.9);
        const std::vector<Rule> same{ab_same, a};
        const auto kept = dedupe_redundant(same, Objective::confidence);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0] == a);

        const auto a8 = rule_with(schema, {{0, 1}}, 0, 0.8);
        const auto ab95 = rule_with(schema, {{0, 1}, {1, 1}}, 0, 0.95);
        const std::vector<Rule> better{a8, ab95};
        CHECK(dedupe_redundant(better, Objective::confidence).size() == 2);

        const auto ab_other = rule_with(schema, {{0, 1}, {1, 1}}, 1, 0.5);
        const std::vector<Rule> other_class{a, ab_other};
        CHECK(dedupe_redundant(other_class, Objective::confidence).size() == 2);
    }

    TEST_CASE("property: dedupe leaves no dominated superset") {
        Rng rng(31);
        DatasetSchema schema({ColumnSpec::categorical("A", {"0", "1"}), ColumnSpec::categorical("B", {"0", "1"}),
                              ColumnSpec::categorical("C", {"0", "1"}), ColumnSpec::categorical("t", {"q", "r"})},
                             "t");
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<Rule> rules;
            const auto n = rng.below(12);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<std::pair<std::size_t, std::size_t>> atoms;
                for (std::size_t c = 0; c < 3; ++c)
                    if (rng.below(2) == 0) atoms.emplace_back(c, rng.below(2));
                if (atoms.empty()) atoms.emplace_back(0, 0);
                rules.push_back(rule_with(schema, atoms, rng.below(2), static_cast<double>(rng.below(5)) / 4.0));
            }
            const auto kept = dedupe_redundant(rules, Objective::confidence);
            for (const auto& x : kept)
                for (const auto& y : kept) {
                    if (&x == &y || x.consequent != y.consequent) continue;
                    if (is_subset(x, y) && x.antecedent.size() < y.antecedent.size())
                        CHECK(rule_score(y, Objective::confidence) > rule_score(x, Objective::confidence));
                }
            // Every dropped rule is dominated by some kept rule.
            for (const auto& r : rules) {
                if (std::find(kept.begin(), kept.end(), r) != kept.end()) continue;
                const bool dominated = std::any_of(kept.begin(), kept.end(), [&](const Rule& k) {
                    return k.consequent == r.consequent && is_subset(k, r) &&
                           rule_score(r, Objective::confidence) <= rule_score(k, Objective::confidence);
                });
                CHECK(dominated);
            }
        }
    }

    TEST_CASE("miner errors") {
        DatasetSchema numeric({ColumnSpec::numeric("x"), ColumnSpec::categorical("t", {"a", "b"})}, "t");
        try {
            RuleData d(InstanceTable(numeric, {{{1.0, Category{0}}}}));
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::no_categorical_columns);
        }
        DatasetSchema cats({ColumnSpec::categorical("x", {"u"}), ColumnSpec::categorical("t", {"a", "b"})}, "t");
        try {
            RuleData d(InstanceTable(cats, {{{Category{0}, Missing{}}}}));
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::empty_data);
        }
        MiningConfig bad;
        bad.k = 0;
        CHECK_THROWS_AS(bad.validate(), Error);
        const RuleData d(InstanceTable(cats, {{{Category{0}, Category{1}}}}));
        CHECK_THROWS_AS(mine_top_k(d, {}, 5), Error);
    }

    TEST_CASE("search statistics record pruning on a larger table") {
        Rng rng(3);
        const auto table = testsupport::random_categorical_table(rng, 10, 4, 200);
        SearchStats stats;
        MiningConfig cfg;
        cfg.objective = Objective::support;
        (void)mine_top_k(RuleData(table), cfg, 0, &stats);
        CHECK(stats.nodes_visited > 0);
    }
}
