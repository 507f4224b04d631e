#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "lormika/data.hpp"
#include "lormika/explain.hpp"
#include "lormika/miner.hpp"
#include "lormika/neighborhood.hpp"
#include "lormika/random.hpp"
#include "lormika/rules.hpp"

namespace testsupport {

using namespace lormika;

inline std::filesystem::path data_dir() { return LORMIKA_DATA_DIR; }

/// Temporary file removed on scope exit.
class TempFile {
public:
    explicit TempFile(const std::string& contents, const std::string& suffix = ".csv") {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("lormika_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + suffix);
        std::ofstream(path_) << contents;
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

/// Random fully categorical labelled table. The target leans on the first
/// feature so that strong rules exist; a few cells are missing.
inline InstanceTable random_categorical_table(Rng& rng, std::size_t max_cols = 10, std::size_t max_cats = 4,
                                              std::size_t max_rows = 200) {
    const std::size_t n_cols = 1 + rng.below(max_cols);
    const std::size_t n_rows = 1 + rng.below(max_rows);
    const std::size_t n_classes = 2 + rng.below(2);
    std::vector<ColumnSpec> cols;
    std::vector<std::size_t> cats;
    for (std::size_t c = 0; c < n_cols; ++c) {
        const std::size_t k = 1 + rng.below(max_cats);
        std::vector<std::string> names;
        for (std::size_t v = 0; v < k; ++v) names.push_back("v" + std::to_string(v));
        cols.push_back(ColumnSpec::categorical("f" + std::to_string(c), names));
        cats.push_back(k);
    }
    std::vector<std::string> labels;
    for (std::size_t q = 0; q < n_classes; ++q) labels.push_back("c" + std::to_string(q));
    cols.push_back(ColumnSpec::categorical("y", labels));

    std::vector<Instance> rows;
    for (std::size_t r = 0; r < n_rows; ++r) {
        Instance inst;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (rng.uniform01() < 0.03) {
                inst.values.emplace_back(Missing{});
            } else {
                inst.values.emplace_back(Category{rng.below(cats[c])});
            }
        }
        std::size_t label = rng.below(n_classes);
        if (const auto* lead = std::get_if<Category>(&inst.values[0]); lead != nullptr && rng.uniform01() < 0.7)
            label = lead->index % n_classes;
        if (rng.uniform01() < 0.02) {
            inst.values.emplace_back(Missing{});
        } else {
            inst.values.emplace_back(Category{label});
        }
        rows.push_back(std::move(inst));
    }
    return InstanceTable(DatasetSchema(std::move(cols), "y"), std::move(rows));
}

/// Two numeric features (one with a few missing cells), one categorical
/// feature and a three-class target with a few missing labels.
inline InstanceTable random_mixed_table(Rng& rng, std::size_t n_rows) {
    DatasetSchema schema({ColumnSpec::numeric("x"), ColumnSpec::categorical("c", {"p", "q", "r"}),
                          ColumnSpec::numeric("z"), ColumnSpec::categorical("y", {"a", "b", "c"})},
                         "y");
    std::vector<Instance> rows;
    for (std::size_t r = 0; r < n_rows; ++r) {
        Instance inst;
        inst.values.emplace_back(rng.uniform01() < 0.05 ? Cell{Missing{}} : Cell{rng.uniform(-5, 5)});
        inst.values.emplace_back(Category{rng.below(3)});
        inst.values.emplace_back(rng.uniform(0, 100));
        inst.values.emplace_back(rng.uniform01() < 0.03 ? Cell{Missing{}} : Cell{Category{r % 3}});
        rows.push_back(std::move(inst));
    }
    return InstanceTable(std::move(schema), std::move(rows));
}

/// Exact binomial coefficient; exact for n <= 62.
inline std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<std::uint64_t>(r);
}

/// P(X >= a) for X ~ Hypergeometric(population n, successes n_q, draws n_p).
/// Exact integer term counts up to n = 60, long double log-space terms beyond.
inline double fisher_oracle(std::size_t a, std::size_t n_p, std::size_t n_q, std::size_t n) {
    const std::size_t top = std::min(n_p, n_q);
    if (n <= 60) {
        std::uint64_t tail = 0;
        for (std::size_t x = a; x <= top; ++x) tail += choose(n_q, x) * choose(n - n_q, n_p - x);
        return static_cast<double>(static_cast<long double>(tail) / static_cast<long double>(choose(n, n_p)));
    }
    auto lchoose = [](long double m, long double k) {
        return std::lgamma(m + 1.0L) - std::lgamma(k + 1.0L) - std::lgamma(m - k + 1.0L);
    };
    const long double denom = lchoose(n, n_p);
    long double tail = 0.0L;
    for (std::size_t x = a; x <= top; ++x) {
        if (n_p - x > n - n_q) continue;
        tail += std::exp(lchoose(n_q, x) + lchoose(n - n_q, n_p - x) - denom);
    }
    return static_cast<double>(std::min(tail, 1.0L));
}

struct OracleRule {
    std::vector<std::pair<std::size_t, std::size_t>> atoms;  // (column, value), ascending
    std::size_t consequent = 0;
    double score = 0.0;
};

inline double oracle_score(Objective objective, double n, double n_p, double n_q, double n_pq, double m) {
    const double prior = n_q / n;
    switch (objective) {
        case Objective::support: return n_pq / n;
        case Objective::coverage: return n_p / n;
        case Objective::confidence: return (n_pq + m * prior) / (n_p + m);
        case Objective::lift: return n_q == 0 ? 0.0 : (n_pq + m * prior) / (n_p + m) / prior;
        case Objective::leverage: return n_pq / n - n_p / n * prior;
    }
    return 0.0;
}

/// Exhaustive top-k by direct row scans over every antecedent of allowed length.
inline std::vector<OracleRule> brute_force_top_k(const InstanceTable& table, const MiningConfig& cfg,
                                                 std::size_t consequent) {
    const auto& schema = table.schema();
    const auto features = schema.feature_indices();
    std::vector<const Instance*> rows;
    for (const auto& r : table.rows())
        if (!is_missing(r.values[schema.target_index()])) rows.push_back(&r);
    const double n = static_cast<double>(rows.size());
    std::size_t n_q = 0;
    for (const auto* r : rows) n_q += std::get<Category>(r->values[schema.target_index()]).index == consequent;

    std::vector<OracleRule> found;
    std::vector<std::pair<std::size_t, std::size_t>> current;
    auto visit = [&](auto&& self, std::size_t start) -> void {
        if (!current.empty()) {
            std::size_t n_p = 0, n_pq = 0;
            for (const auto* r : rows) {
                bool match = true;
                for (auto [c, v] : current) {
                    const auto* cat = std::get_if<Category>(&r->values[c]);
                    if (cat == nullptr || cat->index != v) {
                        match = false;
                        break;
                    }
                }
                if (!match) continue;
                ++n_p;
                n_pq += std::get<Category>(r->values[schema.target_index()]).index == consequent;
            }
            if (n_p >= cfg.min_coverage_count &&
                fisher_oracle(n_pq, n_p, n_q, rows.size()) <= cfg.fisher_alpha) {
                found.push_back({current, consequent,
                                 oracle_score(cfg.objective, n, static_cast<double>(n_p), static_cast<double>(n_q),
                                              static_cast<double>(n_pq), cfg.m)});
            }
        }
        if (current.size() == cfg.max_antecedent_len) return;
        for (std::size_t i = start; i < features.size(); ++i) {
            const auto c = features[i];
            for (std::size_t v = 0; v < schema.column(c).categories.size(); ++v) {
                current.emplace_back(c, v);
                self(self, i + 1);
                current.pop_back();
            }
        }
    };
    visit(visit, 0);

    std::sort(found.begin(), found.end(), [](const OracleRule& a, const OracleRule& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.atoms.size() != b.atoms.size()) return a.atoms.size() < b.atoms.size();
        return a.atoms < b.atoms;
    });
    if (found.size() > cfg.k) found.resize(cfg.k);
    return found;
}

/// Neighbour selection written step by step from the textual description:
/// score every row, group by class, take each class's L-th best score (or its
/// worst when smaller than L), cut at the minimum, keep rows at or above it.
/// Returns per-class eligible row lists before any capping, and the cut.
struct SelectionOracle {
    double cut = 0.0;
    std::vector<std::vector<std::size_t>> eligible_by_class;
};

inline SelectionOracle selection_oracle(const std::vector<std::vector<double>>& encoded, const InstanceTable& raw,
                                        const std::vector<double>& explained, std::size_t L, double w) {
    const auto& schema = raw.schema();
    std::vector<double> sims(encoded.size());
    for (std::size_t r = 0; r < encoded.size(); ++r) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < explained.size(); ++j) d2 += (encoded[r][j] - explained[j]) * (encoded[r][j] - explained[j]);
        sims[r] = std::exp(-d2 / (2.0 * w * w));
    }
    SelectionOracle out;
    out.eligible_by_class.resize(schema.num_classes());
    std::vector<double> lth;
    for (std::size_t c = 0; c < schema.num_classes(); ++c) {
        std::vector<double> group;
        for (std::size_t r = 0; r < raw.size(); ++r) {
            const auto cls = class_of(schema, raw.row(r));
            if (cls && *cls == c) group.push_back(sims[r]);
        }
        std::sort(group.begin(), group.end(), std::greater<>());
        lth.push_back(group.size() >= L ? group[L - 1] : group.back());
    }
    out.cut = *std::min_element(lth.begin(), lth.end());
    for (std::size_t r = 0; r < raw.size(); ++r) {
        const auto cls = class_of(schema, raw.row(r));
        if (cls && sims[r] >= out.cut) out.eligible_by_class[*cls].push_back(r);
    }
    return out;
}

inline InstanceTable read_table(const std::string& csv, const DatasetSchema& schema) {
    std::istringstream in(csv);
    return read_csv(in, schema);
}

/// Recidivism-style fixture: age 27, four priors, violent recidivist, predicted High.
struct CompasFixture {
    PreprocessorModel model;
    Instance instance;
    Instance discretized;
    Prediction prediction{0};
    Rule supporting;      // 25 < age <= 29.25 & is_violent_recid = 1 => High
    Rule contradicting;   // priors_count <= 4 => Medium_Low
    Rule counterfactual;  // age > 29.25 & priors_count <= 4 => Medium_Low
    Rule hypothetical;    // priors_count > 6.5 => High
};

inline CompasFixture compas_fixture() {
    const DatasetSchema schema({ColumnSpec::numeric("age"), ColumnSpec::numeric("priors_count"),
                                ColumnSpec::categorical("is_violent_recid", {"0", "1"}),
                                ColumnSpec::categorical("risk", {"High", "Medium_Low"})},
                               "risk");
    NumericStats age{0, 0, 34.0, 11.0, 34.0, {25.0, 29.25}};
    NumericStats priors{1, 1, 3.0, 4.0, 3.0, {4.0, 6.5}};
    CategoricalStats violent{2, 0, 2, 2};
    CompasFixture f;
    f.model = PreprocessorModel(schema, {age, priors}, {violent});
    f.instance = Instance{{27.0, 4.0, Category{1}, Missing{}}};
    f.discretized = f.model.discretize(f.instance);
    const auto& ds = f.model.discretized_schema();
    auto rule = [&](std::vector<std::pair<std::size_t, std::size_t>> atoms, std::size_t q) {
        Rule r;
        for (auto [c, v] : atoms) r.antecedent.push_back(make_condition(ds, c, v));
        r.consequent = q;
        r.consequent_label = ds.class_labels()[q];
        return r;
    };
    f.supporting = rule({{0, 1}, {2, 1}}, 0);
    f.contradicting = rule({{1, 0}}, 1);
    f.counterfactual = rule({{0, 2}, {1, 0}}, 1);
    f.hypothetical = rule({{1, 2}}, 0);
    return f;
}

}  // namespace testsupport
