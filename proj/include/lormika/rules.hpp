#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lormika/data.hpp"

namespace lormika {

enum class Objective { support, coverage, confidence, lift, leverage };

inline constexpr std::array<Objective, 5> kAllObjectives{Objective::support, Objective::coverage, Objective::confidence,
                                                          Objective::lift, Objective::leverage};

std::string_view to_string(Objective objective) noexcept;
std::optional<Objective> parse_objective(std::string_view text) noexcept;

/// Antecedent atom: `column == value`. Binned numeric atoms carry their range.
struct Condition {
    std::size_t column = 0;
    std::size_t value = 0;
    std::string column_name;
    std::string value_name;
    std::optional<Interval> interval;

    friend bool operator==(const Condition& a, const Condition& b) noexcept {
        return a.column == b.column && a.value == b.value;
    }
    friend auto operator<=>(const Condition& a, const Condition& b) noexcept {
        if (auto c = a.column <=> b.column; c != 0) return c;
        return a.value <=> b.value;
    }
};

/// Builds a condition for `column == value` under `schema`, with names and bin range filled in.
Condition make_condition(const DatasetSchema& schema, std::size_t column, std::size_t value);

struct RuleCounts {
    std::size_t n = 0;     // rows
    std::size_t n_p = 0;   // rows matching the antecedent
    std::size_t n_q = 0;   // rows of the consequent class
    std::size_t n_pq = 0;  // rows matching both
    friend bool operator==(const RuleCounts&, const RuleCounts&) = default;
};

struct RuleMetrics {
    double support = 0.0;
    double coverage = 0.0;
    double confidence = 0.0;
    double lift = 0.0;
    double leverage = 0.0;
    double confidence_m = 0.0;
    double lift_m = 0.0;
    double fisher_p = 1.0;
    RuleCounts counts;
    friend bool operator==(const RuleMetrics&, const RuleMetrics&) = default;
};

struct Rule {
    std::vector<Condition> antecedent;  // sorted by column, at most one per column
    std::size_t consequent = 0;
    std::string consequent_label;
    RuleMetrics metrics;

    friend bool operator==(const Rule& a, const Rule& b) noexcept {
        return a.consequent == b.consequent && a.antecedent == b.antecedent;
    }
};

/// One-sided Fisher exact p-value P(X >= n_pq) for positive association of
/// the 2x2 table {p, not p} x {q, not q}.
double fisher_exact_greater(std::size_t n_pq, std::size_t n_p, std::size_t n_q, std::size_t n);

/// Ranking score from counts. Confidence and lift use the m-estimate
/// (n_pq + m * prior) / (n_p + m) with prior = n_q / n; m = 0 gives the raw ratios.
double objective_score(Objective objective, const RuleCounts& counts, double m) noexcept;

RuleMetrics metrics_from_counts(const RuleCounts& counts, double m);

/// Score of an already-measured rule, identical to objective_score on its counts.
double rule_score(const Rule& rule, Objective objective) noexcept;

/// Counts the antecedent / consequent over a labelled categorical table and
/// derives every metric. Rows with a missing target are skipped.
RuleMetrics compute_metrics(std::span<const Condition> antecedent, std::size_t consequent, const InstanceTable& data,
                            double m = 2.0);

/// True iff every condition holds on the (discretized) instance.
bool antecedent_matches(std::span<const Condition> antecedent, const Instance& instance);

std::string render_condition(const Condition& condition);
/// "(a = x & 1 < b <= 2) => label  [supp .3 cov .4 conf .75 lift 1.5]".
std::string render_rule(const Rule& rule);
nlohmann::json rule_to_json(const Rule& rule);

}  // namespace lormika
