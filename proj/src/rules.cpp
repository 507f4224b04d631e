#include "lormika/rules.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lormika/error.hpp"

namespace lormika {

std::string_view to_string(Objective objective) noexcept {
    switch (objective) {
        case Objective::support: return "support";
        case Objective::coverage: return "coverage";
        case Objective::confidence: return "confidence";
        case Objective::lift: return "lift";
        case Objective::leverage: return "leverage";
    }
    return "unknown";
}

std::optional<Objective> parse_objective(std::string_view text) noexcept {
    for (auto o : kAllObjectives)
        if (to_string(o) == text) return o;
    return std::nullopt;
}

Condition make_condition(const DatasetSchema& schema, std::size_t column, std::size_t value) {
    const auto& col = schema.column(column);
    if (col.is_numeric() || value >= col.categories.size())
        throw Error(ErrorCode::schema_mismatch, "condition does not name a category of '" + col.name + "'");
    Condition c;
    c.column = column;
    c.value = value;
    c.column_name = col.name;
    c.value_name = col.categories[value];
    if (!col.bins.empty()) c.interval = col.bins[value];
    return c;
}

double fisher_exact_greater(std::size_t n_pq, std::size_t n_p, std::size_t n_q, std::size_t n) {
    if (n_p > n || n_q > n || n_pq > std::min(n_p, n_q) || n_p + n_q > n + n_pq)
        throw Error(ErrorCode::empty_data, "inconsistent contingency counts");
    const std::size_t lo = n_p + n_q > n ? n_p + n_q - n : 0;
    const std::size_t hi = std::min(n_p, n_q);
    if (n_pq <= lo) return 1.0;

    const auto lchoose = [](double a, double b) {
        return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0);
    };
    const double N = static_cast<double>(n);
    const double K = static_cast<double>(n_q);
    const double D = static_cast<double>(n_p);
    // pmf(x + 1) / pmf(x)
    const auto ratio_up = [&](double x) { return (K - x) * (D - x) / ((x + 1.0) * (N - K - D + x + 1.0)); };

    // Anchor at the mode (or the tail start if it lies above the mode) and walk
    // outwards, so terms only shrink and underflow only drops negligible mass.
    const auto mode = std::clamp(static_cast<std::size_t>(std::floor((D + 1.0) * (K + 1.0) / (N + 2.0))), lo, hi);
    const std::size_t anchor = std::max(n_pq, mode);
    const double anchor_term =
        std::exp(lchoose(K, static_cast<double>(anchor)) + lchoose(N - K, D - static_cast<double>(anchor)) - lchoose(N, D));

    double sum = 0.0;
    double term = anchor_term;
    for (std::size_t k = anchor; k <= hi; ++k) {
        sum += term;
        term *= ratio_up(static_cast<double>(k));
    }
    term = anchor_term;
    for (std::size_t k = anchor; k > n_pq; --k) {
        term /= ratio_up(static_cast<double>(k - 1));
        sum += term;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double objective_score(Objective objective, const RuleCounts& c, double m) noexcept {
    const double n = static_cast<double>(c.n);
    const double prior = static_cast<double>(c.n_q) / n;
    switch (objective) {
        case Objective::support: return static_cast<double>(c.n_pq) / n;
        case Objective::coverage: return static_cast<double>(c.n_p) / n;
        case Objective::confidence:
            return (static_cast<double>(c.n_pq) + m * prior) / (static_cast<double>(c.n_p) + m);
        case Objective::lift:
            if (c.n_q == 0) return 0.0;
            return (static_cast<double>(c.n_pq) + m * prior) / (static_cast<double>(c.n_p) + m) / prior;
        case Objective::leverage:
            return static_cast<double>(c.n_pq) / n - static_cast<double>(c.n_p) / n * prior;
    }
    return 0.0;
}

RuleMetrics metrics_from_counts(const RuleCounts& c, double m) {
    if (c.n == 0) throw Error(ErrorCode::empty_data, "no rows");
    if (c.n_p == 0) throw Error(ErrorCode::zero_coverage, "antecedent matches no rows");
    RuleMetrics r;
    r.counts = c;
    const double n = static_cast<double>(c.n);
    const double support_q = static_cast<double>(c.n_q) / n;
    r.support = static_cast<double>(c.n_pq) / n;
    r.coverage = static_cast<double>(c.n_p) / n;
    r.confidence = static_cast<double>(c.n_pq) / static_cast<double>(c.n_p);
    r.lift = c.n_q == 0 ? 0.0 : r.confidence / support_q;
    r.leverage = objective_score(Objective::leverage, c, m);
    r.confidence_m = objective_score(Objective::confidence, c, m);
    r.lift_m = objective_score(Objective::lift, c, m);
    r.fisher_p = fisher_exact_greater(c.n_pq, c.n_p, c.n_q, c.n);
    return r;
}

double rule_score(const Rule& rule, Objective objective) noexcept {
    const auto& m = rule.metrics;
    switch (objective) {
        case Objective::support: return m.support;
        case Objective::coverage: return m.coverage;
        case Objective::confidence: return m.confidence_m;
        case Objective::lift: return m.lift_m;
        case Objective::leverage: return m.leverage;
    }
    return 0.0;
}

bool antecedent_matches(std::span<const Condition> antecedent, const Instance& instance) {
    for (const auto& cond : antecedent) {
        if (cond.column >= instance.values.size())
            throw Error(ErrorCode::schema_mismatch, "condition column outside the instance");
        const auto* cat = std::get_if<Category>(&instance.values[cond.column]);
        if (cat == nullptr) {
            if (std::holds_alternative<double>(instance.values[cond.column]))
                throw Error(ErrorCode::schema_mismatch, "instance is not discretized");
            return false;
        }
        if (cat->index != cond.value) return false;
    }
    return true;
}

RuleMetrics compute_metrics(std::span<const Condition> antecedent, std::size_t consequent, const InstanceTable& data,
                            double m) {
    const auto& schema = data.schema();
    if (consequent >= schema.num_classes()) throw Error(ErrorCode::schema_mismatch, "consequent out of range");
    RuleCounts c;
    for (const auto& row : data.rows()) {
        const auto cls = class_of(schema, row);
        if (!cls) continue;
        ++c.n;
        const bool p = antecedent_matches(antecedent, row);
        const bool q = *cls == consequent;
        c.n_p += p;
        c.n_q += q;
        c.n_pq += p && q;
    }
    if (c.n == 0) throw Error(ErrorCode::empty_data, "no labelled rows");
    return metrics_from_counts(c, m);
}

namespace {

std::string number(double v) { return fmt::format("{:.6g}", v); }

std::string short_ratio(double v) {
    auto s = fmt::format("{:.3f}", v);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
    return s.empty() || s == "-" ? "0" : s;
}

}  // namespace

std::string render_condition(const Condition& c) {
    if (c.interval) {
        const auto& iv = *c.interval;
        if (iv.lo && iv.hi) return fmt::format("{} < {} ≤ {}", number(*iv.lo), c.column_name, number(*iv.hi));
        if (iv.hi) return fmt::format("{} ≤ {}", c.column_name, number(*iv.hi));
        if (iv.lo) return fmt::format("{} > {}", c.column_name, number(*iv.lo));
    }
    return fmt::format("{} = {}", c.column_name, c.value_name);
}

std::string render_rule(const Rule& rule) {
    std::string lhs;
    for (const auto& c : rule.antecedent) {
        if (!lhs.empty()) lhs += " & ";
        lhs += render_condition(c);
    }
    const auto& m = rule.metrics;
    return fmt::format("({}) ⇒ {}  [supp {} cov {} conf {} lift {}]", lhs, rule.consequent_label, short_ratio(m.support),
                       short_ratio(m.coverage), short_ratio(m.confidence), short_ratio(m.lift));
}

nlohmann::json rule_to_json(const Rule& rule) {
    auto antecedent = nlohmann::json::array();
    for (const auto& c : rule.antecedent) {
        nlohmann::json interval = nullptr;
        if (c.interval)
            interval = {c.interval->lo ? nlohmann::json(*c.interval->lo) : nlohmann::json(nullptr),
                        c.interval->hi ? nlohmann::json(*c.interval->hi) : nlohmann::json(nullptr)};
        antecedent.push_back({{"column", c.column_name}, {"value", c.value_name}, {"interval", std::move(interval)}});
    }
    const auto& m = rule.metrics;
    return {{"antecedent", std::move(antecedent)},
            {"consequent", rule.consequent_label},
            {"metrics",
             {{"support", m.support},
              {"coverage", m.coverage},
              {"confidence", m.confidence},
              {"lift", m.lift},
              {"leverage", m.leverage},
              {"confidence_m", m.confidence_m},
              {"lift_m", m.lift_m},
              {"fisher_p", m.fisher_p},
              {"counts", {{"n", m.counts.n}, {"n_p", m.counts.n_p}, {"n_q", m.counts.n_q}, {"n_pq", m.counts.n_pq}}}}},
            {"rendering", render_rule(rule)}};
}

}  // namespace lormika
