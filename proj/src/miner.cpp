#include "lormika/miner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lormika/error.hpp"

namespace lormika {

void MiningConfig::validate() const {
    if (k < 1) throw Error(ErrorCode::invalid_config, "k must be at least 1");
    if (max_antecedent_len < 1) throw Error(ErrorCode::invalid_config, "max antecedent length must be at least 1");
    if (min_coverage_count < 1) throw Error(ErrorCode::invalid_config, "min coverage count must be at least 1");
    if (!(fisher_alpha >= 0.0)) throw Error(ErrorCode::invalid_config, "fisher alpha must be non-negative");
    if (!(m >= 0.0) || !std::isfinite(m)) throw Error(ErrorCode::invalid_config, "m must be non-negative");
}

bool ranks_before(double score_a, std::span<const Condition> a, double score_b, std::span<const Condition> b) noexcept {
    if (score_a != score_b) return score_a > score_b;
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

RuleData::RuleData(const InstanceTable& table) : schema_(table.schema()) {
    const auto features = schema_.feature_indices();
    if (features.empty()) throw Error(ErrorCode::no_categorical_columns, "table has no feature columns");
    for (auto c : features)
        if (schema_.column(c).is_numeric())
            throw Error(ErrorCode::no_categorical_columns,
                        "column '" + schema_.column(c).name + "' is numeric; discretize before mining");

    std::vector<const Instance*> labelled;
    for (const auto& row : table.rows())
        if (class_of(schema_, row)) labelled.push_back(&row);
    if (labelled.empty()) throw Error(ErrorCode::empty_data, "no labelled rows to mine");

    rows_ = labelled.size();
    words_ = (rows_ + 63) / 64;
    for (auto c : features)
        for (std::size_t v = 0; v < schema_.column(c).categories.size(); ++v) atoms_.push_back({c, v});

    atom_bits_.assign(atoms_.size() * words_, 0);
    class_bits_.assign(schema_.num_classes() * words_, 0);
    class_counts_.assign(schema_.num_classes(), 0);

    std::vector<std::size_t> first_atom(schema_.num_columns(), 0);
    for (std::size_t a = atoms_.size(); a-- > 0;) first_atom[atoms_[a].column] = a;

    for (std::size_t r = 0; r < rows_; ++r) {
        const auto& row = *labelled[r];
        const std::uint64_t bit = std::uint64_t{1} << (r % 64);
        const std::size_t word = r / 64;
        const auto cls = *class_of(schema_, row);
        class_bits_[cls * words_ + word] |= bit;
        ++class_counts_[cls];
        for (auto c : features)
            if (const auto* cat = std::get_if<Category>(&row.values[c]))
                atom_bits_[(first_atom[c] + cat->index) * words_ + word] |= bit;
    }
}

namespace {

std::size_t popcount_and(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) noexcept {
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return n;
}

/// Highest score any rule p' => q with p' extending the current antecedent
/// can reach. Counts only shrink under extension, and a qualifying rule keeps
/// n_p' >= max(n_pq', min_coverage); each score is maximised at
/// n_pq' = n_pq, n_p' = max(n_pq, min_coverage).
double optimistic_bound(Objective objective, const RuleCounts& c, std::size_t min_coverage, double m) {
    RuleCounts best = c;
    if (objective != Objective::coverage && objective != Objective::support)
        best.n_p = std::max(c.n_pq, min_coverage);
    return objective_score(objective, best, m);
}

class Search {
public:
    Search(const RuleData& data, const MiningConfig& config, std::size_t target, SearchStats& stats)
        : data_(data), config_(config), target_(target), stats_(stats) {
        const auto& atoms = data_.atoms();
        for (std::size_t a = 0; a < atoms.size(); ++a) {
            const auto bits = data_.atom_bits(a);
            if (popcount_and(bits, bits) >= config_.min_coverage_count) usable_.push_back(a);
        }
    }

    std::vector<Rule> run() {
        std::vector<std::uint64_t> all(data_.words(), ~std::uint64_t{0});
        if (const auto tail = data_.rows() % 64; tail != 0) all.back() = (std::uint64_t{1} << tail) - 1;
        std::vector<Condition> antecedent;
        expand(all, antecedent, 0, 0);

        std::vector<Rule> out;
        out.reserve(best_.size());
        for (auto& e : best_) {
            Rule r;
            r.antecedent = std::move(e.antecedent);
            r.consequent = target_;
            r.consequent_label = data_.schema().class_labels()[target_];
            r.metrics = metrics_from_counts(e.counts, config_.m);
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    struct Entry {
        double score;
        std::vector<Condition> antecedent;
        RuleCounts counts;
    };

    [[nodiscard]] bool full() const noexcept { return best_.size() >= config_.k; }

    [[nodiscard]] bool admits(double score, std::span<const Condition> antecedent) const noexcept {
        if (!full()) return true;
        const auto& worst = best_.back();
        return ranks_before(score, antecedent, worst.score, worst.antecedent);
    }

    void insert(double score, const std::vector<Condition>& antecedent, const RuleCounts& counts) {
        const auto pos = std::find_if(best_.begin(), best_.end(), [&](const Entry& e) {
            return ranks_before(score, antecedent, e.score, e.antecedent);
        });
        best_.insert(pos, Entry{score, antecedent, counts});
        if (best_.size() > config_.k) best_.pop_back();
    }

    void expand(std::span<const std::uint64_t> cover, std::vector<Condition>& antecedent, std::size_t next_column,
                std::size_t depth) {
        std::vector<std::uint64_t> bits(cover.size());
        const auto target_bits = data_.class_bits(target_);
        const bool zero_hits_fail = config_.fisher_alpha < 1.0;
        for (std::size_t a : usable_) {
            const auto& atom = data_.atoms()[a];
            if (atom.column < next_column) continue;
            ++stats_.nodes_visited;

            const auto atom_bits = data_.atom_bits(a);
            std::size_t n_p = 0;
            for (std::size_t w = 0; w < bits.size(); ++w) {
                bits[w] = cover[w] & atom_bits[w];
                n_p += static_cast<std::size_t>(std::popcount(bits[w]));
            }
            // Coverage only shrinks below this node.
            if (n_p < config_.min_coverage_count) continue;
            const std::size_t n_pq = popcount_and(bits, target_bits);
            // No extension can raise n_pq above zero, and zero hits never pass the test.
            if (n_pq == 0 && zero_hits_fail) continue;

            const RuleCounts counts{data_.rows(), n_p, data_.class_count(target_), n_pq};
            antecedent.push_back(make_condition(data_.schema(), atom.column, atom.value));
            const double score = objective_score(config_.objective, counts, config_.m);
            if (admits(score, antecedent)) {
                ++stats_.fisher_tests;
                if (fisher_exact_greater(n_pq, n_p, counts.n_q, counts.n) <= config_.fisher_alpha)
                    insert(score, antecedent, counts);
            }
            if (depth + 1 < config_.max_antecedent_len) {
                const double bound = optimistic_bound(config_.objective, counts, config_.min_coverage_count, config_.m);
                // The margin only makes pruning more conservative.
                const bool hopeless = full() && bound + 1e-12 * std::max(1.0, std::abs(bound)) < best_.back().score;
                if (hopeless) {
                    ++stats_.nodes_pruned;
                } else {
                    expand(bits, antecedent, atom.column + 1, depth + 1);
                }
            }
            antecedent.pop_back();
        }
    }

    const RuleData& data_;
    const MiningConfig& config_;
    std::size_t target_;
    SearchStats& stats_;
    std::vector<std::size_t> usable_;
    std::vector<Entry> best_;  // best first
};

}  // namespace

std::vector<Rule> mine_top_k(const RuleData& data, const MiningConfig& config, std::size_t target_class,
                             SearchStats* stats) {
    config.validate();
    if (target_class >= data.schema().num_classes())
        throw Error(ErrorCode::invalid_config, fmt::format("target class {} out of range", target_class));
    SearchStats local;
    Search search(data, config, target_class, stats ? *stats : local);
    return search.run();
}

std::vector<Rule> mine_k_optimal(const RuleData& data, const MiningConfig& config) {
    std::vector<std::size_t> targets = config.target_classes;
    if (targets.empty()) {
        targets.resize(data.schema().num_classes());
        std::iota(targets.begin(), targets.end(), std::size_t{0});
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    std::vector<Rule> out;
    for (auto t : targets) {
        auto rules = mine_top_k(data, config, t);
        std::move(rules.begin(), rules.end(), std::back_inserter(out));
    }
    return out;
}

std::vector<Rule> mine_k_optimal(const InstanceTable& data, const MiningConfig& config) {
    config.validate();
    return mine_k_optimal(RuleData(data), config);
}

std::vector<Rule> dedupe_redundant(std::span<const Rule> rules, Objective objective) {
    std::vector<std::size_t> order(rules.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rules[a].antecedent.size() < rules[b].antecedent.size(); });

    std::vector<bool> keep(rules.size(), false);
    std::vector<std::size_t> kept;
    for (auto i : order) {
        const auto& r = rules[i];
        const double score = rule_score(r, objective);
        const bool redundant = std::any_of(kept.begin(), kept.end(), [&](std::size_t j) {
            const auto& s = rules[j];
            return s.consequent == r.consequent &&
                   std::includes(r.antecedent.begin(), r.antecedent.end(), s.antecedent.begin(), s.antecedent.end()) &&
                   score <= rule_score(s, objective);
        });
        if (!redundant) {
            keep[i] = true;
            kept.push_back(i);
        }
    }
    std::vector<Rule> out;
    for (std::size_t i = 0; i < rules.size(); ++i)
        if (keep[i]) out.push_back(rules[i]);
    return out;
}

}  // namespace lormika
