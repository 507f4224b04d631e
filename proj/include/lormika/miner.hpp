#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lormika/data.hpp"
#include "lormika/rules.hpp"

namespace lormika {

struct MiningConfig {
    std::size_t k = 5;
    Objective objective = Objective::confidence;
    std::size_t max_antecedent_len = 4;
    std::size_t min_coverage_count = 5;
    double fisher_alpha = 0.05;
    double m = 2.0;
    /// Consequent classes to mine; empty means every class.
    std::vector<std::size_t> target_classes;

    void validate() const;
};

/// Ranking order: higher score, then shorter antecedent, then lexicographic
/// antecedent (column, value) order. Returns true when `a` ranks before `b`.
bool ranks_before(double score_a, std::span<const Condition> a, double score_b, std::span<const Condition> b) noexcept;

/// Bitset view of a labelled, fully categorical table. Rows whose target is
/// missing are dropped.
class RuleData {
public:
    explicit RuleData(const InstanceTable& table);

    struct Atom {
        std::size_t column;
        std::size_t value;
    };

    [[nodiscard]] const DatasetSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t words() const noexcept { return words_; }
    [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    [[nodiscard]] std::span<const std::uint64_t> atom_bits(std::size_t atom) const {
        return {atom_bits_.data() + atom * words_, words_};
    }
    [[nodiscard]] std::span<const std::uint64_t> class_bits(std::size_t cls) const {
        return {class_bits_.data() + cls * words_, words_};
    }
    [[nodiscard]] std::size_t class_count(std::size_t cls) const { return class_counts_.at(cls); }

private:
    DatasetSchema schema_;
    std::size_t rows_ = 0;
    std::size_t words_ = 0;
    std::vector<Atom> atoms_;  // canonical (column, value) order
    std::vector<std::uint64_t> atom_bits_;
    std::vector<std::uint64_t> class_bits_;
    std::vector<std::size_t> class_counts_;
};

struct SearchStats {
    std::size_t nodes_visited = 0;
    std::size_t nodes_pruned = 0;
    std::size_t fisher_tests = 0;
};

/// Exact top-k rules `p => target_class` under config.objective, among rules
/// with |p| <= max_antecedent_len, coverage count >= min_coverage_count and
/// fisher_p <= fisher_alpha. Depth-first branch and bound over antecedents in
/// canonical atom order; output equals exhaustive enumeration.
std::vector<Rule> mine_top_k(const RuleData& data, const MiningConfig& config, std::size_t target_class,
                             SearchStats* stats = nullptr);

/// mine_top_k for every configured target class, concatenated in class order.
std::vector<Rule> mine_k_optimal(const RuleData& data, const MiningConfig& config);
std::vector<Rule> mine_k_optimal(const InstanceTable& data, const MiningConfig& config);

/// Drops any rule whose antecedent contains (or equals) the antecedent of an
/// already kept rule with the same consequent and whose score is not better.
/// Kept rules stay in input order.
std::vector<Rule> dedupe_redundant(std::span<const Rule> rules, Objective objective);

}  // namespace lormika
