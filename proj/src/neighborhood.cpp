#include "lormika/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lormika/error.hpp"
#include "lormika/json_io.hpp"
#include "lormika/random.hpp"

namespace lormika {

SimilarityParams SimilarityParams::defaults(std::size_t encoded_width) {
    SimilarityParams p;
    p.kernel_width = 0.75 * std::sqrt(static_cast<double>(std::max<std::size_t>(encoded_width, 1)));
    p.min_per_class = 40;
    p.max_per_class = 5 * p.min_per_class;
    return p;
}

void SimilarityParams::validate() const {
    if (!(kernel_width > 0.0) || !std::isfinite(kernel_width))
        throw Error(ErrorCode::non_positive_width, "kernel width must be positive");
    if (min_per_class < 1) throw Error(ErrorCode::invalid_config, "L must be at least 1");
    if (max_per_class < min_per_class) throw Error(ErrorCode::invalid_config, "M must be at least L");
}

void GenerationParams::validate() const {
    if (!(crossover_fraction >= 0.0 && crossover_fraction <= 1.0))
        throw Error(ErrorCode::invalid_fraction, "crossover fraction must lie in [0, 1]");
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::length_mismatch, fmt::format("vector lengths {} and {}", a.size(), b.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double similarity(std::span<const double> a, std::span<const double> b, double kernel_width) {
    if (!(kernel_width > 0.0)) throw Error(ErrorCode::non_positive_width, "kernel width must be positive");
    const double d = euclidean_distance(a, b);
    return std::exp(-(d * d) / (2.0 * kernel_width * kernel_width));
}

Selection select_neighbors(std::span<const EncodedInstance> train_encoded, const InstanceTable& train_raw,
                           const EncodedInstance& explained, const SimilarityParams& params, std::uint64_t seed) {
    params.validate();
    if (train_encoded.size() != train_raw.size())
        throw Error(ErrorCode::length_mismatch, "encoded and raw training sets differ in size");
    const auto& schema = train_raw.schema();

    struct Scored {
        std::size_t row;
        double sim;
    };
    std::vector<std::vector<Scored>> by_class(schema.num_classes());
    for (std::size_t r = 0; r < train_raw.size(); ++r) {
        const auto cls = class_of(schema, train_raw.row(r));
        if (!cls) continue;
        by_class[*cls].push_back({r, similarity(train_encoded[r], explained, params.kernel_width)});
    }
    if (std::all_of(by_class.begin(), by_class.end(), [](const auto& g) { return g.empty(); }))
        throw Error(ErrorCode::empty_training_set, "no labelled training rows");

    double cut = 1.0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& group = by_class[c];
        if (group.empty())
            throw Error(ErrorCode::empty_class, "class '" + schema.class_labels()[c] + "' has no training rows");
        std::sort(group.begin(), group.end(), [](const Scored& a, const Scored& b) {
            return a.sim != b.sim ? a.sim > b.sim : a.row < b.row;
        });
        const std::size_t lth = std::min(params.min_per_class, group.size()) - 1;
        cut = std::min(cut, group[lth].sim);
    }

    Rng rng(seed);
    Selection out;
    out.cut_point = cut;
    for (auto& group : by_class) {
        std::vector<Scored> eligible;
        for (const auto& s : group)
            if (s.sim >= cut) eligible.push_back(s);
        std::sort(eligible.begin(), eligible.end(), [](const Scored& a, const Scored& b) { return a.row < b.row; });
        if (eligible.size() > params.max_per_class) {
            // Partial Fisher-Yates: the first M slots become a uniform sample without replacement.
            for (std::size_t i = 0; i < params.max_per_class; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
                std::swap(eligible[i], eligible[j]);
            }
            eligible.resize(params.max_per_class);
        }
        for (const auto& s : eligible) out.selected.push_back({s.row, train_raw.row(s.row), s.sim});
    }
    std::sort(out.selected.begin(), out.selected.end(),
              [](const SelectedInstance& a, const SelectedInstance& b) { return a.row < b.row; });
    return out;
}

namespace {

double numeric_of(const Instance& inst, std::size_t column) {
    const auto* v = std::get_if<double>(&inst.values.at(column));
    if (v == nullptr) throw Error(ErrorCode::schema_mismatch, "parent has a missing numeric value");
    return *v;
}

Instance child_template(const DatasetSchema& schema, const Instance& closest) {
    Instance child = closest;
    child.values.at(schema.target_index()) = Missing{};
    return child;
}

}  // namespace

Instance crossover_child(const DatasetSchema& schema, const Instance& x, const Instance& y, double alpha,
                         const Instance& closest) {
    Instance child = child_template(schema, closest);
    for (std::size_t c : schema.feature_indices()) {
        if (!schema.column(c).is_numeric()) continue;
        const double xv = numeric_of(x, c);
        const double yv = numeric_of(y, c);
        child.values[c] = xv + (yv - xv) * alpha;
    }
    return child;
}

Instance mutation_child(const DatasetSchema& schema, const Instance& x, const Instance& y, const Instance& z,
                        double sigma, const Instance& closest) {
    Instance child = child_template(schema, closest);
    for (std::size_t c : schema.feature_indices()) {
        if (!schema.column(c).is_numeric()) continue;
        child.values[c] = numeric_of(x, c) + (numeric_of(y, c) - numeric_of(z, c)) * sigma;
    }
    return child;
}

std::vector<Instance> generate_instances(std::span<const Instance> parents, const EncodedInstance& explained,
                                         const PreprocessorModel& model, const GenerationParams& params) {
    params.validate();
    if (params.n_generated == 0) return {};
    if (parents.size() < 3)
        throw Error(ErrorCode::too_few_parents, fmt::format("need at least 3 parents, have {}", parents.size()));

    const auto& schema = model.schema();
    std::vector<Instance> imputed;
    std::vector<double> distance;
    imputed.reserve(parents.size());
    distance.reserve(parents.size());
    for (const auto& p : parents) {
        imputed.push_back(model.impute(p));
        distance.push_back(euclidean_distance(model.encode(p), explained));
    }
    // Ties go to the earliest parent in draw order.
    auto closest = [&](std::initializer_list<std::size_t> draw) {
        std::size_t best = *draw.begin();
        for (std::size_t i : draw)
            if (distance[i] < distance[best]) best = i;
        return best;
    };

    Rng rng(params.seed);
    const std::size_t n = parents.size();
    auto distinct_from = [&](std::initializer_list<std::size_t> taken) {
        // Draw from the n - |taken| remaining indices, skipping taken ones in ascending order.
        std::vector<std::size_t> sorted(taken);
        std::sort(sorted.begin(), sorted.end());
        auto idx = static_cast<std::size_t>(rng.below(n - sorted.size()));
        for (std::size_t t : sorted)
            if (idx >= t) ++idx;
        return idx;
    };

    const auto n_cross =
        static_cast<std::size_t>(std::floor(params.crossover_fraction * static_cast<double>(params.n_generated)));
    std::vector<Instance> out;
    out.reserve(params.n_generated);
    for (std::size_t g = 0; g < n_cross; ++g) {
        const auto x = static_cast<std::size_t>(rng.below(n));
        const auto y = distinct_from({x});
        const double alpha = rng.uniform01();
        out.push_back(crossover_child(schema, imputed[x], imputed[y], alpha, parents[closest({x, y})]));
    }
    for (std::size_t g = n_cross; g < params.n_generated; ++g) {
        const auto x = static_cast<std::size_t>(rng.below(n));
        const auto y = distinct_from({x});
        const auto z = distinct_from({x, y});
        const double sigma = rng.uniform(0.5, 1.0);
        out.push_back(mutation_child(schema, imputed[x], imputed[y], imputed[z], sigma, parents[closest({x, y, z})]));
    }
    return out;
}

std::vector<Instance> Neighborhood::combined() const {
    std::vector<Instance> out;
    out.reserve(selected.size() + generated.size());
    for (const auto& s : selected) out.push_back(s.instance);
    out.insert(out.end(), generated.begin(), generated.end());
    return out;
}

nlohmann::json Neighborhood::to_json(const DatasetSchema& schema) const {
    nlohmann::json doc;
    doc["seed"] = seed;
    doc["cut_point"] = cut_point;
    doc["explained"] = instance_to_object(schema, explained);
    auto& sel = doc["selected"] = nlohmann::json::array();
    for (const auto& s : selected)
        sel.push_back({{"row", s.row}, {"similarity", s.similarity}, {"instance", instance_to_object(schema, s.instance)}});
    auto& gen = doc["generated"] = nlohmann::json::array();
    for (const auto& g : generated) gen.push_back(instance_to_object(schema, g));
    return doc;
}

Neighborhood build_neighborhood(const PreprocessorModel& model, const InstanceTable& train,
                                std::span<const EncodedInstance> train_encoded, const Instance& explained,
                                const SimilarityParams& sim, const GenerationParams& gen) {
    const auto explained_encoded = model.encode(explained);
    auto selection = select_neighbors(train_encoded, train, explained_encoded, sim, derive_seed(gen.seed, 1));

    std::vector<Instance> parents;
    parents.reserve(selection.selected.size());
    for (const auto& s : selection.selected) parents.push_back(s.instance);
    GenerationParams child_params = gen;
    child_params.seed = derive_seed(gen.seed, 2);

    Neighborhood nb;
    nb.generated = generate_instances(parents, explained_encoded, model, child_params);
    nb.selected = std::move(selection.selected);
    nb.explained = explained;
    nb.cut_point = selection.cut_point;
    nb.seed = gen.seed;
    return nb;
}

}  // namespace lormika
