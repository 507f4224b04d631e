#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "lormika/blackbox.hpp"
#include "lormika/error.hpp"
#include "lormika/json_io.hpp"

namespace lormika {

namespace {

struct LabelledSet {
    std::vector<EncodedInstance> x;
    std::vector<std::size_t> y;
};

LabelledSet labelled_rows(const PreprocessorModel& prep, const InstanceTable& train) {
    LabelledSet out;
    std::vector<bool> seen(train.schema().num_classes(), false);
    for (const auto& row : train.rows()) {
        const auto cls = class_of(train.schema(), row);
        if (!cls) continue;
        out.x.push_back(prep.encode(row));
        out.y.push_back(*cls);
        seen[*cls] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2)
        throw Error(ErrorCode::single_class_training, "training data must contain at least two classes");
    return out;
}

InstanceTable labelled_only(const InstanceTable& train) {
    if (train.empty()) throw Error(ErrorCode::empty_table, "cannot train on an empty table");
    std::vector<Instance> rows;
    for (const auto& r : train.rows())
        if (class_of(train.schema(), r)) rows.push_back(r);
    if (rows.empty()) throw Error(ErrorCode::single_class_training, "no labelled rows");
    return InstanceTable(train.schema(), std::move(rows));
}

double gini(std::span<const std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

std::size_t majority(std::span<const std::size_t> counts) {
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class TreeBuilder {
public:
    TreeBuilder(const LabelledSet& data, std::size_t n_classes, const TreeParams& params)
        : data_(data), n_classes_(n_classes), params_(params) {}

    std::vector<DecisionTreeModel::Node> build() {
        std::vector<std::size_t> rows(data_.y.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        grow(rows, 0);
        return std::move(nodes_);
    }

private:
    std::size_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
        std::vector<std::size_t> counts(n_classes_, 0);
        for (auto r : rows) ++counts[data_.y[r]];
        const std::size_t id = nodes_.size();
        nodes_.push_back({});
        nodes_[id].label = majority(counts);

        const double impurity = gini(counts, rows.size());
        if (depth >= params_.max_depth || rows.size() < params_.min_samples_split || impurity <= 0.0) return id;

        const std::size_t n_features = data_.x.front().size();
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> order = rows;
        for (std::size_t f = 0; f < n_features; ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return data_.x[a][f] < data_.x[b][f]; });
            std::vector<std::size_t> left(n_classes_, 0);
            std::vector<std::size_t> right = counts;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                ++left[data_.y[order[i]]];
                --right[data_.y[order[i]]];
                const double v = data_.x[order[i]][f];
                const double next = data_.x[order[i + 1]][f];
                if (!(v < next)) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = order.size() - nl;
                const double score = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                                     static_cast<double>(order.size());
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = v + (next - v) / 2.0;
                }
            }
        }
        if (best_feature < 0 || best_score > impurity) return id;

        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (auto r : rows)
            (data_.x[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        nodes_[id].feature = best_feature;
        nodes_[id].threshold = best_threshold;
        const auto l = grow(left_rows, depth + 1);
        const auto r = grow(right_rows, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const LabelledSet& data_;
    std::size_t n_classes_;
    TreeParams params_;
    std::vector<DecisionTreeModel::Node> nodes_;
};

std::size_t argmax_score(const std::vector<std::vector<double>>& weights, const EncodedInstance& x) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < weights.size(); ++c) {
        double z = weights[c][0];
        for (std::size_t j = 0; j < x.size(); ++j) z += weights[c][j + 1] * x[j];
        if (z > best_score) {
            best_score = z;
            best = c;
        }
    }
    return best;
}

}  // namespace

std::string_view to_string(EndpointKind kind) noexcept {
    switch (kind) {
        case EndpointKind::builtin_tree: return "builtin_tree";
        case EndpointKind::builtin_logistic: return "builtin_logistic";
        case EndpointKind::external_process: return "external_process";
        case EndpointKind::external_http: return "external_http";
    }
    return "unknown";
}

nlohmann::json ModelEndpoint::describe() const { return {{"kind", to_string(kind())}}; }

std::vector<Prediction> predict_batch(ModelEndpoint& endpoint, std::span<const Instance> instances) {
    if (instances.empty()) return {};
    auto out = endpoint.predict(instances);
    if (out.size() != instances.size())
        throw Error(ErrorCode::prediction_count_mismatch,
                    fmt::format("{} predictions for {} instances", out.size(), instances.size()));
    for (const auto& p : out)
        if (p.class_index >= endpoint.schema().num_classes())
            throw Error(ErrorCode::protocol_error, "prediction outside the class range");
    return out;
}

// Decision tree -------------------------------------------------------------

DecisionTreeModel::DecisionTreeModel(PreprocessorModel preprocessor, std::vector<Node> nodes)
    : preprocessor_(std::move(preprocessor)), nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error(ErrorCode::schema_mismatch, "tree has no nodes");
}

DecisionTreeModel DecisionTreeModel::train(const InstanceTable& train, const TreeParams& params) {
    const auto labelled = labelled_only(train);
    auto prep = fit(labelled);
    const auto data = labelled_rows(prep, labelled);
    TreeBuilder builder(data, train.schema().num_classes(), params);
    return DecisionTreeModel(std::move(prep), builder.build());
}

Prediction DecisionTreeModel::predict_one(const Instance& instance) const {
    const auto x = preprocessor_.encode(instance);
    std::size_t node = 0;
    while (nodes_[node].feature >= 0) {
        const auto& n = nodes_[node];
        node = x.at(static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right;
    }
    return {nodes_[node].label};
}

std::vector<Prediction> DecisionTreeModel::predict(std::span<const Instance> instances) {
    std::vector<Prediction> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(predict_one(inst));
    return out;
}

std::size_t DecisionTreeModel::depth() const {
    std::function<std::size_t(std::size_t)> walk = [&](std::size_t id) -> std::size_t {
        const auto& n = nodes_[id];
        if (n.feature < 0) return 0;
        return 1 + std::max(walk(n.left), walk(n.right));
    };
    return walk(0);
}

nlohmann::json DecisionTreeModel::describe() const {
    return {{"kind", to_string(kind())}, {"nodes", nodes_.size()}, {"depth", depth()}};
}

nlohmann::json DecisionTreeModel::to_json() const {
    auto nodes = nlohmann::json::array();
    for (const auto& n : nodes_)
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                         {"label", n.label}});
    return {{"kind", to_string(kind())},
            {"schema", schema_to_json(schema())},
            {"preprocessor", preprocessor_.to_json()},
            {"nodes", std::move(nodes)}};
}

DecisionTreeModel DecisionTreeModel::from_json(const nlohmann::json& doc) {
    try {
        auto schema = schema_from_json(doc.at("schema"));
        auto prep = PreprocessorModel::from_json(doc.at("preprocessor"), schema);
        std::vector<Node> nodes;
        for (const auto& n : doc.at("nodes")) {
            Node node;
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<std::size_t>();
            node.right = n.at("right").get<std::size_t>();
            node.label = n.at("label").get<std::size_t>();
            nodes.push_back(node);
        }
        for (const auto& n : nodes)
            if (n.feature >= 0 && (n.left >= nodes.size() || n.right >= nodes.size() ||
                                   static_cast<std::size_t>(n.feature) >= prep.encoded_width()))
                throw Error(ErrorCode::schema_mismatch, "tree node references out of range");
        return DecisionTreeModel(std::move(prep), std::move(nodes));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_mismatch, std::string("malformed tree document: ") + e.what());
    }
}

// Logistic regression -------------------------------------------------------

LogisticModel::LogisticModel(PreprocessorModel preprocessor, std::vector<std::vector<double>> weights)
    : preprocessor_(std::move(preprocessor)), weights_(std::move(weights)) {
    if (weights_.size() != preprocessor_.schema().num_classes())
        throw Error(ErrorCode::schema_mismatch, "one weight vector per class required");
    for (const auto& w : weights_)
        if (w.size() != preprocessor_.encoded_width() + 1)
            throw Error(ErrorCode::schema_mismatch, "weight vector width mismatch");
}

LogisticModel LogisticModel::train(const InstanceTable& train, const LogisticParams& params) {
    const auto labelled = labelled_only(train);
    auto prep = fit(labelled);
    const auto data = labelled_rows(prep, labelled);
    const std::size_t n = data.y.size();
    const std::size_t d = prep.encoded_width();
    const std::size_t n_classes = train.schema().num_classes();

    std::vector<std::vector<double>> weights(n_classes, std::vector<double>(d + 1, 0.0));
    std::vector<double> grad(d + 1);
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& w = weights[c];
        for (std::size_t it = 0; it < params.iterations; ++it) {
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& x = data.x[i];
                double z = w[0];
                for (std::size_t j = 0; j < d; ++j) z += w[j + 1] * x[j];
                const double p = 1.0 / (1.0 + std::exp(-z));
                const double err = p - (data.y[i] == c ? 1.0 : 0.0);
                grad[0] += err;
                for (std::size_t j = 0; j < d; ++j) grad[j + 1] += err * x[j];
            }
            w[0] -= params.learning_rate * grad[0] / static_cast<double>(n);
            for (std::size_t j = 1; j <= d; ++j)
                w[j] -= params.learning_rate * (grad[j] / static_cast<double>(n) + params.l2 * w[j]);
        }
    }
    return LogisticModel(std::move(prep), std::move(weights));
}

Prediction LogisticModel::predict_one(const Instance& instance) const {
    return {argmax_score(weights_, preprocessor_.encode(instance))};
}

std::vector<Prediction> LogisticModel::predict(std::span<const Instance> instances) {
    std::vector<Prediction> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(predict_one(inst));
    return out;
}

nlohmann::json LogisticModel::describe() const {
    return {{"kind", to_string(kind())}, {"classes", weights_.size()}, {"features", preprocessor_.encoded_width()}};
}

nlohmann::json LogisticModel::to_json() const {
    return {{"kind", to_string(kind())},
            {"schema", schema_to_json(schema())},
            {"preprocessor", preprocessor_.to_json()},
            {"weights", weights_}};
}

LogisticModel LogisticModel::from_json(const nlohmann::json& doc) {
    try {
        auto schema = schema_from_json(doc.at("schema"));
        auto prep = PreprocessorModel::from_json(doc.at("preprocessor"), schema);
        return LogisticModel(std::move(prep), doc.at("weights").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_mismatch, std::string("malformed logistic document: ") + e.what());
    }
}

std::unique_ptr<ModelEndpoint> train_builtin(EndpointKind kind, const InstanceTable& train,
                                             const BuiltinParams& params) {
    switch (kind) {
        case EndpointKind::builtin_tree:
            return std::make_unique<DecisionTreeModel>(DecisionTreeModel::train(train, params.tree));
        case EndpointKind::builtin_logistic:
            return std::make_unique<LogisticModel>(LogisticModel::train(train, params.logistic));
        default:
            throw Error(ErrorCode::invalid_config, "not a builtin model kind");
    }
}

std::unique_ptr<ModelEndpoint> load_builtin(const nlohmann::json& doc) {
    const auto kind = doc.value("kind", std::string{});
    if (kind == "builtin_tree") return std::make_unique<DecisionTreeModel>(DecisionTreeModel::from_json(doc));
    if (kind == "builtin_logistic") return std::make_unique<LogisticModel>(LogisticModel::from_json(doc));
    throw Error(ErrorCode::invalid_config, "unknown saved model kind '" + kind + "'");
}

}  // namespace lormika
