#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lormika/data.hpp"
#include "lormika/preprocess.hpp"

namespace lormika {

enum class EndpointKind { builtin_tree, builtin_logistic, external_process, external_http };

std::string_view to_string(EndpointKind kind) noexcept;

struct Prediction {
    std::size_t class_index = 0;
    friend bool operator==(Prediction, Prediction) = default;
};

/// Batch classifier behind a strict black-box boundary: raw instances in,
/// hard class labels out.
class ModelEndpoint {
public:
    virtual ~ModelEndpoint() = default;

    [[nodiscard]] virtual EndpointKind kind() const noexcept = 0;
    [[nodiscard]] virtual const DatasetSchema& schema() const noexcept = 0;
    /// One prediction per instance, in order. Builtin endpoints are safe to
    /// call concurrently; external ones serialize internally.
    [[nodiscard]] virtual std::vector<Prediction> predict(std::span<const Instance> instances) = 0;
    /// Short description for provenance records.
    [[nodiscard]] virtual nlohmann::json describe() const;
};

/// Calls the endpoint and checks the one-prediction-per-instance contract.
std::vector<Prediction> predict_batch(ModelEndpoint& endpoint, std::span<const Instance> instances);

struct TreeParams {
    std::size_t max_depth = 8;
    std::size_t min_samples_split = 2;
};

struct LogisticParams {
    std::size_t iterations = 500;
    double learning_rate = 0.5;
    double l2 = 1e-4;
};

struct BuiltinParams {
    TreeParams tree;
    LogisticParams logistic;
};

/// CART tree with gini splits over the encoded feature space.
class DecisionTreeModel final : public ModelEndpoint {
public:
    struct Node {
        // Leaf when feature < 0.
        int feature = -1;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        std::size_t label = 0;
        friend bool operator==(const Node&, const Node&) = default;
    };

    static DecisionTreeModel train(const InstanceTable& train, const TreeParams& params);
    DecisionTreeModel(PreprocessorModel preprocessor, std::vector<Node> nodes);

    [[nodiscard]] EndpointKind kind() const noexcept override { return EndpointKind::builtin_tree; }
    [[nodiscard]] const DatasetSchema& schema() const noexcept override { return preprocessor_.schema(); }
    [[nodiscard]] std::vector<Prediction> predict(std::span<const Instance> instances) override;
    [[nodiscard]] Prediction predict_one(const Instance& instance) const;
    [[nodiscard]] std::size_t depth() const;
    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] nlohmann::json describe() const override;

    [[nodiscard]] nlohmann::json to_json() const;
    static DecisionTreeModel from_json(const nlohmann::json& doc);

private:
    PreprocessorModel preprocessor_;
    std::vector<Node> nodes_;
};

/// One-vs-rest logistic regression fitted by batch gradient descent on encoded features.
class LogisticModel final : public ModelEndpoint {
public:
    static LogisticModel train(const InstanceTable& train, const LogisticParams& params);
    LogisticModel(PreprocessorModel preprocessor, std::vector<std::vector<double>> weights);

    [[nodiscard]] EndpointKind kind() const noexcept override { return EndpointKind::builtin_logistic; }
    [[nodiscard]] const DatasetSchema& schema() const noexcept override { return preprocessor_.schema(); }
    [[nodiscard]] std::vector<Prediction> predict(std::span<const Instance> instances) override;
    [[nodiscard]] Prediction predict_one(const Instance& instance) const;
    [[nodiscard]] nlohmann::json describe() const override;

    [[nodiscard]] nlohmann::json to_json() const;
    static LogisticModel from_json(const nlohmann::json& doc);

    /// Per class: bias followed by one weight per encoded feature.
    [[nodiscard]] const std::vector<std::vector<double>>& weights() const noexcept { return weights_; }

private:
    PreprocessorModel preprocessor_;
    std::vector<std::vector<double>> weights_;
};

std::unique_ptr<ModelEndpoint> train_builtin(EndpointKind kind, const InstanceTable& train,
                                             const BuiltinParams& params = {});
/// Restores a model written by DecisionTreeModel/LogisticModel::to_json.
std::unique_ptr<ModelEndpoint> load_builtin(const nlohmann::json& doc);

// Wire protocol ------------------------------------------------------------

struct RemoteSchema {
    std::vector<std::string> columns;
    std::vector<std::string> classes;
};

nlohmann::json make_schema_request();
nlohmann::json make_predict_request(const DatasetSchema& schema, std::int64_t id, std::span<const Instance> instances);
RemoteSchema parse_schema_response(const nlohmann::json& doc);
/// Maps labels onto `schema` class indices; checks id, error envelope and count.
std::vector<Prediction> parse_predict_response(const DatasetSchema& schema, const nlohmann::json& doc,
                                               std::int64_t id, std::size_t expected);
/// Handshake columns must equal the feature columns; classes must be declared.
void check_remote_schema(const DatasetSchema& schema, const RemoteSchema& remote);

struct ExternalOptions {
    std::chrono::milliseconds handshake_timeout{30'000};
    std::chrono::milliseconds request_timeout{600'000};
};

/// Child process speaking newline-delimited JSON over stdin/stdout.
class ProcessEndpoint final : public ModelEndpoint {
public:
    ProcessEndpoint(std::string command, DatasetSchema schema, ExternalOptions options = {});
    ~ProcessEndpoint() override;
    ProcessEndpoint(const ProcessEndpoint&) = delete;
    ProcessEndpoint& operator=(const ProcessEndpoint&) = delete;

    [[nodiscard]] EndpointKind kind() const noexcept override { return EndpointKind::external_process; }
    [[nodiscard]] const DatasetSchema& schema() const noexcept override { return schema_; }
    [[nodiscard]] std::vector<Prediction> predict(std::span<const Instance> instances) override;
    [[nodiscard]] nlohmann::json describe() const override;
    [[nodiscard]] const RemoteSchema& remote_schema() const noexcept { return remote_; }

private:
    nlohmann::json round_trip(const nlohmann::json& request, std::chrono::milliseconds timeout);
    void shutdown() noexcept;

    std::string command_;
    DatasetSchema schema_;
    ExternalOptions options_;
    RemoteSchema remote_;
    std::mutex mutex_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::int64_t next_id_ = 1;
};

/// Model server answering POST /predict with the same JSON envelopes.
class HttpEndpoint final : public ModelEndpoint {
public:
    HttpEndpoint(std::string url, DatasetSchema schema, ExternalOptions options = {});

    [[nodiscard]] EndpointKind kind() const noexcept override { return EndpointKind::external_http; }
    [[nodiscard]] const DatasetSchema& schema() const noexcept override { return schema_; }
    [[nodiscard]] std::vector<Prediction> predict(std::span<const Instance> instances) override;
    [[nodiscard]] nlohmann::json describe() const override;
    [[nodiscard]] const RemoteSchema& remote_schema() const noexcept { return remote_; }

private:
    nlohmann::json post(const nlohmann::json& request);

    std::string url_;
    DatasetSchema schema_;
    ExternalOptions options_;
    RemoteSchema remote_;
    std::mutex mutex_;
    std::int64_t next_id_ = 1;
};

/// Opens an endpoint from a spec string: "builtin:logistic", "builtin:tree",
/// "cmd:<shell command>", "http://host:port" or "model:<saved builtin json>".
std::unique_ptr<ModelEndpoint> open_endpoint(const std::string& spec, const InstanceTable& train,
                                             const BuiltinParams& params = {});

}  // namespace lormika
