#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <httplib.h>

#include "lormika/blackbox.hpp"
#include "lormika/error.hpp"
#include "lormika/json_io.hpp"

namespace lormika {

nlohmann::json make_schema_request() { return {{"op", "schema"}}; }

nlohmann::json make_predict_request(const DatasetSchema& schema, std::int64_t id, std::span<const Instance> instances) {
    auto rows = nlohmann::json::array();
    for (const auto& inst : instances) rows.push_back(feature_row(schema, inst));
    return {{"id", id}, {"instances", std::move(rows)}};
}

RemoteSchema parse_schema_response(const nlohmann::json& doc) {
    if (doc.contains("error")) throw Error(ErrorCode::protocol_error, "handshake refused: " + doc["error"].dump());
    try {
        return {doc.at("columns").get<std::vector<std::string>>(), doc.at("classes").get<std::vector<std::string>>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::protocol_error, std::string("malformed handshake response: ") + e.what());
    }
}

void check_remote_schema(const DatasetSchema& schema, const RemoteSchema& remote) {
    std::vector<std::string> features;
    for (auto c : schema.feature_indices()) features.push_back(schema.column(c).name);
    if (remote.columns != features)
        throw Error(ErrorCode::protocol_error, "model columns do not match the dataset feature columns");
    for (const auto& cls : remote.classes)
        if (!schema.column(schema.target_index()).category_index(cls))
            throw Error(ErrorCode::protocol_error, "model class '" + cls + "' is not a dataset class");
}

std::vector<Prediction> parse_predict_response(const DatasetSchema& schema, const nlohmann::json& doc,
                                               std::int64_t id, std::size_t expected) {
    if (!doc.is_object()) throw Error(ErrorCode::protocol_error, "response is not a JSON object");
    if (doc.contains("error")) throw Error(ErrorCode::protocol_error, "model error: " + doc["error"].dump());
    const auto rid = doc.find("id");
    if (rid == doc.end() || !rid->is_number_integer() || rid->get<std::int64_t>() != id)
        throw Error(ErrorCode::protocol_error, fmt::format("response id does not match request id {}", id));
    const auto preds = doc.find("predictions");
    if (preds == doc.end() || !preds->is_array()) throw Error(ErrorCode::protocol_error, "missing predictions array");
    if (preds->size() != expected)
        throw Error(ErrorCode::prediction_count_mismatch,
                    fmt::format("{} predictions for {} instances", preds->size(), expected));
    const auto& target = schema.column(schema.target_index());
    std::vector<Prediction> out;
    out.reserve(expected);
    for (const auto& label : *preds) {
        const auto text = label.is_string() ? label.get<std::string>() : label.dump();
        const auto idx = target.category_index(text);
        if (!idx) throw Error(ErrorCode::protocol_error, "unknown class label '" + text + "'");
        out.push_back({*idx});
    }
    return out;
}

namespace {

nlohmann::json parse_line(const std::string& line) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::protocol_error, std::string("malformed JSON from model: ") + e.what());
    }
}

void ignore_sigpipe() {
    static const bool once = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)once;
}

}  // namespace

// Child process ---------------------------------------------------------------

ProcessEndpoint::ProcessEndpoint(std::string command, DatasetSchema schema, ExternalOptions options)
    : command_(std::move(command)), schema_(std::move(schema)), options_(options) {
    ignore_sigpipe();
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw Error(ErrorCode::endpoint_unreachable, "pipe() failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw Error(ErrorCode::endpoint_unreachable, "pipe() failed");
    }
    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        throw Error(ErrorCode::endpoint_unreachable, "fork() failed");
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    fcntl(from_child_, F_SETFD, FD_CLOEXEC);

    try {
        remote_ = parse_schema_response(round_trip(make_schema_request(), options_.handshake_timeout));
        check_remote_schema(schema_, remote_);
    } catch (...) {
        shutdown();
        throw;
    }
}

ProcessEndpoint::~ProcessEndpoint() { shutdown(); }

void ProcessEndpoint::shutdown() noexcept {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        int status = 0;
        for (int i = 0; i < 100; ++i) {
            if (waitpid(pid_, &status, WNOHANG) != 0) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        kill(pid_, SIGTERM);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

nlohmann::json ProcessEndpoint::round_trip(const nlohmann::json& request, std::chrono::milliseconds timeout) {
    if (to_child_ < 0) throw Error(ErrorCode::endpoint_unreachable, "model process is not running");
    const std::string line = request.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = write(to_child_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::endpoint_unreachable, std::string("write to model failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string reply = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (reply.find_first_not_of(" \t\r") == std::string::npos) continue;
            return parse_line(reply);
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw Error(ErrorCode::endpoint_unreachable, "timed out waiting for the model");
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1'000'000'000LL)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::endpoint_unreachable, "poll() failed");
        }
        if (ready == 0) continue;
        char chunk[65536];
        const auto n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::endpoint_unreachable, "read from model failed");
        }
        if (n == 0) throw Error(ErrorCode::endpoint_unreachable, "model process closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::vector<Prediction> ProcessEndpoint::predict(std::span<const Instance> instances) {
    std::lock_guard lock(mutex_);
    const auto id = next_id_++;
    const auto reply = round_trip(make_predict_request(schema_, id, instances), options_.request_timeout);
    return parse_predict_response(schema_, reply, id, instances.size());
}

nlohmann::json ProcessEndpoint::describe() const {
    return {{"kind", to_string(kind())}, {"command", command_}, {"classes", remote_.classes}};
}

// HTTP ------------------------------------------------------------------------

HttpEndpoint::HttpEndpoint(std::string url, DatasetSchema schema, ExternalOptions options)
    : url_(std::move(url)), schema_(std::move(schema)), options_(options) {
    remote_ = parse_schema_response(post(make_schema_request()));
    check_remote_schema(schema_, remote_);
}

nlohmann::json HttpEndpoint::post(const nlohmann::json& request) {
    httplib::Client client(url_);
    const auto secs = [](std::chrono::milliseconds ms) { return static_cast<time_t>(std::max<long long>(1, ms.count() / 1000)); };
    client.set_connection_timeout(secs(options_.handshake_timeout), 0);
    client.set_read_timeout(secs(options_.request_timeout), 0);
    client.set_write_timeout(secs(options_.request_timeout), 0);
    auto res = client.Post("/predict", request.dump(), "application/json");
    if (!res) throw Error(ErrorCode::endpoint_unreachable, "cannot reach " + url_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200) {
        std::string detail = res->body;
        throw Error(ErrorCode::protocol_error, fmt::format("HTTP {} from model: {}", res->status, detail));
    }
    return parse_line(res->body);
}

std::vector<Prediction> HttpEndpoint::predict(std::span<const Instance> instances) {
    std::lock_guard lock(mutex_);
    const auto id = next_id_++;
    return parse_predict_response(schema_, post(make_predict_request(schema_, id, instances)), id, instances.size());
}

nlohmann::json HttpEndpoint::describe() const {
    return {{"kind", to_string(kind())}, {"url", url_}, {"classes", remote_.classes}};
}

// Endpoint specs ------------------------------------------------------------

std::unique_ptr<ModelEndpoint> open_endpoint(const std::string& spec, const InstanceTable& train,
                                             const BuiltinParams& params) {
    if (spec == "builtin:logistic") return train_builtin(EndpointKind::builtin_logistic, train, params);
    if (spec == "builtin:tree") return train_builtin(EndpointKind::builtin_tree, train, params);
    if (spec.rfind("cmd:", 0) == 0) return std::make_unique<ProcessEndpoint>(spec.substr(4), train.schema());
    if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0)
        return std::make_unique<HttpEndpoint>(spec, train.schema());
    if (spec.rfind("model:", 0) == 0) {
        std::ifstream in(spec.substr(6));
        if (!in) throw Error(ErrorCode::io_error, "cannot open saved model " + spec.substr(6));
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::invalid_config, std::string("saved model is not JSON: ") + e.what());
        }
        auto model = load_builtin(doc);
        if (!(model->schema() == train.schema()))
            throw Error(ErrorCode::schema_mismatch, "saved model schema differs from the dataset schema");
        return model;
    }
    throw Error(ErrorCode::invalid_config, "unrecognised model spec '" + spec + "'");
}

}  // namespace lormika
