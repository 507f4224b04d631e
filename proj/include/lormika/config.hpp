#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "lormika/blackbox.hpp"
#include "lormika/eval.hpp"
#include "lormika/explain.hpp"

namespace lormika {

/// Every tunable of a command-line run. Flags override a --config file,
/// which overrides these defaults.
struct RunConfig {
    std::string data;
    std::string target;
    /// Schema JSON; inferred from the data when empty.
    std::string schema;
    /// Endpoint spec as accepted by open_endpoint; empty picks LORMIKA_MODEL_CMD or builtin:logistic.
    std::string model;
    std::string out;
    ExplainConfig explain;
    BuiltinParams builtin;
    BenchmarkConfig benchmark;
    double test_fraction = 0.2;

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Keys absent from `doc` keep the values already in `base`. Unknown keys are rejected.
    static RunConfig from_json(const nlohmann::json& doc, RunConfig base);
    static RunConfig load(const std::string& path, RunConfig base);
};

/// Endpoint spec to use when none is configured.
std::string default_model_spec();

}  // namespace lormika
