#include "lormika/config.hpp"

#include <cstdlib>
#include <fstream>

#include "lormika/error.hpp"

namespace lormika {

void RunConfig::validate() const {
    explain.validate();
    benchmark.validate();
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorCode::invalid_config, "test_fraction must lie strictly between 0 and 1");
    if (builtin.tree.max_depth < 1) throw Error(ErrorCode::invalid_config, "tree max_depth must be at least 1");
    if (builtin.logistic.iterations < 1) throw Error(ErrorCode::invalid_config, "logistic iterations must be at least 1");
    if (!(builtin.logistic.learning_rate > 0.0))
        throw Error(ErrorCode::invalid_config, "logistic learning_rate must be positive");
}

nlohmann::json RunConfig::to_json() const {
    return {{"data", data},
            {"target", target},
            {"schema", schema},
            {"model", model},
            {"out", out},
            {"explain", explain.to_json()},
            {"builtin",
             {{"tree_max_depth", builtin.tree.max_depth},
              {"tree_min_samples_split", builtin.tree.min_samples_split},
              {"logistic_iterations", builtin.logistic.iterations},
              {"logistic_learning_rate", builtin.logistic.learning_rate},
              {"logistic_l2", builtin.logistic.l2}}},
            {"benchmark",
             {{"n_instances", benchmark.n_instances},
              {"n_repeats", benchmark.n_repeats},
              {"jobs", benchmark.jobs},
              {"seed", benchmark.seed}}},
            {"test_fraction", test_fraction}};
}

RunConfig RunConfig::from_json(const nlohmann::json& doc, RunConfig base) {
    if (!doc.is_object()) throw Error(ErrorCode::invalid_config, "config must be a JSON object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "data") {
                base.data = value.get<std::string>();
            } else if (key == "target") {
                base.target = value.get<std::string>();
            } else if (key == "schema") {
                base.schema = value.get<std::string>();
            } else if (key == "model") {
                base.model = value.get<std::string>();
            } else if (key == "out") {
                base.out = value.get<std::string>();
            } else if (key == "explain") {
                base.explain = ExplainConfig::from_json(value, base.explain);
            } else if (key == "builtin") {
                for (const auto& [k, v] : value.items()) {
                    if (k == "tree_max_depth") base.builtin.tree.max_depth = v.get<std::size_t>();
                    else if (k == "tree_min_samples_split") base.builtin.tree.min_samples_split = v.get<std::size_t>();
                    else if (k == "logistic_iterations") base.builtin.logistic.iterations = v.get<std::size_t>();
                    else if (k == "logistic_learning_rate") base.builtin.logistic.learning_rate = v.get<double>();
                    else if (k == "logistic_l2") base.builtin.logistic.l2 = v.get<double>();
                    else throw Error(ErrorCode::invalid_config, "unknown builtin setting '" + k + "'");
                }
            } else if (key == "benchmark") {
                for (const auto& [k, v] : value.items()) {
                    if (k == "n_instances") base.benchmark.n_instances = v.get<std::size_t>();
                    else if (k == "n_repeats") base.benchmark.n_repeats = v.get<std::size_t>();
                    else if (k == "jobs") base.benchmark.jobs = v.get<std::size_t>();
                    else if (k == "seed") base.benchmark.seed = v.get<std::uint64_t>();
                    else throw Error(ErrorCode::invalid_config, "unknown benchmark setting '" + k + "'");
                }
            } else if (key == "test_fraction") {
                base.test_fraction = value.get<double>();
            } else {
                throw Error(ErrorCode::invalid_config, "unknown setting '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_config, std::string("bad setting: ") + e.what());
    }
    return base;
}

RunConfig RunConfig::load(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_config, "cannot open config file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::invalid_config, "config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(doc, std::move(base));
}

std::string default_model_spec() {
    if (const char* cmd = std::getenv("LORMIKA_MODEL_CMD"); cmd != nullptr && *cmd != '\0')
        return std::string("cmd:") + cmd;
    return "builtin:logistic";
}

}  // namespace lormika
