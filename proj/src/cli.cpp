#include "lormika/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lormika/blackbox.hpp"
#include "lormika/config.hpp"
#include "lormika/error.hpp"
#include "lormika/eval.hpp"
#include "lormika/explain.hpp"
#include "lormika/json_io.hpp"
#include "lormika/miner.hpp"

namespace lormika {
namespace {

/// Flag values as parsed; unset ones leave the config untouched.
struct Flags {
    std::string config;
    std::optional<std::string> data, target, schema, model, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k, max_len, min_coverage, min_per_class, max_per_class, n_generated;
    std::optional<double> alpha, m, kernel_width, crossover_fraction;
    std::vector<std::string> objectives;
    std::string format;

    // explain
    std::optional<std::size_t> row;
    std::string instance_json;
    std::string dump_neighborhood;
    // evaluate
    std::optional<std::size_t> instances, repeats, jobs;
    std::optional<double> test_fraction;
    // serve-check
    std::size_t probe = 5;
};

void add_common(CLI::App& app, Flags& f) {
    app.add_option("--config", f.config, "JSON config file; flags override its values");
    app.add_option("--data", f.data, "Labelled CSV file");
    app.add_option("--target", f.target, "Target column name");
    app.add_option("--schema", f.schema, "Schema JSON (inferred from the data when omitted)");
    app.add_option("--out", f.out, "Write the result here instead of stdout");
}

void add_mining(CLI::App& app, Flags& f) {
    app.add_option("--k", f.k, "Rules per objective and class");
    app.add_option("--objectives", f.objectives, "Objectives to mine (support coverage confidence lift leverage)")
        ->delimiter(',');
    app.add_option("--max-len", f.max_len, "Longest antecedent");
    app.add_option("--min-coverage", f.min_coverage, "Minimum antecedent match count");
    app.add_option("--alpha", f.alpha, "Fisher exact test significance level");
    app.add_option("--m", f.m, "m-estimate weight");
    app.add_option("--seed", f.seed, "Random seed");
}

void add_neighborhood(CLI::App& app, Flags& f) {
    app.add_option("--model", f.model, "builtin:logistic, builtin:tree, cmd:<command>, http://host:port or model:<file>");
    app.add_option("--min-per-class", f.min_per_class, "Neighbours guaranteed per class");
    app.add_option("--max-per-class", f.max_per_class, "Cap on neighbours per class");
    app.add_option("--kernel-width", f.kernel_width, "Similarity kernel width");
    app.add_option("--n-generated", f.n_generated, "Synthetic instances per explanation");
    app.add_option("--crossover-fraction", f.crossover_fraction, "Share of synthetic instances built by crossover");
}

RunConfig resolve(const Flags& f) {
    RunConfig cfg;
    if (!f.config.empty()) cfg = RunConfig::load(f.config, cfg);
    if (f.data) cfg.data = *f.data;
    if (f.target) cfg.target = *f.target;
    if (f.schema) cfg.schema = *f.schema;
    if (f.model) cfg.model = *f.model;
    if (f.out) cfg.out = *f.out;
    if (f.seed) cfg.explain.seed = cfg.benchmark.seed = *f.seed;
    if (f.k) cfg.explain.mining.k = *f.k;
    if (f.max_len) cfg.explain.mining.max_antecedent_len = *f.max_len;
    if (f.min_coverage) cfg.explain.mining.min_coverage_count = *f.min_coverage;
    if (f.alpha) cfg.explain.mining.fisher_alpha = *f.alpha;
    if (f.m) cfg.explain.mining.m = *f.m;
    if (f.min_per_class) cfg.explain.min_per_class = *f.min_per_class;
    if (f.max_per_class) cfg.explain.max_per_class = *f.max_per_class;
    if (f.kernel_width) cfg.explain.kernel_width = *f.kernel_width;
    if (f.n_generated) cfg.explain.n_generated = *f.n_generated;
    if (f.crossover_fraction) cfg.explain.crossover_fraction = *f.crossover_fraction;
    if (!f.objectives.empty()) {
        cfg.explain.objectives.clear();
        for (const auto& name : f.objectives) {
            if (name == "all") {
                cfg.explain.objectives.assign(kAllObjectives.begin(), kAllObjectives.end());
                break;
            }
            const auto o = parse_objective(name);
            if (!o) throw Error(ErrorCode::invalid_config, "unknown objective '" + name + "'");
            cfg.explain.objectives.push_back(*o);
        }
    }
    if (f.instances) cfg.benchmark.n_instances = *f.instances;
    if (f.repeats) cfg.benchmark.n_repeats = *f.repeats;
    if (f.jobs) cfg.benchmark.jobs = *f.jobs;
    if (f.test_fraction) cfg.test_fraction = *f.test_fraction;
    if (cfg.model.empty()) cfg.model = default_model_spec();
    cfg.validate();
    return cfg;
}

void require_data(const RunConfig& cfg) {
    if (cfg.data.empty()) throw Error(ErrorCode::invalid_config, "--data is required");
    if (cfg.target.empty() && cfg.schema.empty()) throw Error(ErrorCode::invalid_config, "--target is required");
}

DatasetSchema load_schema(const RunConfig& cfg) {
    if (cfg.schema.empty()) return infer_schema(cfg.data, cfg.target);
    std::ifstream in(cfg.schema);
    if (!in) throw Error(ErrorCode::io_error, "cannot open schema file " + cfg.schema);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::schema_mismatch, std::string("schema file is not valid JSON: ") + e.what());
    }
    auto schema = schema_from_json(doc);
    if (!cfg.target.empty() && schema.target() != cfg.target)
        throw Error(ErrorCode::invalid_config, "--target differs from the schema file's target");
    return schema;
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
    if (cfg.out.empty()) {
        out << text;
        if (!text.empty() && text.back() != '\n') out << '\n';
        return;
    }
    std::ofstream file(cfg.out);
    if (!file) throw Error(ErrorCode::io_error, "cannot write " + cfg.out);
    file << text;
    if (!text.empty() && text.back() != '\n') file << '\n';
}

void check_format(const std::string& format, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (format == a) return;
    throw Error(ErrorCode::invalid_config, "unsupported --format '" + format + "'");
}

Instance parse_instance(const DatasetSchema& schema, const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::invalid_config, std::string("--instance is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::invalid_config, "--instance must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!schema.column_index(key)) throw Error(ErrorCode::schema_mismatch, "unknown column '" + key + "'");
    Instance inst;
    for (const auto& col : schema.columns()) {
        const auto it = doc.find(col.name);
        inst.values.push_back(it == doc.end() ? Cell{Missing{}} : cell_from_json(col, *it));
    }
    validate_instance(schema, inst);
    return inst;
}

int cmd_explain(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f);
    require_data(cfg);
    check_format(f.format, {"json", "text"});
    if (f.row.has_value() == !f.instance_json.empty())
        throw Error(ErrorCode::invalid_config, "give exactly one of --row or --instance");
    const auto schema = load_schema(cfg);
    const auto data = load_csv(cfg.data, schema);

    Instance instance;
    InstanceTable train;
    if (f.row) {
        if (*f.row >= data.size())
            throw Error(ErrorCode::invalid_config, fmt::format("--row {} is outside the {} data rows", *f.row, data.size()));
        instance = data.row(*f.row);
        std::vector<Instance> rest;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (i != *f.row) rest.push_back(data.row(i));
        train = InstanceTable(schema, std::move(rest));
    } else {
        instance = parse_instance(schema, f.instance_json);
        train = data;
    }

    auto endpoint = open_endpoint(cfg.model, train, cfg.builtin);
    const Explainer explainer(train, *endpoint, cfg.explain);
    ExplanationTrace trace;
    auto explanation = explainer.explain(instance, &trace);
    explanation.provenance["run"] = cfg.to_json();
    if (f.row) explanation.provenance["row"] = *f.row;

    if (!f.dump_neighborhood.empty()) {
        std::ofstream dump(f.dump_neighborhood);
        if (!dump) throw Error(ErrorCode::io_error, "cannot write " + f.dump_neighborhood);
        auto doc = trace.neighborhood.to_json(schema);
        auto labels = nlohmann::json::array();
        for (const auto& p : trace.predictions) labels.push_back(schema.class_labels()[p.class_index]);
        doc["predictions"] = std::move(labels);
        dump << doc.dump(2) << '\n';
    }

    if (f.format == "text") {
        emit(cfg, out, render_explanation(schema, explanation));
    } else {
        emit(cfg, out, explanation_to_json(schema, explanation).dump(2));
    }
    return kExitOk;
}

int cmd_mine(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f);
    require_data(cfg);
    check_format(f.format, {"json", "text"});
    const auto schema = load_schema(cfg);
    const auto data = load_csv(cfg.data, schema);
    const auto labelled = discretize(fit(data), data);

    const auto rules = mine_objectives(labelled, cfg.explain.mining, cfg.explain.objectives);
    if (f.format == "text") {
        std::string text;
        for (const auto& r : rules) text += render_rule(r.rule) + "\n";
        emit(cfg, out, text);
        return kExitOk;
    }
    auto list = nlohmann::json::array();
    for (const auto& r : rules) {
        auto item = rule_to_json(r.rule);
        auto objs = nlohmann::json::array();
        for (auto o : r.found_by) objs.push_back(to_string(o));
        item["objectives"] = std::move(objs);
        list.push_back(std::move(item));
    }
    nlohmann::json doc = {{"format", kExplanationFormat},
                          {"rows", labelled.size()},
                          {"rules", std::move(list)},
                          {"config", cfg.to_json()}};
    emit(cfg, out, doc.dump(2));
    return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f);
    require_data(cfg);
    check_format(f.format, {"json", "table", "csv"});
    const auto schema = load_schema(cfg);
    const auto data = load_csv(cfg.data, schema);
    const auto split = split_train_test(data, cfg.test_fraction, cfg.benchmark.seed);
    auto endpoint = open_endpoint(cfg.model, split.train, cfg.builtin);
    auto report = run_benchmark(split.train, split.test, *endpoint, cfg.explain, cfg.benchmark);
    report.dataset = cfg.data;
    report.config["run"] = cfg.to_json();
    if (f.format == "table") {
        emit(cfg, out, report.to_table());
    } else if (f.format == "csv") {
        emit(cfg, out, report.to_csv());
    } else {
        emit(cfg, out, report.to_json().dump(2));
    }
    return kExitOk;
}

int cmd_infer_schema(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f);
    require_data(cfg);
    emit(cfg, out, schema_to_json(infer_schema(cfg.data, cfg.target)).dump(2));
    return kExitOk;
}

int cmd_serve_check(const Flags& f, std::ostream& out) {
    const auto cfg = resolve(f);
    require_data(cfg);
    if (cfg.model.rfind("cmd:", 0) != 0 && cfg.model.rfind("http", 0) != 0)
        throw Error(ErrorCode::invalid_config, "serve-check needs an external model (cmd:... or http://...)");
    const auto schema = load_schema(cfg);
    const auto data = load_csv(cfg.data, schema);
    auto endpoint = open_endpoint(cfg.model, data, cfg.builtin);

    const std::size_t n = std::min(f.probe, data.size());
    std::vector<Instance> probe(data.rows().begin(), data.rows().begin() + static_cast<std::ptrdiff_t>(n));
    const auto predictions = predict_batch(*endpoint, probe);
    auto labels = nlohmann::json::array();
    for (const auto& p : predictions) labels.push_back(schema.class_labels()[p.class_index]);
    nlohmann::json doc = {{"ok", true}, {"model", endpoint->describe()}, {"probe_predictions", std::move(labels)}};
    emit(cfg, out, doc.dump(2));
    return kExitOk;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return kExitConfig;
        case ErrorKind::data: return kExitData;
        case ErrorKind::endpoint: return kExitEndpoint;
    }
    return kExitInternal;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Local rule-based explanations for black-box classifiers", "lormika"};
    app.require_subcommand(1);
    Flags f;

    auto* explain = app.add_subcommand("explain", "Explain one prediction with four kinds of rules");
    add_common(*explain, f);
    add_mining(*explain, f);
    add_neighborhood(*explain, f);
    explain->add_option("--row", f.row, "Data row to explain; it is left out of the training rows");
    explain->add_option("--instance", f.instance_json, "Instance to explain as a JSON object of column values");
    explain->add_option("--dump-neighborhood", f.dump_neighborhood, "Write the labelled neighbourhood JSON here");
    explain->add_option("--format", f.format, "json or text")->default_val("json");

    auto* mine = app.add_subcommand("mine", "Mine k-optimal class association rules from a labelled CSV");
    add_common(*mine, f);
    add_mining(*mine, f);
    mine->add_option("--format", f.format, "json or text")->default_val("json");

    auto* evaluate = app.add_subcommand("evaluate", "Benchmark explanations on held-out rows");
    add_common(*evaluate, f);
    add_mining(*evaluate, f);
    add_neighborhood(*evaluate, f);
    evaluate->add_option("--instances", f.instances, "Instances to explain");
    evaluate->add_option("--repeats", f.repeats, "Explanations per instance with distinct seeds");
    evaluate->add_option("--jobs", f.jobs, "Worker threads");
    evaluate->add_option("--test-fraction", f.test_fraction, "Share of rows held out for explanation");
    evaluate->add_option("--format", f.format, "json, table or csv")->default_val("json");

    auto* infer = app.add_subcommand("infer-schema", "Print the schema inferred from a CSV");
    add_common(*infer, f);

    auto* check = app.add_subcommand("serve-check", "Handshake with an external model and send a probe batch");
    add_common(*check, f);
    check->add_option("--model", f.model, "cmd:<command> or http://host:port");
    check->add_option("--probe", f.probe, "Rows to send after the handshake")->default_val(5);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e_stream;
        const int code = app.exit(e, o, e_stream);
        out << o.str();
        err << e_stream.str();
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (explain->parsed()) return cmd_explain(f, out);
        if (mine->parsed()) return cmd_mine(f, out);
        if (evaluate->parsed()) return cmd_evaluate(f, out);
        if (infer->parsed()) return cmd_infer_schema(f, out);
        if (check->parsed()) return cmd_serve_check(f, out);
    } catch (const Error& e) {
        err << "lormika: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "lormika: internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace lormika
