#include "lormika/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "lormika/error.hpp"
#include "lormika/random.hpp"

namespace lormika {

double rate_of_interestingness(double lift) {
    if (lift < 0.0 || std::isnan(lift)) throw Error(ErrorCode::negative_lift, fmt::format("lift {} is negative", lift));
    return std::abs(lift - 1.0);
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::set<std::string> antecedent_features(const Rule& rule) {
    std::set<std::string> out;
    for (const auto& c : rule.antecedent) out.insert(c.column_name);
    return out;
}

const ExplainedRule* top_supporting_rule(const ExplanationSet& explanation) {
    return explanation.current_supporting.empty() ? nullptr : &explanation.current_supporting.front();
}

TrainTestSplit split_train_test(const InstanceTable& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorCode::invalid_config, "test fraction must lie strictly between 0 and 1");
    const std::size_t n = data.size();
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test == n) throw Error(ErrorCode::empty_table, "split leaves one side empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < n_test; ++i) std::swap(order[i], order[i + rng.below(n - i)]);

    TrainTestSplit out;
    out.test_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::vector<Instance> train;
    std::vector<Instance> test;
    for (auto r : out.train_rows) train.push_back(data.row(r));
    for (auto r : out.test_rows) test.push_back(data.row(r));
    out.train = InstanceTable(data.schema(), std::move(train));
    out.test = InstanceTable(data.schema(), std::move(test));
    return out;
}

void BenchmarkConfig::validate() const {
    if (n_instances < 1) throw Error(ErrorCode::invalid_config, "at least one instance is required");
    if (n_repeats < 1) throw Error(ErrorCode::invalid_config, "at least one repeat is required");
    if (jobs < 1) throw Error(ErrorCode::invalid_config, "jobs must be at least 1");
}

Summary Summary::of(const std::vector<double>& values) {
    Summary s;
    for (double v : values)
        if (!std::isnan(v)) {
            s.mean += v;
            ++s.count;
        }
    if (s.count == 0) {
        s.mean = std::numeric_limits<double>::quiet_NaN();
        s.stddev = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mean /= static_cast<double>(s.count);
    double ss = 0.0;
    for (double v : values)
        if (!std::isnan(v)) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count));
    return s;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::set<std::string> top_features(const ExplanationSet& e) {
    const auto* top = top_supporting_rule(e);
    return top ? antecedent_features(top->rule) : std::set<std::string>{};
}

double mean_pairwise_jaccard(const std::vector<std::set<std::string>>& sets) {
    if (sets.size() < 2) return 1.0;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            sum += jaccard(sets[i], sets[j]);
            ++pairs;
        }
    return sum / static_cast<double>(pairs);
}

InstanceResult run_one(const Explainer& explainer, const InstanceTable& candidates, std::size_t row,
                       const BenchmarkConfig& bench) {
    InstanceResult res;
    res.row = row;
    const auto& instance = candidates.row(row);
    std::vector<std::set<std::string>> feature_sets;
    nlohmann::json first_doc;
    for (std::size_t r = 0; r < bench.n_repeats; ++r) {
        const auto seed = derive_seed(bench.seed, row, r);
        const auto start = std::chrono::steady_clock::now();
        const auto expl = explainer.explain(instance, seed);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        res.wall_time_seconds.push_back(elapsed.count());
        if (r == 0) first_doc = explanation_to_json(candidates.schema(), expl);

        if (const auto* top = top_supporting_rule(expl)) {
            const auto& m = top->rule.metrics;
            res.coverage.push_back(m.coverage);
            res.confidence.push_back(m.confidence);
            res.interestingness.push_back(rate_of_interestingness(m.lift));
            res.n_features.push_back(static_cast<double>(antecedent_features(top->rule).size()));
        } else {
            res.coverage.push_back(kNaN);
            res.confidence.push_back(kNaN);
            res.interestingness.push_back(kNaN);
            res.n_features.push_back(kNaN);
        }
        auto feats = top_features(expl);
        res.features.emplace_back(feats.begin(), feats.end());
        feature_sets.push_back(std::move(feats));
    }
    res.jaccard_distinct = mean_pairwise_jaccard(feature_sets);

    const auto replay = explainer.explain(instance, derive_seed(bench.seed, row, 0));
    res.jaccard_same_seed = jaccard(feature_sets.front(), top_features(replay));
    res.same_seed_identical = explanation_to_json(candidates.schema(), replay) == first_doc;
    res.ok = true;
    return res;
}

std::vector<std::size_t> sample_rows(std::size_t available, std::size_t wanted, std::uint64_t seed) {
    std::vector<std::size_t> rows(available);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (wanted >= available) return rows;
    Rng rng(seed);
    for (std::size_t i = 0; i < wanted; ++i) std::swap(rows[i], rows[i + rng.below(available - i)]);
    rows.resize(wanted);
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::string cell(const Summary& s) {
    if (s.count == 0) return "n/a";
    return fmt::format("{:.2f} ± {:.2f}", s.mean, s.stddev);
}

nlohmann::json summary_json(const Summary& s) {
    auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
    return {{"mean", num(s.mean)}, {"stddev", num(s.stddev)}, {"count", s.count}};
}

nlohmann::json values_json(const std::vector<double>& values) {
    auto out = nlohmann::json::array();
    for (double v : values) out.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    return out;
}

}  // namespace

EvalReport run_benchmark(const InstanceTable& train, const InstanceTable& candidates, ModelEndpoint& endpoint,
                         const ExplainConfig& explain, const BenchmarkConfig& bench) {
    bench.validate();
    if (candidates.empty()) throw Error(ErrorCode::empty_table, "no instances to explain");
    if (!(candidates.schema() == train.schema()))
        throw Error(ErrorCode::schema_mismatch, "candidate rows do not share the training schema");

    const Explainer explainer(train, endpoint, explain);
    const auto rows = sample_rows(candidates.size(), bench.n_instances, derive_seed(bench.seed, 0x5A3D1E));

    std::vector<InstanceResult> results(rows.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
                results[i] = run_one(explainer, candidates, rows[i], bench);
            } catch (const std::exception& e) {
                results[i] = InstanceResult{};
                results[i].row = rows[i];
                results[i].error = e.what();
            }
        }
    };
    const std::size_t n_threads = std::min(bench.jobs, rows.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    EvalReport report;
    report.model = endpoint.describe();
    report.config = explain.to_json();
    report.config["benchmark"] = {{"n_instances", bench.n_instances}, {"n_repeats", bench.n_repeats},
                                  {"seed", bench.seed}, {"jobs", bench.jobs}};
    report.n_instances = rows.size();
    report.n_repeats = bench.n_repeats;
    report.jaccard_single_run = bench.n_repeats == 1;

    std::vector<double> cov, conf, interest, nfeat, wall, jd, js;
    for (const auto& r : results) {
        if (!r.ok) {
            ++report.n_failed;
            continue;
        }
        for (double v : r.coverage) report.n_without_rule += std::isnan(v) ? 1 : 0;
        cov.insert(cov.end(), r.coverage.begin(), r.coverage.end());
        conf.insert(conf.end(), r.confidence.begin(), r.confidence.end());
        interest.insert(interest.end(), r.interestingness.begin(), r.interestingness.end());
        nfeat.insert(nfeat.end(), r.n_features.begin(), r.n_features.end());
        wall.insert(wall.end(), r.wall_time_seconds.begin(), r.wall_time_seconds.end());
        jd.push_back(r.jaccard_distinct);
        js.push_back(r.jaccard_same_seed);
    }
    report.coverage = Summary::of(cov);
    report.confidence = Summary::of(conf);
    report.interestingness = Summary::of(interest);
    report.n_features = Summary::of(nfeat);
    report.wall_time_seconds = Summary::of(wall);
    report.jaccard_distinct = Summary::of(jd);
    report.jaccard_same_seed = Summary::of(js);
    report.instances = std::move(results);
    return report;
}

nlohmann::json EvalReport::to_json(bool include_timing) const {
    nlohmann::json doc;
    doc["dataset"] = dataset;
    doc["model"] = model;
    doc["config"] = config;
    doc["n_instances"] = n_instances;
    doc["n_repeats"] = n_repeats;
    doc["n_failed"] = n_failed;
    doc["n_without_rule"] = n_without_rule;
    doc["jaccard_single_run"] = jaccard_single_run;
    doc["metrics"] = {{"coverage", summary_json(coverage)},
                      {"confidence", summary_json(confidence)},
                      {"interestingness", summary_json(interestingness)},
                      {"n_features", summary_json(n_features)},
                      {"jaccard_distinct_seed", summary_json(jaccard_distinct)},
                      {"jaccard_same_seed", summary_json(jaccard_same_seed)}};
    if (include_timing) doc["metrics"]["wall_time_seconds"] = summary_json(wall_time_seconds);
    auto items = nlohmann::json::array();
    for (const auto& r : instances) {
        nlohmann::json item = {{"row", r.row}, {"ok", r.ok}};
        if (!r.ok) {
            item["error"] = r.error;
        } else {
            item["coverage"] = values_json(r.coverage);
            item["confidence"] = values_json(r.confidence);
            item["interestingness"] = values_json(r.interestingness);
            item["n_features"] = values_json(r.n_features);
            item["features"] = r.features;
            item["jaccard_distinct_seed"] = r.jaccard_distinct;
            item["jaccard_same_seed"] = r.jaccard_same_seed;
            item["same_seed_identical"] = r.same_seed_identical;
            if (include_timing) item["wall_time_seconds"] = r.wall_time_seconds;
        }
        items.push_back(std::move(item));
    }
    doc["instances"] = std::move(items);
    return doc;
}

std::string EvalReport::to_table() const {
    const std::pair<const char*, const Summary*> rows[] = {
        {"coverage", &coverage},
        {"confidence", &confidence},
        {"interestingness", &interestingness},
        {"n_features", &n_features},
        {"jaccard (distinct seeds)", &jaccard_distinct},
        {"jaccard (same seed)", &jaccard_same_seed},
        {"wall time (s)", &wall_time_seconds},
    };
    std::string out = fmt::format("{:<26}{}\n", "metric", "mean ± std");
    for (const auto& [name, s] : rows) out += fmt::format("{:<26}{}\n", name, cell(*s));
    out += fmt::format("\ninstances {}  repeats {}  failed {}  without supporting rule {}\n", n_instances, n_repeats,
                       n_failed, n_without_rule);
    if (jaccard_single_run) out += "single repeat: distinct-seed jaccard is 1 by convention\n";
    for (const auto& r : instances)
        if (!r.ok) out += fmt::format("row {} failed: {}\n", r.row, r.error);
    return out;
}

std::string EvalReport::to_csv() const {
    std::string out = "row,repeat,ok,coverage,confidence,interestingness,n_features,wall_time_seconds,features\n";
    auto num = [](double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); };
    for (const auto& r : instances) {
        if (!r.ok) {
            out += fmt::format("{},,false,,,,,,\n", r.row);
            continue;
        }
        for (std::size_t k = 0; k < r.coverage.size(); ++k) {
            std::string feats;
            for (const auto& f : r.features[k]) feats += (feats.empty() ? "" : ";") + f;
            out += fmt::format("{},{},true,{},{},{},{},{},{}\n", r.row, k, num(r.coverage[k]), num(r.confidence[k]),
                               num(r.interestingness[k]), num(r.n_features[k]), r.wall_time_seconds[k],
                               csv_escape(feats));
        }
    }
    return out;
}

}  // namespace lormika
