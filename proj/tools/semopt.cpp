// Command-line front end: generate, profile, optimize, execute, bench, report.

#include "semopt/bench.hpp"
#include "semopt/error.hpp"
#include "semopt/hashing.hpp"
#include "semopt/reorder.hpp"
#include "semopt/serialization.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace semopt;

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 2;
constexpr int kInvalid = 3;

/// Options shared by every subcommand that builds a run configuration. Flags that
/// were given override the config file.
struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> sample_fraction;
    std::vector<std::string> targets;
    std::optional<double> alpha;
    std::optional<std::string> variant;
    std::optional<unsigned> jobs;
    std::optional<std::size_t> queries;
    std::vector<std::string> families;
    std::optional<std::size_t> rows;
    std::optional<std::string> ladder;
};

void add_config_flags(CLI::App& cmd, CommonFlags& f) {
    cmd.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd.add_option("--seed", f.seed, "master seed");
    cmd.add_option("--alpha", f.alpha, "credible level for both bounds (default 0.95)");
    cmd.add_option("--variant", f.variant, "global, local or independent");
    cmd.add_option("--rows", f.rows, "rows per generated table");
    cmd.add_option("--ladder", f.ladder, "default, uncompressed, or a catalog JSON file");
    cmd.add_option("--family", f.families, "workload family (repeatable; all when omitted)");
}

std::pair<double, double> parse_target(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw InvalidInput("target '" + text + "' is not R,P");
    std::size_t used_r = 0;
    std::size_t used_p = 0;
    double r = 0.0;
    double p = 0.0;
    try {
        r = std::stod(text.substr(0, comma), &used_r);
        p = std::stod(text.substr(comma + 1), &used_p);
    } catch (const std::exception&) {
        throw InvalidInput("target '" + text + "' is not R,P");
    }
    if (used_r != comma || used_p != text.size() - comma - 1) throw InvalidInput("target '" + text + "' is not R,P");
    return {r, p};
}

/// Config file merged with flags, as the JSON document the run is digested from.
Json effective_config(const CommonFlags& f) {
    Json j = f.config.empty() ? Json::object() : read_json_file(f.config);
    if (!j.is_object()) throw InvalidInput("config must be a JSON object");
    if (f.seed) j["seed"] = *f.seed;
    if (f.sample_fraction) j["sample_fraction"] = *f.sample_fraction;
    if (f.alpha) j["alpha"] = *f.alpha;
    if (f.variant) j["variant"] = *f.variant;
    if (f.jobs) j["jobs"] = *f.jobs;
    if (f.queries) j["queries"] = *f.queries;
    if (f.rows) j["rows"] = *f.rows;
    if (!f.families.empty()) j["families"] = f.families;
    if (!f.targets.empty()) {
        Json t = Json::array();
        for (const auto& s : f.targets) {
            const auto [r, p] = parse_target(s);
            t.push_back({r, p});
        }
        j["targets"] = std::move(t);
    }
    if (f.ladder) {
        if (*f.ladder == "default" || *f.ladder == "uncompressed") {
            j["ladder"] = *f.ladder;
        } else {
            j["ladder"] = read_json_file(*f.ladder);
        }
    }
    return j;
}

std::string hex(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::string config_digest(const BenchOptions& options) { return hex(fnv1a(to_json(options).dump())); }

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

int status_code(std::span<const QueryResult> results) {
    for (const auto& r : results) {
        if (r.status == PlanStatus::infeasible_sample) return kInfeasible;
    }
    return kOk;
}

Json summaries_json(std::span<const TargetSummary> summaries) {
    Json out = Json::array();
    for (const auto& s : summaries) out.push_back(to_json(s));
    return out;
}

void print_summaries(std::span<const TargetSummary> summaries) {
    for (const auto& s : summaries) {
        std::printf("target %.2f/%.2f  queries %zu  met R %.3f P %.3f  p5 R %.3f P %.3f  cost %.1f (gold %.1f)\n",
                    s.target_recall, s.target_precision, s.queries, s.fraction_met_recall,
                    s.fraction_met_precision, s.p5_target_met_recall, s.p5_target_met_precision, s.mean_cost,
                    s.mean_gold_cost);
    }
}

int cmd_generate(const CommonFlags& f, const std::string& out) {
    const BenchOptions options = bench_options_from_json(effective_config(f));
    Json index = Json::array();
    for (std::size_t i = 0; i < options.queries; ++i) {
        const QuerySpec spec = bench_query_spec(options, i);
        const QueryInstance q = generate_query(spec.family, spec.seed, options.workload, spec.query_id);
        write_query(fs::path(out) / spec.query_id, q);
        index.push_back({{"query_id", spec.query_id},
                         {"family", spec.family},
                         {"seed", spec.seed},
                         {"sample_seed", sample_seed(q)}});
    }
    write_json(fs::path(out) / "queries.json",
               {{"config_digest", config_digest(options)}, {"config", to_json(options)}, {"queries", index}});
    std::printf("wrote %zu queries to %s\n", options.queries, out.c_str());
    return kOk;
}

int cmd_profile(const std::string& query_dir, std::optional<double> fraction, std::optional<std::uint64_t> seed,
                std::string out) {
    const QueryInstance q = read_query(query_dir);
    ProfileOptions po;
    po.sample_fraction = fraction.value_or(po.sample_fraction);
    po.seed = seed.value_or(sample_seed(q));
    const ProfileMatrix profile = profile_query(prepare_query(q.plan, q.dataset), q.dataset, po);
    if (out.empty()) out = (fs::path(query_dir) / "profile.ndjson").string();
    std::ostringstream os;
    write_profile(os, profile);
    write_text_file(out, os.str());
    std::printf("profiled %zu of %zu tuples over %zu operators -> %s\n", profile.size(), profile.population_size,
                profile.operators.size(), out.c_str());
    return kOk;
}

int cmd_optimize(const CommonFlags& f, const std::string& profile_path, std::string out) {
    Json config = effective_config(f);
    if (config.contains("targets") && config["targets"].size() != 1) {
        throw InvalidInput("optimize takes exactly one target");
    }
    const BenchOptions options = bench_options_from_json(config);
    std::ifstream in(profile_path);
    if (!in) throw InvalidInput("cannot open " + profile_path);
    const ProfileMatrix profile = read_profile(in);
    const QualityTargets& t = options.targets.front();
    OptimizedPlan plan = optimize_variant(options.variant, profile, t, options.optimizer);
    assign_execution_order(plan, profile);
    if (out.empty()) out = (fs::path(profile_path).parent_path() / "plan.optimized.json").string();
    write_json(out, to_json(plan));
    std::printf("%s: status %s, predicted cost %.3f, bounds R %.4f P %.4f -> %s\n", to_string(plan.variant),
                to_string(plan.status), plan.predicted_cost, plan.predicted_recall_bound,
                plan.predicted_precision_bound, out.c_str());
    return plan.status == PlanStatus::infeasible_sample ? kInfeasible : kOk;
}

int cmd_execute(const std::string& query_dir, const std::string& plan_path, const std::string& out) {
    const QueryInstance q = read_query(query_dir);
    const OptimizedPlan plan = optimized_plan_from_json(read_json_file(plan_path));
    const PreparedQuery prepared = prepare_query(q.plan, q.dataset);
    const ExecutionResult run = execute_plan(prepared, q.dataset, plan);
    const QualityReport report = compare_results(run.results, execute_gold(q.plan, q.dataset), plan.targets);

    Json stages = Json::array();
    for (const auto& s : run.stages) {
        stages.push_back({{"op", s.op},
                          {"stage", s.stage},
                          {"candidate_id", s.candidate_id},
                          {"processed", s.processed},
                          {"accepted", s.accepted},
                          {"rejected", s.rejected},
                          {"unsure", s.unsure},
                          {"cost", s.cost}});
    }
    const Json j = {{"query_id", q.query_id},
                    {"targets", to_json(plan.targets)},
                    {"status", to_string(plan.status)},
                    {"cost", run.cost},
                    {"recall", report.recall},
                    {"precision", report.precision},
                    {"target_met_recall", report.target_met_recall},
                    {"target_met_precision", report.target_met_precision},
                    {"result_size", report.result_size},
                    {"gold_size", report.gold_size},
                    {"stages", std::move(stages)}};
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out, j);
        std::printf("cost %.3f  recall %.4f  precision %.4f -> %s\n", run.cost, report.recall, report.precision,
                    out.c_str());
    }
    return plan.status == PlanStatus::infeasible_sample ? kInfeasible : kOk;
}

int cmd_bench(const CommonFlags& f, const std::string& out) {
    const BenchOptions options = bench_options_from_json(effective_config(f));
    const BenchReport report = run_bench(options);

    const fs::path dir(out);
    const fs::path csv = dir / "results.csv";
    const fs::path manifest = dir / "run_manifest.json";
    write_text_file(csv, results_csv(report.results));

    Json seeds = Json::array();
    for (std::size_t i = 0; i < options.queries; ++i) {
        const QuerySpec spec = bench_query_spec(options, i);
        seeds.push_back({{"query_id", spec.query_id}, {"family", spec.family}, {"seed", spec.seed}});
    }
    Json results = Json::array();
    for (const auto& r : report.results) results.push_back(to_json(r));
    const Json j = {{"command", "bench"},
                    {"config_digest", config_digest(options)},
                    {"config", to_json(options)},
                    {"seeds", {{"master", options.seed}, {"queries", std::move(seeds)}}},
                    {"paths",
                     {{"config", f.config.empty() ? Json(nullptr) : Json(f.config)},
                      {"manifest", manifest.string()},
                      {"results_csv", csv.string()}}},
                    {"timing", {{"total_seconds", report.seconds}}},
                    {"summaries", summaries_json(report.summaries)},
                    {"results", std::move(results)}};
    write_json(manifest, j);
    print_summaries(report.summaries);
    std::printf("%.1f s; wrote %s and %s\n", report.seconds, manifest.c_str(), csv.c_str());
    return status_code(report.results);
}

int cmd_report(const std::string& manifest_path, std::string out) {
    const Json m = read_json_file(manifest_path);
    std::vector<QueryResult> results;
    try {
        for (const auto& r : m.at("results")) results.push_back(query_result_from_json(r));
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("manifest has no usable results: ") + e.what());
    }
    if (out.empty()) out = fs::path(manifest_path).parent_path().string();
    const auto summaries = summarize(results);
    const fs::path dir(out);
    write_text_file(dir / "results.csv", results_csv(results));
    write_json(dir / "summary.json",
               {{"config_digest", m.value("config_digest", "")}, {"summaries", summaries_json(summaries)}});
    print_summaries(summaries);
    return status_code(results);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-based optimizer for semantic query pipelines with probabilistic quality guarantees"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string out;
    std::string query_dir;
    std::string profile_path;
    std::string plan_path;
    std::string manifest_path;
    std::optional<double> fraction;
    std::optional<std::uint64_t> profile_seed;

    auto* generate = app.add_subcommand("generate", "generate synthetic queries with their datasets");
    add_config_flags(*generate, flags);
    generate->add_option("--queries", flags.queries, "number of queries (default 60)");
    generate->add_option("--out", out, "output directory")->required();

    auto* profile = app.add_subcommand("profile", "run every candidate on a sample of one query");
    profile->add_option("--query", query_dir, "query directory")->required()->check(CLI::ExistingDirectory);
    profile->add_option("--sample-fraction", fraction, "sample fraction (default 0.15)");
    profile->add_option("--seed", profile_seed, "sample seed (default: derived from the query)");
    profile->add_option("--out", out, "profile file (default <query>/profile.ndjson)");

    auto* optimize = app.add_subcommand("optimize", "choose a physical plan from a profile");
    optimize->add_option("--profile", profile_path, "profile file")->required()->check(CLI::ExistingFile);
    optimize->add_option("--config", flags.config, "JSON run configuration")->check(CLI::ExistingFile);
    optimize->add_option("--targets", flags.targets, "recall,precision target");
    optimize->add_option("--alpha", flags.alpha, "credible level (default 0.95)");
    optimize->add_option("--variant", flags.variant, "global, local or independent");
    optimize->add_option("--seed", flags.seed, "master seed");
    optimize->add_option("--out", out, "plan file (default next to the profile)");

    auto* execute = app.add_subcommand("execute", "execute a plan on the full dataset and score it");
    execute->add_option("--query", query_dir, "query directory")->required()->check(CLI::ExistingDirectory);
    execute->add_option("--plan", plan_path, "optimized plan file")->required()->check(CLI::ExistingFile);
    execute->add_option("--out", out, "report file (default stdout)");

    auto* bench = app.add_subcommand("bench", "optimize and execute a batch of queries per target");
    add_config_flags(*bench, flags);
    bench->add_option("--sample-fraction", flags.sample_fraction, "sample fraction (default 0.15)");
    bench->add_option("--targets", flags.targets, "recall,precision target (repeatable)");
    bench->add_option("--queries", flags.queries, "queries per target (default 60)");
    bench->add_option("--jobs", flags.jobs, "worker threads (default 1)");
    bench->add_option("--out", out, "output directory")->required();

    auto* report = app.add_subcommand("report", "re-emit results.csv and summary.json from a manifest");
    report->add_option("manifest", manifest_path, "run_manifest.json")->required()->check(CLI::ExistingFile);
    report->add_option("--out", out, "output directory (default: the manifest's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    }

    try {
        if (*generate) return cmd_generate(flags, out);
        if (*profile) return cmd_profile(query_dir, fraction, profile_seed, out);
        if (*optimize) return cmd_optimize(flags, profile_path, out);
        if (*execute) return cmd_execute(query_dir, plan_path, out);
        if (*bench) return cmd_bench(flags, out);
        if (*report) return cmd_report(manifest_path, out);
    } catch (const InvalidInput& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kInvalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kOk;
}
