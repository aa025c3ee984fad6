#pragma once

#include "semopt/bench.hpp"
#include "semopt/optimizer.hpp"
#include "semopt/plan_ir.hpp"
#include "semopt/profile_matrix.hpp"
#include "semopt/simulator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace semopt {

using Json = nlohmann::ordered_json;

// All readers throw InvalidInput on malformed documents.

Json to_json(const QualityTargets& t);
QualityTargets targets_from_json(const Json& j);

/// {nodes: [...], edges: [[parent, child], ...], targets: {...}}. Node fields beyond
/// id and kind are written only when set.
Json to_json(const LogicalPlan& plan);
LogicalPlan plan_from_json(const Json& j);

Json to_json(const OptimizedPlan& plan);
OptimizedPlan optimized_plan_from_json(const Json& j);

/// Profile catalog: {profiles: [{id, model_size, ratio, per_token_cost, footprint, ...}]}.
Json catalog_to_json(const std::vector<CostProfile>& profiles);
std::vector<CostProfile> catalog_from_json(const Json& j);

/// Header line with tasks and profiles, then one line per row.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);

/// Header line with operators and candidates, then one line per sample tuple.
void write_profile(std::ostream& out, const ProfileMatrix& profile);
ProfileMatrix read_profile(std::istream& in);

/// A generated query: plan.json, dataset.ndjson and query.json under `dir`.
void write_query(const std::filesystem::path& dir, const QueryInstance& query);
QueryInstance read_query(const std::filesystem::path& dir);

Json to_json(const OptimizerSettings& s);
/// Starts from `base` and overrides the keys present; unknown keys are rejected.
OptimizerSettings optimizer_settings_from_json(const Json& j, const OptimizerSettings& base = {});

/// Run configuration. Keys: seed, queries, jobs, sample_fraction, alpha, targets
/// ([[r, p], ...]), variant, families, rows, correlation_penalty, ladder ("default",
/// "uncompressed" or an inline catalog), optimizer.
BenchOptions bench_options_from_json(const Json& j, const BenchOptions& base = {});
Json to_json(const BenchOptions& options);

Json to_json(const QueryResult& r);
QueryResult query_result_from_json(const Json& j);
Json to_json(const TargetSummary& s);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace semopt
