#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gradroute/error.hpp"
#include "gradroute/metrics.hpp"
#include "gradroute/model.hpp"
#include "gradroute/router.hpp"

namespace gradroute {

struct PipelinePaths {
  std::filesystem::path corpus;
  std::filesystem::path dump = "gradients.jsonl";
  std::filesystem::path scores = "scores.jsonl";
  std::filesystem::path manifest = "partition.json";
};

// Defaults: median routing, 50% quantile, eps 1e-8, context 2048.
struct PipelineConfig {
  ProbeModelConfig probe;
  std::size_t context_length = 2048;
  Metric metric = Metric::gini;
  bool normalized = false;
  double epsilon = kDefaultEpsilon;
  RoutingRule::Kind rule = RoutingRule::Kind::median;
  double rl_fraction = 0.5;
  bool inverse = false;
  PipelinePaths paths;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Reads a JSON config. Relative paths resolve against the config's directory.
// probe.max_context defaults to context_length, probe.rng_seed to rng_seed.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig default_pipeline_config();

struct ProbeSummary {
  std::size_t records = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

ProbeSummary cmd_probe(const PipelineConfig& config, const std::filesystem::path& corpus,
                       const std::filesystem::path& out);

std::size_t cmd_score(const std::filesystem::path& dump, Metric metric, bool normalized,
                      double epsilon, const std::filesystem::path& out);

Partition cmd_route(const std::filesystem::path& scores, RoutingRule::Kind rule,
                    double rl_fraction, bool inverse, const std::filesystem::path& out);

struct ConsensusInputs {
  std::vector<std::filesystem::path> manifests;
  std::size_t monte_carlo_trials = 100;
  std::uint64_t seed = 0;
};
void cmd_analyze_consensus(const ConsensusInputs& inputs, const std::filesystem::path& out);
void cmd_analyze_spearman(const std::filesystem::path& scores_a,
                          const std::filesystem::path& scores_b, const std::filesystem::path& out);
void cmd_analyze_sweep(const std::filesystem::path& scores, const std::vector<double>& fractions,
                       const std::filesystem::path& out);
void cmd_analyze_norm_robustness(const std::filesystem::path& dump, Metric metric, double epsilon,
                                 const std::filesystem::path& out);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitIo = 4;

int exit_code_for(const Error& e);

}  // namespace gradroute
