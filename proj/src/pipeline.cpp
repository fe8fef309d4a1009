#include "gradroute/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "gradroute/analysis.hpp"
#include "gradroute/io.hpp"
#include "gradroute/probe.hpp"

namespace gradroute {

void PipelineConfig::validate() const {
  probe.validate();
  if (context_length < 2) throw ConfigError("context_length", "must be at least 2");
  if (context_length > probe.max_context) {
    throw ConfigError("context_length", "exceeds probe.max_context (" +
                                            std::to_string(probe.max_context) + ")");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("epsilon", "must be positive and finite");
  }
  if (rule == RoutingRule::Kind::quantile && !(rl_fraction > 0.0 && rl_fraction < 1.0)) {
    throw ConfigError("rl_fraction", "must lie in (0, 1) for the quantile rule");
  }
}

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.probe.max_context = c.context_length;
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }

  PipelineConfig c = default_pipeline_config();
  const auto base = path.parent_path();
  auto resolve = [&base](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  // Reads j[key] into out when present, naming the key on type errors.
  auto read = [](const nlohmann::json& obj, const char* key, auto& out) {
    if (!obj.contains(key)) return false;
    try {
      out = obj.at(key).get<std::remove_reference_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(key, "has the wrong type");
    }
    return true;
  };

  read(j, "context_length", c.context_length);
  read(j, "rng_seed", c.rng_seed);
  c.probe.rng_seed = c.rng_seed;
  c.probe.max_context = c.context_length;
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    read(p, "num_layers", c.probe.num_layers);
    read(p, "model_dim", c.probe.model_dim);
    read(p, "num_heads", c.probe.num_heads);
    read(p, "ffn_hidden_dim", c.probe.ffn_hidden_dim);
    read(p, "vocab_size", c.probe.vocab_size);
    read(p, "max_context", c.probe.max_context);
    read(p, "rng_seed", c.probe.rng_seed);
  }
  std::string text;
  if (read(j, "metric", text)) {
    const auto m = parse_metric(text);
    if (!m) throw ConfigError("metric", "unknown metric '" + text + "'");
    c.metric = *m;
  }
  read(j, "normalized", c.normalized);
  read(j, "epsilon", c.epsilon);
  if (read(j, "rule", text)) {
    if (text == "median") {
      c.rule = RoutingRule::Kind::median;
    } else if (text == "quantile") {
      c.rule = RoutingRule::Kind::quantile;
    } else {
      throw ConfigError("rule", "must be 'median' or 'quantile'");
    }
  }
  read(j, "rl_fraction", c.rl_fraction);
  read(j, "inverse", c.inverse);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    if (read(p, "corpus", text)) c.paths.corpus = resolve(text);
    if (read(p, "dump", text)) c.paths.dump = resolve(text);
    if (read(p, "scores", text)) c.paths.scores = resolve(text);
    if (read(p, "manifest", text)) c.paths.manifest = resolve(text);
  }
  c.validate();
  return c;
}

ProbeSummary cmd_probe(const PipelineConfig& config, const std::filesystem::path& corpus_path,
                       const std::filesystem::path& out) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const ProbeModel model = init_model(config.probe);
  const io::TrajectoryCorpus corpus =
      io::read_trajectory_corpus(corpus_path, config.context_length, config.probe.vocab_size);
  const auto vectors = probe_corpus(model, corpus.trajectories, Exec::parallel);
  io::write_gradient_dump(vectors, out);
  const auto stop = std::chrono::steady_clock::now();
  return {vectors.size(), corpus.skipped.size(),
          std::chrono::duration<double>(stop - start).count()};
}

std::size_t cmd_score(const std::filesystem::path& dump, Metric metric, bool normalized,
                      double epsilon, const std::filesystem::path& out) {
  const auto vectors = io::read_gradient_dump(dump);
  const ScoreSet scores = score_corpus(vectors, metric, normalized, epsilon, Exec::parallel);
  io::write_scores(scores, out);
  return scores.size();
}

Partition cmd_route(const std::filesystem::path& scores_path, RoutingRule::Kind rule,
                    double rl_fraction, bool inverse, const std::filesystem::path& out) {
  const ScoreSet scores = io::read_scores(scores_path);
  Partition p = rule == RoutingRule::Kind::median ? median_split(scores)
                                                  : quantile_split(scores, rl_fraction);
  if (inverse) p = inverse_partition(p);
  io::write_partition(io::make_manifest(p, scores), out);
  return p;
}

void cmd_analyze_consensus(const ConsensusInputs& inputs, const std::filesystem::path& out) {
  std::vector<NamedPartition> partitions;
  for (const auto& path : inputs.manifests) {
    const auto m = io::read_partition(path);
    partitions.push_back({path.stem().string() + ":" + m.partition.metric_name, m.partition});
  }
  ConsensusReport report = consensus(partitions);
  if (inputs.monte_carlo_trials > 0) {
    report.monte_carlo_baseline_corpus = monte_carlo_intersection(
        report.corpus_size, report.rl_sizes, inputs.monte_carlo_trials, inputs.seed);
  }
  io::write_consensus_report(report, out);
}

void cmd_analyze_spearman(const std::filesystem::path& scores_a,
                          const std::filesystem::path& scores_b, const std::filesystem::path& out) {
  const ScoreSet a = io::read_scores(scores_a);
  const ScoreSet b = io::read_scores(scores_b);
  io::write_spearman_report(scores_a.filename().string(), scores_b.filename().string(), a.size(),
                            spearman(a, b), out);
}

void cmd_analyze_sweep(const std::filesystem::path& scores, const std::vector<double>& fractions,
                       const std::filesystem::path& out) {
  io::write_sweep_report(ratio_sweep(io::read_scores(scores), fractions), out);
}

void cmd_analyze_norm_robustness(const std::filesystem::path& dump, Metric metric, double epsilon,
                                 const std::filesystem::path& out) {
  const auto vectors = io::read_gradient_dump(dump);
  io::write_robustness_report(normalization_robustness(vectors, metric, epsilon), out);
}

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::usage: return kExitUsage;
    case ErrorCategory::validation: return kExitValidation;
    case ErrorCategory::io: return kExitIo;
  }
  return kExitInternal;
}

}  // namespace gradroute
