// gradroute: probe -> score -> route -> analyze.
//
//   gradroute probe   --config cfg.json [--corpus c.jsonl] [--seed N] [--out dump.jsonl]
//   gradroute score   --dump dump.jsonl --metric gini [--normalized] [--out scores.jsonl]
//   gradroute route   --scores scores.jsonl --rule median|quantile [--rl-fraction q]
//                     [--inverse] [--out partition.json]
//   gradroute analyze consensus|spearman|sweep|norm-robustness ...
//
// Worker count for probing comes from GRADROUTE_WORKERS.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradroute/pipeline.hpp"

using namespace gradroute;

namespace {

Metric require_metric(const std::string& name) {
  const auto m = parse_metric(name);
  if (!m) throw UsageError("unknown metric '" + name + "' (expected gini, kurtosis, cv or l2)");
  return *m;
}

RoutingRule::Kind require_rule(const std::string& name) {
  if (name == "median") return RoutingRule::Kind::median;
  if (name == "quantile") return RoutingRule::Kind::quantile;
  throw UsageError("unknown rule '" + name + "' (expected median or quantile)");
}

std::filesystem::path pick(const std::string& flag, const std::filesystem::path& fallback) {
  return flag.empty() ? fallback : std::filesystem::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-concentration data routing: probe, score, route, analyze"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  app.add_option("--seed", seed, "Override the config rng_seed");

  // probe
  auto* probe = app.add_subcommand("probe", "Probe per-group gradient norms for a corpus");
  std::string corpus_path;
  std::string probe_out;
  std::optional<std::size_t> context_length;
  probe->add_option("--corpus", corpus_path, "Trajectory corpus (defaults to config paths.corpus)");
  probe->add_option("--context-length", context_length, "Override the config context_length");
  probe->add_option("--out", probe_out, "Gradient dump to write");

  // score
  auto* score = app.add_subcommand("score", "Score a gradient dump with one metric");
  std::string dump_path;
  std::string metric_text;
  bool normalized = false;
  std::optional<double> epsilon;
  std::string score_out;
  score->add_option("--dump", dump_path, "Gradient dump");
  score->add_option("--metric", metric_text, "gini | kurtosis | cv | l2");
  score->add_flag("--normalized", normalized, "Divide norms by sqrt(param count) first");
  score->add_option("--epsilon", epsilon, "Denominator guard (default 1e-8)");
  score->add_option("--out", score_out, "Score file to write");

  // route
  auto* route = app.add_subcommand("route", "Split a scored corpus into SFT and RL");
  std::string scores_path;
  std::string rule_text;
  std::optional<double> rl_fraction;
  bool inverse = false;
  std::string route_out;
  route->add_option("--scores", scores_path, "Score file");
  route->add_option("--rule", rule_text, "median | quantile");
  route->add_option("--rl-fraction", rl_fraction, "RL share for the quantile rule");
  route->add_flag("--inverse", inverse, "Swap the SFT and RL sides");
  route->add_option("--out", route_out, "Partition manifest to write");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Consensus, rank-correlation and sweep reports");
  analyze->require_subcommand(1);
  std::string analyze_out = "report.json";

  auto* consensus_cmd = analyze->add_subcommand("consensus", "RL overlap across manifests");
  std::vector<std::string> manifests;
  std::size_t trials = 100;
  consensus_cmd->add_option("--manifest", manifests, "Partition manifests (two or more)")
      ->required();
  consensus_cmd->add_option("--trials", trials, "Monte-Carlo trials for the random baseline");
  consensus_cmd->add_option("--out", analyze_out, "Report to write");

  auto* spearman_cmd = analyze->add_subcommand("spearman", "Rank correlation of two score files");
  std::vector<std::string> score_pair;
  spearman_cmd->add_option("--scores", score_pair, "Exactly two score files")
      ->required()
      ->expected(2);
  spearman_cmd->add_option("--out", analyze_out, "Report to write");

  auto* sweep_cmd = analyze->add_subcommand("sweep", "Quantile routing across RL fractions");
  std::string sweep_scores;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  sweep_cmd->add_option("--scores", sweep_scores, "Score file")->required();
  sweep_cmd->add_option("--fractions", fractions, "RL fractions")->delimiter(',');
  sweep_cmd->add_option("--out", analyze_out, "Report to write");

  auto* robust_cmd =
      analyze->add_subcommand("norm-robustness", "Raw vs size-normalized score ranking");
  std::string robust_dump;
  std::string robust_metric;
  robust_cmd->add_option("--dump", robust_dump, "Gradient dump")->required();
  robust_cmd->add_option("--metric", robust_metric, "gini | kurtosis | cv | l2");
  robust_cmd->add_option("--out", analyze_out, "Report to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    PipelineConfig config =
        config_path.empty() ? default_pipeline_config() : load_pipeline_config(config_path);
    if (seed) {
      config.rng_seed = *seed;
      config.probe.rng_seed = *seed;
    }

    if (*probe) {
      if (context_length) {
        config.context_length = *context_length;
        if (config.probe.max_context < *context_length) config.probe.max_context = *context_length;
      }
      const std::filesystem::path corpus = pick(corpus_path, config.paths.corpus);
      if (corpus.empty()) throw UsageError("probe needs --corpus or paths.corpus in the config");
      const std::filesystem::path out = pick(probe_out, config.paths.dump);
      const ProbeSummary s = cmd_probe(config, corpus, out);
      std::cout << "probed " << s.records << " trajectories, skipped " << s.skipped << ", "
                << s.seconds << " s -> " << out.string() << '\n';
    } else if (*score) {
      const Metric metric = metric_text.empty() ? config.metric : require_metric(metric_text);
      const std::filesystem::path dump = pick(dump_path, config.paths.dump);
      const std::filesystem::path out = pick(score_out, config.paths.scores);
      const std::size_t n = cmd_score(dump, metric, normalized || config.normalized,
                                      epsilon.value_or(config.epsilon), out);
      std::cout << "scored " << n << " trajectories with " << metric_name(metric) << " -> "
                << out.string() << '\n';
    } else if (*route) {
      const RoutingRule::Kind rule = rule_text.empty() ? config.rule : require_rule(rule_text);
      const std::filesystem::path scores = pick(scores_path, config.paths.scores);
      const std::filesystem::path out = pick(route_out, config.paths.manifest);
      const Partition p = cmd_route(scores, rule, rl_fraction.value_or(config.rl_fraction),
                                    inverse || config.inverse, out);
      std::cout << p.rule.to_string() << " threshold " << p.threshold << ": " << p.sft_ids.size()
                << " SFT / " << p.rl_ids.size() << " RL -> " << out.string() << '\n';
    } else if (*analyze) {
      if (*consensus_cmd) {
        std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
        cmd_analyze_consensus({paths, trials, config.rng_seed}, analyze_out);
      } else if (*spearman_cmd) {
        cmd_analyze_spearman(score_pair.at(0), score_pair.at(1), analyze_out);
      } else if (*sweep_cmd) {
        cmd_analyze_sweep(sweep_scores, fractions, analyze_out);
      } else if (*robust_cmd) {
        const Metric metric = robust_metric.empty() ? config.metric : require_metric(robust_metric);
        cmd_analyze_norm_robustness(robust_dump, metric, config.epsilon, analyze_out);
      }
      std::cout << "report -> " << analyze_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "gradroute: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "gradroute: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
