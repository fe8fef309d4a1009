#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "gradroute/analysis.hpp"
#include "gradroute/metrics.hpp"
#include "gradroute/probe.hpp"
#include "gradroute/router.hpp"
#include "gradroute/trajectory.hpp"

// Line-delimited JSON formats. Every file starts with a header line
//   {"format":"gradroute.<kind>","version":1,...}
// followed by one record per line. A zero-byte file is an empty collection.
//
//   trajectories   {"id","tokens":[..],"response_start",["metadata"]}
//                  or {"id","prompt","response",["metadata"]} (byte tokens)
//   gradient_dump  {"trajectory_id","group_names","norms","group_param_counts",
//                   "loss_value","source"}
//   scores         header adds "metric","normalized","epsilon";
//                  records {"trajectory_id","score","degenerate"}
//   partition      one body line {"metric_name","rule","threshold","sft_ids",
//                  "rl_ids","conventions","corpus_checksum","tool_version",...}
//   report         header adds "kind"; one body line
//
// Reals are written in shortest round-trip decimal, so every write/read pair
// reproduces the exact bits.
namespace gradroute::io {

inline constexpr const char* kTrajectoryFormat = "gradroute.trajectories";
inline constexpr const char* kGradientDumpFormat = "gradroute.gradient_dump";
inline constexpr const char* kScoresFormat = "gradroute.scores";
inline constexpr const char* kPartitionFormat = "gradroute.partition";
inline constexpr const char* kReportFormat = "gradroute.report";

struct SkippedRecord {
  std::size_t line = 0;
  std::string trajectory_id;
  std::string reason;
};

struct TrajectoryCorpus {
  std::vector<Trajectory> trajectories;
  std::vector<SkippedRecord> skipped;
};

// Prepares each record to `context_length`. Records whose response is fully
// truncated are skipped (and logged); any other violation rejects the file.
TrajectoryCorpus read_trajectory_corpus(const std::filesystem::path& path,
                                        std::size_t context_length, std::size_t vocab_size);

struct RawTrajectory {
  std::string id;
  std::vector<TokenId> tokens;
  std::size_t response_start = 0;
  std::map<std::string, std::string> metadata;
};
void write_trajectory_corpus(const std::vector<RawTrajectory>& records,
                             const std::filesystem::path& path);

std::vector<GradientVector> read_gradient_dump(const std::filesystem::path& path);
void write_gradient_dump(const std::vector<GradientVector>& vectors,
                         const std::filesystem::path& path);

ScoreSet read_scores(const std::filesystem::path& path);
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);

struct PartitionManifest {
  Partition partition;
  std::string corpus_checksum;
  std::string tool_version;
  bool operator==(const PartitionManifest&) const = default;
};

// Order-independent digest over (trajectory_id, score bits).
std::string corpus_checksum(const ScoreSet& scores);

PartitionManifest make_manifest(const Partition& partition, const ScoreSet& scores);

void write_partition(const PartitionManifest& manifest, const std::filesystem::path& path);
// Throws CorruptedManifestError when an id sits on both sides.
PartitionManifest read_partition(const std::filesystem::path& path);
// Also checks the manifest against `scores`: checksum and coverage
// (ConsistencyError on mismatch).
PartitionManifest read_partition(const std::filesystem::path& path, const ScoreSet& scores);

void write_consensus_report(const ConsensusReport& report, const std::filesystem::path& path);
void write_sweep_report(const SweepReport& report, const std::filesystem::path& path);
void write_robustness_report(const RobustnessReport& report, const std::filesystem::path& path);
void write_spearman_report(const std::string& label_a, const std::string& label_b,
                           std::size_t corpus_size, const std::optional<double>& rho,
                           const std::filesystem::path& path);

}  // namespace gradroute::io
