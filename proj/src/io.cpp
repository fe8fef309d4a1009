#include "gradroute/io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gradroute/checksum.hpp"
#include "gradroute/error.hpp"
#include "gradroute/version.hpp"

namespace gradroute::io {

namespace {

using json = nlohmann::ordered_json;

struct Line {
  std::size_t number = 0;
  json value;
};

// Reads the header plus records. Blank lines are ignored.
class RecordReader {
 public:
  RecordReader(const std::filesystem::path& path, const char* format) : path_(path.string()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path_ + "' for reading");
    std::string text;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
      ++number;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      json value;
      try {
        value = json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path_, number, std::string("malformed JSON: ") + e.what());
      }
      if (!value.is_object()) throw ParseError(path_, number, "record is not a JSON object");
      if (!have_header) {
        check_header(value, number, format);
        header_ = value;
        have_header = true;
        continue;
      }
      lines_.push_back({number, std::move(value)});
    }
    if (in.bad()) throw IoError("read failure on '" + path_ + "'");
  }

  const std::string& path() const { return path_; }
  const json& header() const { return header_; }
  const std::vector<Line>& lines() const { return lines_; }

  // Runs `f`, translating JSON type errors into a located ParseError.
  template <typename F>
  auto field(std::size_t number, F&& f) const {
    try {
      return f();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path_, number, std::string("bad field: ") + e.what());
    }
  }

 private:
  void check_header(const json& h, std::size_t number, const char* format) const {
    if (!h.contains("format") || !h["format"].is_string() || h["format"] != format) {
      throw ParseError(path_, number, std::string("expected header with format '") + format + "'");
    }
    if (!h.contains("version") || !h["version"].is_number_integer() ||
        h["version"].get<int>() != kFormatVersion) {
      throw ParseError(path_, number, "unsupported format version");
    }
  }

  std::string path_;
  json header_;
  std::vector<Line> lines_;
};

json header(const char* format) {
  json h;
  h["format"] = format;
  h["version"] = kFormatVersion;
  return h;
}

class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path) : path_(path.string()), out_(path) {
    if (!out_) throw IoError("cannot open '" + path_ + "' for writing");
  }
  void write(const json& value) { out_ << value.dump() << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw IoError("write failure on '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw InputError(what + " is not finite");
}

std::string located(const std::string& path, std::size_t line, const std::string& what) {
  return path + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

TrajectoryCorpus read_trajectory_corpus(const std::filesystem::path& path,
                                        std::size_t context_length, std::size_t vocab_size) {
  RecordReader reader(path, kTrajectoryFormat);
  TrajectoryCorpus corpus;
  std::set<std::string> seen;
  for (const Line& line : reader.lines()) {
    const json& r = line.value;
    RawTrajectory raw = reader.field(line.number, [&] {
      RawTrajectory t;
      t.id = r.at("id").get<std::string>();
      if (r.contains("tokens")) {
        t.tokens = r.at("tokens").get<std::vector<TokenId>>();
        t.response_start = r.at("response_start").get<std::size_t>();
      } else {
        const auto prompt = r.at("prompt").get<std::string>();
        t.tokens = byte_tokenize(prompt);
        const auto response = byte_tokenize(r.at("response").get<std::string>());
        t.response_start = t.tokens.size();
        t.tokens.insert(t.tokens.end(), response.begin(), response.end());
      }
      if (r.contains("metadata")) {
        for (const auto& [k, v] : r.at("metadata").items()) {
          t.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
      return t;
    });
    if (!seen.insert(raw.id).second) {
      throw ConsistencyError(located(reader.path(), line.number, "duplicate id '" + raw.id + "'"));
    }
    for (std::size_t i = 0; i < raw.tokens.size(); ++i) {
      if (raw.tokens[i] >= vocab_size) {
        throw InputError(located(reader.path(), line.number,
                                 "token " + std::to_string(raw.tokens[i]) + " at position " +
                                     std::to_string(i) + " is outside the vocabulary of size " +
                                     std::to_string(vocab_size)));
      }
    }
    try {
      Trajectory t = prepare_trajectory(raw.tokens, raw.response_start, context_length, raw.id);
      t.metadata = std::move(raw.metadata);
      corpus.trajectories.push_back(std::move(t));
    } catch (const EmptyResponseError& e) {
      std::cerr << "warning: " << located(reader.path(), line.number, "skipping '" + raw.id + "': " + e.detail())
                << '\n';
      corpus.skipped.push_back({line.number, raw.id, e.detail()});
    } catch (const InputError& e) {
      throw InputError(located(reader.path(), line.number, e.detail()));
    }
  }
  return corpus;
}

void write_trajectory_corpus(const std::vector<RawTrajectory>& records,
                             const std::filesystem::path& path) {
  RecordWriter w(path);
  w.write(header(kTrajectoryFormat));
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["tokens"] = r.tokens;
    j["response_start"] = r.response_start;
    if (!r.metadata.empty()) j["metadata"] = r.metadata;
    w.write(j);
  }
  w.close();
}

std::vector<GradientVector> read_gradient_dump(const std::filesystem::path& path) {
  RecordReader reader(path, kGradientDumpFormat);
  std::vector<GradientVector> out;
  std::set<std::string> seen;
  for (const Line& line : reader.lines()) {
    const json& r = line.value;
    GradientVector v = reader.field(line.number, [&] {
      GradientVector g;
      g.trajectory_id = r.at("trajectory_id").get<std::string>();
      g.group_names = r.at("group_names").get<std::vector<std::string>>();
      g.norms = r.at("norms").get<std::vector<double>>();
      g.group_param_counts = r.at("group_param_counts").get<std::vector<std::uint64_t>>();
      g.loss_value = r.at("loss_value").get<double>();
      g.source = r.value("source", std::string(kInternalProbeSource));
      return g;
    });
    try {
      v.validate();
    } catch (const InputError& e) {
      throw InputError(located(reader.path(), line.number, e.detail()));
    }
    for (std::size_t j = 0; j < v.group_param_counts.size(); ++j) {
      if (v.group_param_counts[j] == 0) {
        throw InputError(located(reader.path(), line.number,
                                 "group_param_counts[" + std::to_string(j) + "] is zero"));
      }
    }
    if (!out.empty() && v.group_names != out.front().group_names) {
      throw ConsistencyError(located(reader.path(), line.number,
                                     "group_names differ from the first record"));
    }
    if (!seen.insert(v.trajectory_id).second) {
      throw ConsistencyError(located(reader.path(), line.number,
                                     "duplicate trajectory_id '" + v.trajectory_id + "'"));
    }
    out.push_back(std::move(v));
  }
  return out;
}

void write_gradient_dump(const std::vector<GradientVector>& vectors,
                         const std::filesystem::path& path) {
  for (const auto& v : vectors) v.validate();
  RecordWriter w(path);
  w.write(header(kGradientDumpFormat));
  for (const auto& v : vectors) {
    json j;
    j["trajectory_id"] = v.trajectory_id;
    j["group_names"] = v.group_names;
    j["norms"] = v.norms;
    j["group_param_counts"] = v.group_param_counts;
    j["loss_value"] = v.loss_value;
    j["source"] = v.source;
    w.write(j);
  }
  w.close();
}

ScoreSet read_scores(const std::filesystem::path& path) {
  RecordReader reader(path, kScoresFormat);
  ScoreSet s;
  const json& h = reader.header();
  reader.field(1, [&] {
    const auto name = h.at("metric").get<std::string>();
    const auto metric = parse_metric(name);
    if (!metric) throw ParseError(reader.path(), 1, "unknown metric '" + name + "'");
    s.metric = *metric;
    s.normalized = h.at("normalized").get<bool>();
    s.epsilon = h.value("epsilon", kDefaultEpsilon);
    return 0;
  });
  for (const Line& line : reader.lines()) {
    const json& r = line.value;
    auto [id, entry] = reader.field(line.number, [&] {
      ScoreEntry e;
      e.value = r.at("score").get<double>();
      e.degenerate = r.value("degenerate", false);
      return std::make_pair(r.at("trajectory_id").get<std::string>(), e);
    });
    if (!std::isfinite(entry.value)) {
      throw InputError(located(reader.path(), line.number, "score is not finite"));
    }
    if (!s.entries.emplace(id, entry).second) {
      throw ConsistencyError(located(reader.path(), line.number, "duplicate trajectory_id '" + id + "'"));
    }
  }
  return s;
}

void write_scores(const ScoreSet& scores, const std::filesystem::path& path) {
  for (const auto& [id, e] : scores.entries) require_finite(e.value, "score for '" + id + "'");
  RecordWriter w(path);
  json h = header(kScoresFormat);
  h["metric"] = std::string(metric_name(scores.metric));
  h["normalized"] = scores.normalized;
  h["epsilon"] = scores.epsilon;
  w.write(h);
  // std::map iteration is already sorted by trajectory_id.
  for (const auto& [id, e] : scores.entries) {
    json j;
    j["trajectory_id"] = id;
    j["score"] = e.value;
    j["degenerate"] = e.degenerate;
    w.write(j);
  }
  w.close();
}

std::string corpus_checksum(const ScoreSet& scores) {
  std::uint64_t acc = 0;
  for (const auto& [id, e] : scores.entries) {
    std::uint64_t h = fnv1a64(id);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(to_hex(std::bit_cast<std::uint64_t>(e.value)), h);
    acc += mix64(h);
  }
  return to_hex(mix64(acc ^ scores.entries.size()));
}

PartitionManifest make_manifest(const Partition& partition, const ScoreSet& scores) {
  check_partition_covers(partition, scores);
  return {partition, corpus_checksum(scores), kToolVersion};
}

void write_partition(const PartitionManifest& m, const std::filesystem::path& path) {
  require_finite(m.partition.threshold, "partition threshold");
  RecordWriter w(path);
  w.write(header(kPartitionFormat));
  json j;
  j["metric_name"] = m.partition.metric_name;
  j["rule"] = m.partition.rule.to_string();
  j["threshold"] = m.partition.threshold;
  j["sft_ids"] = m.partition.sft_ids;
  j["rl_ids"] = m.partition.rl_ids;
  j["degenerate"] = m.partition.degenerate;
  j["warnings"] = m.partition.warnings;
  // Tie and median handling are conventions of this tool, recorded for readers.
  j["conventions"] = m.partition.rule.kind == RoutingRule::Kind::median
                         ? json::array({"score <= median routes to SFT",
                                        "even-count median is the mean of the two central scores"})
                         : json::array({"ceil(rl_fraction * n) highest scores route to RL",
                                        "ties at the cut go to RL by ascending trajectory_id"});
  j["corpus_checksum"] = m.corpus_checksum;
  j["tool_version"] = m.tool_version;
  w.write(j);
  w.close();
}

PartitionManifest read_partition(const std::filesystem::path& path) {
  RecordReader reader(path, kPartitionFormat);
  if (reader.lines().size() != 1) {
    throw ParseError(reader.path(), reader.lines().empty() ? 1 : reader.lines()[1].number,
                     "partition manifest must have exactly one body line");
  }
  const Line& line = reader.lines().front();
  const json& r = line.value;
  PartitionManifest m = reader.field(line.number, [&] {
    PartitionManifest out;
    out.partition.metric_name = r.at("metric_name").get<std::string>();
    out.partition.rule = RoutingRule::parse(r.at("rule").get<std::string>());
    out.partition.threshold = r.at("threshold").get<double>();
    out.partition.degenerate = r.value("degenerate", false);
    out.partition.warnings = r.value("warnings", std::vector<std::string>{});
    out.corpus_checksum = r.at("corpus_checksum").get<std::string>();
    out.tool_version = r.at("tool_version").get<std::string>();
    return out;
  });
  const auto sft = reader.field(line.number, [&] { return r.at("sft_ids").get<std::vector<std::string>>(); });
  const auto rl = reader.field(line.number, [&] { return r.at("rl_ids").get<std::vector<std::string>>(); });
  for (const auto& id : sft) {
    if (!m.partition.sft_ids.insert(id).second) {
      throw CorruptedManifestError(located(reader.path(), line.number, "id '" + id + "' repeated in sft_ids"));
    }
  }
  for (const auto& id : rl) {
    if (!m.partition.rl_ids.insert(id).second) {
      throw CorruptedManifestError(located(reader.path(), line.number, "id '" + id + "' repeated in rl_ids"));
    }
    if (m.partition.sft_ids.count(id)) {
      throw CorruptedManifestError(located(reader.path(), line.number,
                                           "id '" + id + "' is in both sft_ids and rl_ids"));
    }
  }
  return m;
}

PartitionManifest read_partition(const std::filesystem::path& path, const ScoreSet& scores) {
  PartitionManifest m = read_partition(path);
  const std::string expected = corpus_checksum(scores);
  if (m.corpus_checksum != expected) {
    throw ConsistencyError("manifest '" + path.string() + "' checksum " + m.corpus_checksum +
                           " does not match the score file (" + expected + ")");
  }
  check_partition_covers(m.partition, scores);
  return m;
}

namespace {

void write_report(const char* kind, const json& body, const std::filesystem::path& path) {
  RecordWriter w(path);
  json h = header(kReportFormat);
  h["kind"] = kind;
  w.write(h);
  w.write(body);
  w.close();
}

}  // namespace

void write_consensus_report(const ConsensusReport& r, const std::filesystem::path& path) {
  json body;
  body["partitions"] = r.names;
  body["corpus_size"] = r.corpus_size;
  body["rl_sizes"] = r.rl_sizes;
  json pairs = json::array();
  for (const auto& [key, jac] : r.pairwise_rl_overlap) {
    json p;
    p["a"] = key.first;
    p["b"] = key.second;
    p["rl_intersection"] = r.pairwise_rl_intersection.at(key);
    p["jaccard"] = jac;
    pairs.push_back(p);
  }
  body["pairwise_rl_overlap"] = pairs;
  body["all_rl_intersection"] = r.all_rl_intersection;
  body["triple_rl_intersection_fraction"] = r.triple_rl_intersection_fraction;
  body["triple_rl_intersection_corpus_fraction"] = r.triple_rl_intersection_corpus_fraction;
  body["random_baseline"] = r.random_baseline;
  body["random_baseline_corpus"] = r.random_baseline_corpus;
  body["monte_carlo_baseline_corpus"] =
      r.monte_carlo_baseline_corpus ? json(*r.monte_carlo_baseline_corpus) : json(nullptr);
  write_report("consensus", body, path);
}

void write_sweep_report(const SweepReport& r, const std::filesystem::path& path) {
  json body;
  body["metric_name"] = r.metric_name;
  body["nesting_verified"] = r.nesting_verified;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j;
    j["rl_fraction"] = row.rl_fraction;
    j["sft_size"] = row.sft_size;
    j["rl_size"] = row.rl_size;
    j["threshold"] = row.threshold;
    j["downstream_score"] = row.downstream_score ? json(*row.downstream_score) : json(nullptr);
    rows.push_back(j);
  }
  body["rows"] = rows;
  write_report("sweep", body, path);
}

void write_robustness_report(const RobustnessReport& r, const std::filesystem::path& path) {
  json body;
  body["metric_name"] = r.metric_name;
  body["corpus_size"] = r.corpus_size;
  body["rho"] = r.rho ? json(*r.rho) : json(nullptr);
  body["degenerate"] = r.degenerate;
  write_report("norm-robustness", body, path);
}

void write_spearman_report(const std::string& label_a, const std::string& label_b,
                           std::size_t corpus_size, const std::optional<double>& rho,
                           const std::filesystem::path& path) {
  json body;
  body["a"] = label_a;
  body["b"] = label_b;
  body["corpus_size"] = corpus_size;
  body["rho"] = rho ? json(*rho) : json(nullptr);
  body["degenerate"] = !rho.has_value();
  write_report("spearman", body, path);
}

}  // namespace gradroute::io
