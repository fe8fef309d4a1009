#include <gtest/gtest.h>

#include <cmath>

#include "gradroute/error.hpp"
#include "gradroute/io.hpp"
#include "gradroute/version.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace gradroute;
using gradroute::testing::make_scores;
using gradroute::testing::make_vector;
using gradroute::testing::TempDir;
using gradroute::testing::write_text;

namespace {

const char* kCorpusHeader = R"({"format":"gradroute.trajectories","version":1})";

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(TrajectoryCorpus, ReadsBothRecordForms) {
  TempDir dir;
  write_text(dir / "c.jsonl", std::string(kCorpusHeader) + "\n" +
                                  R"({"id":"a","tokens":[1,2,3,4],"response_start":2})" "\n"
                                  "\n"
                                  R"({"id":"b","prompt":"hi","response":"yo","metadata":{"task":"web","n":3}})" "\n");
  const auto c = io::read_trajectory_corpus(dir / "c.jsonl", 8, 256);
  ASSERT_EQ(c.trajectories.size(), 2u);
  EXPECT_TRUE(c.skipped.empty());
  EXPECT_EQ(c.trajectories[0].trajectory_id, "a");
  EXPECT_EQ(c.trajectories[0].response_token_count(), 2u);
  EXPECT_EQ(c.trajectories[1].tokens[0], static_cast<TokenId>('h'));
  EXPECT_EQ(c.trajectories[1].response_token_count(), 2u);
  EXPECT_EQ(c.trajectories[1].metadata.at("task"), "web");
  EXPECT_EQ(c.trajectories[1].metadata.at("n"), "3");
}

TEST(TrajectoryCorpus, SkipsFullyTruncatedResponses) {
  TempDir dir;
  write_text(dir / "c.jsonl", std::string(kCorpusHeader) + "\n" +
                                  R"({"id":"keep","tokens":[1,2,3],"response_start":1})" "\n" +
                                  R"({"id":"drop","tokens":[1,2,3,4,5,6],"response_start":5})" "\n");
  ::testing::internal::CaptureStderr();
  const auto c = io::read_trajectory_corpus(dir / "c.jsonl", 4, 256);
  const std::string err = ::testing::internal::GetCapturedStderr();
  ASSERT_EQ(c.trajectories.size(), 1u);
  ASSERT_EQ(c.skipped.size(), 1u);
  EXPECT_EQ(c.skipped[0].trajectory_id, "drop");
  EXPECT_EQ(c.skipped[0].line, 3u);
  EXPECT_NE(err.find("drop"), std::string::npos);
}

TEST(TrajectoryCorpus, ReportsLineNumbersOnBadRecords) {
  TempDir dir;
  write_text(dir / "c.jsonl", std::string(kCorpusHeader) + "\n" +
                                  R"({"id":"a","tokens":[1,2],"response_start":1})" "\n" +
                                  R"({"id":"b","tokens":[1,999],"response_start":1})" "\n");
  const std::string msg = error_of([&] { io::read_trajectory_corpus(dir / "c.jsonl", 8, 256); });
  EXPECT_NE(msg.find("c.jsonl:3"), std::string::npos) << msg;
  EXPECT_EQ(msg.find("input error: ", 5), std::string::npos) << msg;

  write_text(dir / "d.jsonl", std::string(kCorpusHeader) + "\n{not json\n");
  try {
    io::read_trajectory_corpus(dir / "d.jsonl", 8, 256);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }

  write_text(dir / "e.jsonl", std::string(kCorpusHeader) + "\n" + R"({"id":"a","tokens":"x"})" "\n");
  EXPECT_THROW(io::read_trajectory_corpus(dir / "e.jsonl", 8, 256), ParseError);

  write_text(dir / "f.jsonl", std::string(kCorpusHeader) + "\n" +
                                  R"({"id":"a","tokens":[1,2],"response_start":1})" "\n" +
                                  R"({"id":"a","tokens":[1,2],"response_start":1})" "\n");
  EXPECT_THROW(io::read_trajectory_corpus(dir / "f.jsonl", 8, 256), ConsistencyError);

  write_text(dir / "g.jsonl", R"({"format":"gradroute.scores","version":1})" "\n");
  EXPECT_THROW(io::read_trajectory_corpus(dir / "g.jsonl", 8, 256), ParseError);

  EXPECT_THROW(io::read_trajectory_corpus(dir / "missing.jsonl", 8, 256), IoError);
}

TEST(TrajectoryCorpus, EmptyFileIsEmptyCorpus) {
  TempDir dir;
  write_text(dir / "c.jsonl", "");
  EXPECT_TRUE(io::read_trajectory_corpus(dir / "c.jsonl", 8, 256).trajectories.empty());
}

TEST(TrajectoryCorpus, WriteReadRoundTrip) {
  TempDir dir;
  std::vector<io::RawTrajectory> raw = {{"x", {5, 6, 7, 8}, 2, {{"k", "v"}}}};
  io::write_trajectory_corpus(raw, dir / "c.jsonl");
  const auto c = io::read_trajectory_corpus(dir / "c.jsonl", 6, 16);
  ASSERT_EQ(c.trajectories.size(), 1u);
  const Trajectory expected = prepare_trajectory(raw[0].tokens, 2, 6, "x");
  EXPECT_EQ(c.trajectories[0].tokens, expected.tokens);
  EXPECT_EQ(c.trajectories[0].response_mask, expected.response_mask);
  EXPECT_EQ(c.trajectories[0].attention_mask, expected.attention_mask);
  EXPECT_EQ(c.trajectories[0].metadata.at("k"), "v");
}

TEST(GradientDump, RoundTripIsBitExact) {
  TempDir dir;
  SplitMix64 rng(4);
  std::vector<GradientVector> vs;
  for (int i = 0; i < 5; ++i) {
    auto v = make_vector("t" + std::to_string(i), gradroute::testing::random_vector(rng, 7, 0, 1));
    v.norms[0] = 1.0 / 3.0;
    v.norms[1] = 5e-324;
    v.loss_value = std::nextafter(1.0, 2.0);
    vs.push_back(v);
  }
  io::write_gradient_dump(vs, dir / "d.jsonl");
  EXPECT_EQ(io::read_gradient_dump(dir / "d.jsonl"), vs);
}

TEST(GradientDump, RejectsInvalidRecords) {
  TempDir dir;
  auto a = make_vector("a", {1, 2});
  auto b = make_vector("b", {1, 2});
  b.group_names = {"x", "y"};
  io::write_gradient_dump({a, b}, dir / "mixed.jsonl");
  EXPECT_THROW(io::read_gradient_dump(dir / "mixed.jsonl"), ConsistencyError);

  io::write_gradient_dump({a, a}, dir / "dup.jsonl");
  EXPECT_THROW(io::read_gradient_dump(dir / "dup.jsonl"), ConsistencyError);

  const std::string header = R"({"format":"gradroute.gradient_dump","version":1})";
  write_text(dir / "neg.jsonl",
             header + "\n" +
                 R"({"trajectory_id":"a","group_names":["x","y"],"norms":[1,-2],"group_param_counts":[1,1],"loss_value":1})" "\n");
  const std::string msg = error_of([&] { io::read_gradient_dump(dir / "neg.jsonl"); });
  EXPECT_NE(msg.find("neg.jsonl:2"), std::string::npos) << msg;

  write_text(dir / "zero.jsonl",
             header + "\n" +
                 R"({"trajectory_id":"a","group_names":["x","y"],"norms":[1,2],"group_param_counts":[1,0],"loss_value":1})" "\n");
  EXPECT_THROW(io::read_gradient_dump(dir / "zero.jsonl"), InputError);

  write_text(dir / "version.jsonl", R"({"format":"gradroute.gradient_dump","version":9})" "\n");
  EXPECT_THROW(io::read_gradient_dump(dir / "version.jsonl"), ParseError);
}

TEST(Scores, RoundTripPreservesHeaderAndValues) {
  TempDir dir;
  ScoreSet s = make_scores({{"a", 0.1}, {"b", -3.0}, {"c", 1.0 / 7.0}}, Metric::kurtosis);
  s.entries["b"].degenerate = true;
  s.normalized = true;
  s.epsilon = 1e-6;
  io::write_scores(s, dir / "s.jsonl");
  EXPECT_EQ(io::read_scores(dir / "s.jsonl"), s);
}

TEST(Partition, ManifestRoundTrip) {
  TempDir dir;
  const ScoreSet s = make_scores({{"a", 0.1}, {"b", 0.5}, {"c", 0.9}});
  const auto m = io::make_manifest(median_split(s), s);
  EXPECT_EQ(m.tool_version, kToolVersion);
  io::write_partition(m, dir / "p.json");
  EXPECT_EQ(io::read_partition(dir / "p.json"), m);
  EXPECT_EQ(io::read_partition(dir / "p.json", s), m);

  const auto inv = io::make_manifest(inverse_partition(m.partition), s);
  io::write_partition(inv, dir / "inv.json");
  EXPECT_EQ(io::read_partition(dir / "inv.json").partition.rule.to_string(), "inverse-of(median)");
}

TEST(Partition, ChecksumIgnoresOrderButSeesScoreBits) {
  const ScoreSet a = make_scores({{"a", 0.1}, {"b", 0.5}});
  const ScoreSet b = make_scores({{"b", 0.5}, {"a", 0.1}});
  ScoreSet c = a;
  c.entries["a"].value = std::nextafter(0.1, 1.0);
  EXPECT_EQ(io::corpus_checksum(a), io::corpus_checksum(b));
  EXPECT_NE(io::corpus_checksum(a), io::corpus_checksum(c));
  EXPECT_EQ(io::corpus_checksum(a).size(), 16u);
}

TEST(Partition, DetectsCorruptionAndMismatch) {
  TempDir dir;
  const ScoreSet s = make_scores({{"a", 0.1}, {"b", 0.5}, {"c", 0.9}});
  auto m = io::make_manifest(median_split(s), s);

  auto overlap = m;
  overlap.partition.rl_ids.insert("a");
  io::write_partition(overlap, dir / "overlap.json");
  EXPECT_THROW(io::read_partition(dir / "overlap.json"), CorruptedManifestError);

  io::write_partition(m, dir / "p.json");
  ScoreSet other = s;
  other.entries["a"].value = 0.2;
  EXPECT_THROW(io::read_partition(dir / "p.json", other), ConsistencyError);

  Partition missing = m.partition;
  missing.sft_ids.erase("a");
  EXPECT_THROW(io::make_manifest(missing, s), ConsistencyError);
}

TEST(Reports, AreSingleRecordJsonFiles) {
  TempDir dir;
  ScoreSet s;
  for (int i = 0; i < 10; ++i) s.entries[gradroute::testing::id_of(i)] = {i * 0.1, false};
  const std::vector<double> qs = {0.2, 0.4};
  io::write_sweep_report(ratio_sweep(s, qs), dir / "sweep.json");
  const std::string text = gradroute::testing::read_text(dir / "sweep.json");
  EXPECT_NE(text.find(R"("kind":"sweep")"), std::string::npos);
  EXPECT_NE(text.find(R"("downstream_score":null)"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(GradientDump, PreservesOrderAndNamesBadLine) {
  TempDir dir;
  std::vector<GradientVector> vs = {make_vector("z", {1, 2}), make_vector("a", {3, 4}),
                                    make_vector("m", {5, 6})};
  io::write_gradient_dump(vs, dir / "d.jsonl");
  const auto back = io::read_gradient_dump(dir / "d.jsonl");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].trajectory_id, "z");
  EXPECT_EQ(back[2].trajectory_id, "m");

  write_text(dir / "len.jsonl",
             std::string(R"({"format":"gradroute.gradient_dump","version":1})") + "\n" +
                 R"({"trajectory_id":"a","group_names":["x","y"],"norms":[1,2,3],"group_param_counts":[1,1],"loss_value":1})" "\n");
  const std::string msg = error_of([&] { io::read_gradient_dump(dir / "len.jsonl"); });
  EXPECT_NE(msg.find("len.jsonl:2"), std::string::npos) << msg;
}

TEST(Scores, HundredRandomScoresRoundTrip) {
  TempDir dir;
  SplitMix64 rng(100);
  ScoreSet s;
  for (std::size_t i = 0; i < 100; ++i) {
    s.entries[gradroute::testing::id_of(i)] = {rng.uniform() * 1e3 - 500.0, i % 17 == 0};
  }
  io::write_scores(s, dir / "s.jsonl");
  EXPECT_EQ(io::read_scores(dir / "s.jsonl"), s);
}

TEST(Scores, DuplicateIdIsRejected) {
  TempDir dir;
  write_text(dir / "s.jsonl",
             std::string(R"({"format":"gradroute.scores","version":1,"metric":"gini","normalized":false})") +
                 "\n" R"({"trajectory_id":"a","score":0.1})" "\n" R"({"trajectory_id":"a","score":0.2})" "\n");
  EXPECT_THROW(io::read_scores(dir / "s.jsonl"), ConsistencyError);
}

TEST(TrajectoryCorpus, TwoRecordsAtContextSixteen) {
  TempDir dir;
  write_text(dir / "c.jsonl", std::string(kCorpusHeader) + "\n" +
                                  R"({"id":"a","tokens":[1,2,3,4,5],"response_start":2})" "\n" +
                                  R"({"id":"b","prompt":"abc","response":"de"})" "\n");
  const auto c = io::read_trajectory_corpus(dir / "c.jsonl", 16, 256);
  ASSERT_EQ(c.trajectories.size(), 2u);
  for (const auto& t : c.trajectories) EXPECT_EQ(t.tokens.size(), 16u);
}
