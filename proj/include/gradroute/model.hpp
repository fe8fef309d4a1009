#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradroute {

struct ProbeModelConfig {
  std::size_t num_layers = 2;
  std::size_t model_dim = 64;
  std::size_t num_heads = 4;
  std::size_t ffn_hidden_dim = 128;
  std::size_t vocab_size = 256;
  std::size_t max_context = 128;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError naming the first offending field.
  void validate() const;
  bool operator==(const ProbeModelConfig&) const = default;
};

// The seven probed projections of one decoder block, in probe order.
enum class Projection : std::uint8_t { q, k, v, o, gate, up, down };

inline constexpr std::array<Projection, 7> kProjections = {
    Projection::q,    Projection::k,  Projection::v,   Projection::o,
    Projection::gate, Projection::up, Projection::down};
inline constexpr std::size_t kGroupsPerLayer = kProjections.size();

std::string_view projection_name(Projection p);

// Dense row-major matrix. Linear maps store weights as [out x in].
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool operator==(const Matrix&) const = default;
};

struct DecoderLayer {
  std::vector<double> attn_gain;
  std::vector<double> ffn_gain;
  Matrix wq, wk, wv, wo;          // [dim x dim]
  Matrix w_gate, w_up;            // [ffn x dim]
  Matrix w_down;                  // [dim x ffn]

  Matrix& projection(Projection p);
  const Matrix& projection(Projection p) const;

  bool operator==(const DecoderLayer&) const = default;
};

// Pre-norm decoder-only transformer: causal multi-head attention and a
// SiLU-gated FFN per block, RMSNorm before each sublayer and before the
// unembedding. Token/position embeddings, the unembedding and all norm gains
// are auxiliary and never probed.
class ProbeModel {
 public:
  explicit ProbeModel(const ProbeModelConfig& config);

  const ProbeModelConfig& config() const { return config_; }

  std::size_t group_count() const { return layers_.size() * kGroupsPerLayer; }
  // Layer-major, projection order q k v o gate up down.
  Matrix& group(std::size_t index);
  const Matrix& group(std::size_t index) const;
  std::string group_name(std::size_t index) const;
  std::vector<std::string> group_names() const;
  std::vector<std::uint64_t> group_param_counts() const;

  std::vector<DecoderLayer>& layers() { return layers_; }
  const std::vector<DecoderLayer>& layers() const { return layers_; }
  Matrix& token_embedding() { return token_embedding_; }
  const Matrix& token_embedding() const { return token_embedding_; }
  Matrix& position_embedding() { return position_embedding_; }
  const Matrix& position_embedding() const { return position_embedding_; }
  Matrix& unembedding() { return unembedding_; }
  const Matrix& unembedding() const { return unembedding_; }
  std::vector<double>& final_gain() { return final_gain_; }
  const std::vector<double>& final_gain() const { return final_gain_; }

  // FNV-1a over the raw bytes of every parameter, in a fixed order.
  std::uint64_t parameter_checksum() const;

  bool operator==(const ProbeModel&) const = default;

 private:
  ProbeModelConfig config_;
  Matrix token_embedding_;     // [vocab x dim]
  Matrix position_embedding_;  // [max_context x dim]
  std::vector<DecoderLayer> layers_;
  std::vector<double> final_gain_;
  Matrix unembedding_;         // [vocab x dim]
};

// Deterministic initialization from config.rng_seed: each matrix is filled
// with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a counter-based stream keyed by
// (seed, parameter index), so no matrix depends on another's draw count.
ProbeModel init_model(const ProbeModelConfig& config);

}  // namespace gradroute
