#include "gradroute/model.hpp"

#include <cmath>

#include "gradroute/checksum.hpp"
#include "gradroute/error.hpp"

namespace gradroute {

void ProbeModelConfig::validate() const {
  if (num_layers == 0) throw ConfigError("num_layers", "must be positive");
  if (model_dim == 0) throw ConfigError("model_dim", "must be positive");
  if (num_heads == 0) throw ConfigError("num_heads", "must be positive");
  if (model_dim % num_heads != 0) {
    throw ConfigError("num_heads", "must divide model_dim (" + std::to_string(model_dim) +
                                       " % " + std::to_string(num_heads) + " != 0)");
  }
  if (ffn_hidden_dim == 0) throw ConfigError("ffn_hidden_dim", "must be positive");
  if (vocab_size == 0) throw ConfigError("vocab_size", "must be positive");
  if (max_context < 2) throw ConfigError("max_context", "must be at least 2");
}

std::string_view projection_name(Projection p) {
  switch (p) {
    case Projection::q: return "q";
    case Projection::k: return "k";
    case Projection::v: return "v";
    case Projection::o: return "o";
    case Projection::gate: return "gate";
    case Projection::up: return "up";
    case Projection::down: return "down";
  }
  return "?";
}

Matrix& DecoderLayer::projection(Projection p) {
  return const_cast<Matrix&>(std::as_const(*this).projection(p));
}

const Matrix& DecoderLayer::projection(Projection p) const {
  switch (p) {
    case Projection::q: return wq;
    case Projection::k: return wk;
    case Projection::v: return wv;
    case Projection::o: return wo;
    case Projection::gate: return w_gate;
    case Projection::up: return w_up;
    case Projection::down: return w_down;
  }
  return wq;
}

ProbeModel::ProbeModel(const ProbeModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.model_dim;
  const std::size_t f = config_.ffn_hidden_dim;
  token_embedding_ = Matrix(config_.vocab_size, d);
  position_embedding_ = Matrix(config_.max_context, d);
  layers_.resize(config_.num_layers);
  for (auto& layer : layers_) {
    layer.attn_gain.assign(d, 1.0);
    layer.ffn_gain.assign(d, 1.0);
    layer.wq = Matrix(d, d);
    layer.wk = Matrix(d, d);
    layer.wv = Matrix(d, d);
    layer.wo = Matrix(d, d);
    layer.w_gate = Matrix(f, d);
    layer.w_up = Matrix(f, d);
    layer.w_down = Matrix(d, f);
  }
  final_gain_.assign(d, 1.0);
  unembedding_ = Matrix(config_.vocab_size, d);
}

Matrix& ProbeModel::group(std::size_t index) {
  return const_cast<Matrix&>(std::as_const(*this).group(index));
}

const Matrix& ProbeModel::group(std::size_t index) const {
  if (index >= group_count()) {
    throw InputError("group index " + std::to_string(index) + " out of range (" +
                     std::to_string(group_count()) + " groups)");
  }
  return layers_[index / kGroupsPerLayer].projection(kProjections[index % kGroupsPerLayer]);
}

std::string ProbeModel::group_name(std::size_t index) const {
  if (index >= group_count()) throw InputError("group index out of range");
  return "layers." + std::to_string(index / kGroupsPerLayer) + "." +
         std::string(projection_name(kProjections[index % kGroupsPerLayer]));
}

std::vector<std::string> ProbeModel::group_names() const {
  std::vector<std::string> names;
  names.reserve(group_count());
  for (std::size_t i = 0; i < group_count(); ++i) names.push_back(group_name(i));
  return names;
}

std::vector<std::uint64_t> ProbeModel::group_param_counts() const {
  std::vector<std::uint64_t> counts;
  counts.reserve(group_count());
  for (std::size_t i = 0; i < group_count(); ++i) counts.push_back(group(i).size());
  return counts;
}

std::uint64_t ProbeModel::parameter_checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::span<const double> values) {
    h = fnv1a64(std::as_bytes(values), h);
  };
  feed(token_embedding_.span());
  feed(position_embedding_.span());
  for (const auto& layer : layers_) {
    feed(layer.attn_gain);
    feed(layer.ffn_gain);
    for (Projection p : kProjections) feed(layer.projection(p).span());
  }
  feed(final_gain_);
  feed(unembedding_.span());
  return h;
}

namespace {

// Element `counter` of the stream for parameter `param_index`, in [-1, 1).
double uniform_symmetric(std::uint64_t stream_key, std::uint64_t counter) {
  const std::uint64_t bits = mix64(stream_key ^ mix64(counter));
  const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
  return 2.0 * unit - 1.0;
}

void fill_uniform(Matrix& m, std::uint64_t seed, std::uint64_t param_index, double fan_in) {
  const std::uint64_t key = mix64(seed ^ mix64(param_index + 1));
  const double bound = 1.0 / std::sqrt(fan_in);
  for (std::size_t e = 0; e < m.data.size(); ++e) {
    m.data[e] = bound * uniform_symmetric(key, e);
  }
}

}  // namespace

ProbeModel init_model(const ProbeModelConfig& config) {
  ProbeModel model(config);
  const std::uint64_t seed = config.rng_seed;
  const std::size_t groups = model.group_count();
  for (std::size_t g = 0; g < groups; ++g) {
    Matrix& m = model.group(g);
    fill_uniform(m, seed, g, static_cast<double>(m.cols));
  }
  // Auxiliary parameters continue the index space after the probed groups.
  fill_uniform(model.token_embedding(), seed, groups + 0, 1.0);
  fill_uniform(model.position_embedding(), seed, groups + 1, 1.0);
  fill_uniform(model.unembedding(), seed, groups + 2, static_cast<double>(config.model_dim));
  return model;
}

}  // namespace gradroute
