#include "gradroute/probe.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "gradroute/error.hpp"
#include "gradroute/kernels.hpp"

namespace gradroute {

void GradientVector::validate() const {
  if (norms.size() != group_names.size() || norms.size() != group_param_counts.size()) {
    throw InputError("gradient vector '" + trajectory_id + "' has mismatched lengths (norms " +
                     std::to_string(norms.size()) + ", group_names " +
                     std::to_string(group_names.size()) + ", group_param_counts " +
                     std::to_string(group_param_counts.size()) + ")");
  }
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (!std::isfinite(norms[j])) {
      throw InputError("gradient vector '" + trajectory_id + "' has a non-finite norm at group " +
                       std::to_string(j));
    }
    if (norms[j] < 0.0) {
      throw InputError("gradient vector '" + trajectory_id + "' has a negative norm at group " +
                       std::to_string(j));
    }
  }
  if (!std::isfinite(loss_value) || loss_value < 0.0) {
    throw InputError("gradient vector '" + trajectory_id + "' has an invalid loss value");
  }
}

namespace {

constexpr double kNormEpsilon = 1e-6;

using GroupVisitor = std::function<void(std::size_t, std::span<const double>)>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = gain * x / rms(x), row-wise. Stores 1/rms per row in inv_rms.
void rmsnorm_forward(std::span<const double> x, std::span<const double> gain,
                     std::span<double> y, std::span<double> inv_rms, std::size_t rows,
                     std::size_t dim) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x.data() + t * dim;
    double ms = 0.0;
    for (std::size_t i = 0; i < dim; ++i) ms += xt[i] * xt[i];
    ms /= static_cast<double>(dim);
    const double r = 1.0 / std::sqrt(ms + kNormEpsilon);
    inv_rms[t] = r;
    double* yt = y.data() + t * dim;
    for (std::size_t i = 0; i < dim; ++i) yt[i] = gain[i] * (xt[i] * r);
  }
}

// dx += d(rmsnorm)/dx applied to dy.
void rmsnorm_backward_accumulate(std::span<const double> dy, std::span<const double> x,
                                 std::span<const double> inv_rms, std::span<const double> gain,
                                 std::span<double> dx, std::size_t rows, std::size_t dim) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* dyt = dy.data() + t * dim;
    const double* xt = x.data() + t * dim;
    const double r = inv_rms[t];
    double dot = 0.0;
    for (std::size_t i = 0; i < dim; ++i) dot += (dyt[i] * gain[i]) * (xt[i] * r);
    dot /= static_cast<double>(dim);
    double* dxt = dx.data() + t * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      dxt[i] += r * (dyt[i] * gain[i] - (xt[i] * r) * dot);
    }
  }
}

struct LayerCache {
  std::vector<double> x_in;      // [T x D] residual entering the block
  std::vector<double> n1;        // [T x D] normed attention input
  std::vector<double> r1;        // [T]
  std::vector<double> q, k, v;   // [T x D]
  std::vector<double> attn;      // [T x D] concatenated head outputs
  std::vector<double> h;         // [T x D] residual after attention
  std::vector<double> n2;        // [T x D]
  std::vector<double> r2;        // [T]
  std::vector<double> gate_pre;  // [T x F]
  std::vector<double> up;        // [T x F]
  std::vector<double> act;       // [T x F] silu(gate_pre) * up
};

struct ForwardState {
  std::size_t length = 0;
  std::vector<LayerCache> layers;
  std::vector<double> x_final;  // [T x D]
  std::vector<double> nf;       // [T x D]
  std::vector<double> rf;       // [T]
  std::vector<std::size_t> target_rows;
  std::vector<double> probs;    // [C x V] softmax at target rows
  double loss = 0.0;
};

class Attention {
 public:
  Attention(std::size_t length, std::size_t dim, std::size_t heads,
            const std::vector<bool>& attention_mask)
      : length_(length),
        dim_(dim),
        heads_(heads),
        head_dim_(dim / heads),
        scale_(1.0 / std::sqrt(static_cast<double>(dim / heads))),
        mask_(attention_mask) {}

  void forward(const LayerCache& c, std::span<double> out, Exec exec) const {
    const auto nheads = static_cast<std::ptrdiff_t>(heads_);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static) num_threads(worker_count())
      for (std::ptrdiff_t hh = 0; hh < nheads; ++hh) forward_head(c, out, static_cast<std::size_t>(hh));
    } else {
      for (std::ptrdiff_t hh = 0; hh < nheads; ++hh) forward_head(c, out, static_cast<std::size_t>(hh));
    }
  }

  // Probabilities are recomputed row by row rather than stored, so memory
  // stays O(T * D) per layer.
  void backward(const LayerCache& c, std::span<const double> d_out, std::span<double> dq,
                std::span<double> dk, std::span<double> dv, Exec exec) const {
    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    const auto nheads = static_cast<std::ptrdiff_t>(heads_);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static) num_threads(worker_count())
      for (std::ptrdiff_t hh = 0; hh < nheads; ++hh)
        backward_head(c, d_out, dq, dk, dv, static_cast<std::size_t>(hh));
    } else {
      for (std::ptrdiff_t hh = 0; hh < nheads; ++hh)
        backward_head(c, d_out, dq, dk, dv, static_cast<std::size_t>(hh));
    }
  }

 private:
  // Fills p[0..t] with the softmax over attended keys j <= t; returns false
  // when no key is attended.
  bool row_probs(const LayerCache& c, std::size_t t, std::size_t off, std::vector<double>& p) const {
    const double* qt = c.q.data() + t * dim_ + off;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= t; ++j) {
      if (!mask_[j]) {
        p[j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const double* kj = c.k.data() + j * dim_ + off;
      double s = 0.0;
      for (std::size_t i = 0; i < head_dim_; ++i) s += qt[i] * kj[i];
      s *= scale_;
      p[j] = s;
      mx = std::max(mx, s);
    }
    if (mx == -std::numeric_limits<double>::infinity()) return false;
    double sum = 0.0;
    for (std::size_t j = 0; j <= t; ++j) {
      p[j] = mask_[j] ? std::exp(p[j] - mx) : 0.0;
      sum += p[j];
    }
    for (std::size_t j = 0; j <= t; ++j) p[j] /= sum;
    return true;
  }

  void forward_head(const LayerCache& c, std::span<double> out, std::size_t h) const {
    const std::size_t off = h * head_dim_;
    std::vector<double> p(length_);
    for (std::size_t t = 0; t < length_; ++t) {
      double* ot = out.data() + t * dim_ + off;
      std::fill(ot, ot + head_dim_, 0.0);
      if (!row_probs(c, t, off, p)) continue;
      for (std::size_t j = 0; j <= t; ++j) {
        if (p[j] == 0.0) continue;
        const double* vj = c.v.data() + j * dim_ + off;
        for (std::size_t i = 0; i < head_dim_; ++i) ot[i] += p[j] * vj[i];
      }
    }
  }

  void backward_head(const LayerCache& c, std::span<const double> d_out, std::span<double> dq,
                     std::span<double> dk, std::span<double> dv, std::size_t h) const {
    const std::size_t off = h * head_dim_;
    std::vector<double> p(length_);
    std::vector<double> dp(length_);
    for (std::size_t t = 0; t < length_; ++t) {
      const double* go = d_out.data() + t * dim_ + off;
      bool any = false;
      for (std::size_t i = 0; i < head_dim_; ++i) any = any || go[i] != 0.0;
      if (!any) continue;
      if (!row_probs(c, t, off, p)) continue;
      double weighted = 0.0;
      for (std::size_t j = 0; j <= t; ++j) {
        if (p[j] == 0.0) {
          dp[j] = 0.0;
          continue;
        }
        const double* vj = c.v.data() + j * dim_ + off;
        double s = 0.0;
        for (std::size_t i = 0; i < head_dim_; ++i) s += go[i] * vj[i];
        dp[j] = s;
        weighted += p[j] * s;
        double* dvj = dv.data() + j * dim_ + off;
        for (std::size_t i = 0; i < head_dim_; ++i) dvj[i] += p[j] * go[i];
      }
      const double* qt = c.q.data() + t * dim_ + off;
      double* dqt = dq.data() + t * dim_ + off;
      for (std::size_t j = 0; j <= t; ++j) {
        if (p[j] == 0.0) continue;
        const double ds = p[j] * (dp[j] - weighted) * scale_;
        const double* kj = c.k.data() + j * dim_ + off;
        double* dkj = dk.data() + j * dim_ + off;
        for (std::size_t i = 0; i < head_dim_; ++i) {
          dqt[i] += ds * kj[i];
          dkj[i] += ds * qt[i];
        }
      }
    }
  }

  std::size_t length_;
  std::size_t dim_;
  std::size_t heads_;
  std::size_t head_dim_;
  double scale_;
  const std::vector<bool>& mask_;
};

void check_inputs(const ProbeModel& model, const Trajectory& traj) {
  const auto& cfg = model.config();
  if (traj.response_mask.size() != traj.tokens.size() ||
      traj.attention_mask.size() != traj.tokens.size()) {
    throw InputError("trajectory '" + traj.trajectory_id + "' has masks misaligned with tokens");
  }
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    if (traj.tokens[i] >= cfg.vocab_size) {
      throw InputError("trajectory '" + traj.trajectory_id + "' token " +
                       std::to_string(traj.tokens[i]) + " at position " + std::to_string(i) +
                       " is outside the vocabulary of size " + std::to_string(cfg.vocab_size));
    }
  }
  const std::size_t length = traj.active_length();
  for (std::size_t i = length; i < traj.attention_mask.size(); ++i) {
    if (traj.attention_mask[i]) {
      throw InputError("trajectory '" + traj.trajectory_id +
                       "' has attended tokens after padding");
    }
  }
  if (length > cfg.max_context) {
    throw InputError("trajectory '" + traj.trajectory_id + "' has " + std::to_string(length) +
                     " attended tokens, model max_context is " +
                     std::to_string(cfg.max_context));
  }
}

ForwardState run_forward(const ProbeModel& model, const Trajectory& traj, Exec exec) {
  check_inputs(model, traj);
  const auto& cfg = model.config();
  const std::size_t T = traj.active_length();
  const std::size_t D = cfg.model_dim;
  const std::size_t F = cfg.ffn_hidden_dim;
  const std::size_t V = cfg.vocab_size;

  ForwardState st;
  st.length = T;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    if (traj.response_mask[t + 1]) st.target_rows.push_back(t);
  }
  if (st.target_rows.empty()) {
    throw InputError("trajectory '" + traj.trajectory_id + "' has no valid response token to predict");
  }

  std::vector<double> x(T * D);
  for (std::size_t t = 0; t < T; ++t) {
    const double* te = model.token_embedding().data.data() + traj.tokens[t] * D;
    const double* pe = model.position_embedding().data.data() + t * D;
    for (std::size_t i = 0; i < D; ++i) x[t * D + i] = te[i] + pe[i];
  }

  const Attention attention(T, D, cfg.num_heads, traj.attention_mask);
  st.layers.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const DecoderLayer& w = model.layers()[l];
    LayerCache& c = st.layers[l];
    c.x_in = x;
    c.n1.resize(T * D);
    c.r1.resize(T);
    rmsnorm_forward(c.x_in, w.attn_gain, c.n1, c.r1, T, D);
    c.q.resize(T * D);
    c.k.resize(T * D);
    c.v.resize(T * D);
    kernels::matmul_nt(c.n1, w.wq.span(), c.q, T, D, D, exec);
    kernels::matmul_nt(c.n1, w.wk.span(), c.k, T, D, D, exec);
    kernels::matmul_nt(c.n1, w.wv.span(), c.v, T, D, D, exec);
    c.attn.resize(T * D);
    attention.forward(c, c.attn, exec);

    std::vector<double> proj(T * D);
    kernels::matmul_nt(c.attn, w.wo.span(), proj, T, D, D, exec);
    c.h.resize(T * D);
    for (std::size_t i = 0; i < T * D; ++i) c.h[i] = c.x_in[i] + proj[i];

    c.n2.resize(T * D);
    c.r2.resize(T);
    rmsnorm_forward(c.h, w.ffn_gain, c.n2, c.r2, T, D);
    c.gate_pre.resize(T * F);
    c.up.resize(T * F);
    kernels::matmul_nt(c.n2, w.w_gate.span(), c.gate_pre, T, D, F, exec);
    kernels::matmul_nt(c.n2, w.w_up.span(), c.up, T, D, F, exec);
    c.act.resize(T * F);
    for (std::size_t i = 0; i < T * F; ++i) {
      const double a = c.gate_pre[i];
      c.act[i] = (a * sigmoid(a)) * c.up[i];
    }
    kernels::matmul_nt(c.act, w.w_down.span(), proj, T, F, D, exec);
    for (std::size_t i = 0; i < T * D; ++i) x[i] = c.h[i] + proj[i];
  }

  st.x_final = std::move(x);
  st.nf.resize(T * D);
  st.rf.resize(T);
  rmsnorm_forward(st.x_final, model.final_gain(), st.nf, st.rf, T, D);

  const std::size_t C = st.target_rows.size();
  std::vector<double> rows(C * D);
  for (std::size_t r = 0; r < C; ++r) {
    std::copy_n(st.nf.begin() + static_cast<std::ptrdiff_t>(st.target_rows[r] * D), D,
                rows.begin() + static_cast<std::ptrdiff_t>(r * D));
  }
  st.probs.resize(C * V);
  kernels::matmul_nt(rows, model.unembedding().span(), st.probs, C, D, V, exec);

  double total = 0.0;
  for (std::size_t r = 0; r < C; ++r) {
    double* lr = st.probs.data() + r * V;
    const double mx = *std::max_element(lr, lr + V);
    double sum = 0.0;
    for (std::size_t v = 0; v < V; ++v) sum += std::exp(lr[v] - mx);
    const double log_z = mx + std::log(sum);
    const TokenId target = traj.tokens[st.target_rows[r] + 1];
    total += log_z - lr[target];
    for (std::size_t v = 0; v < V; ++v) lr[v] = std::exp(lr[v] - log_z);
  }
  st.loss = total / static_cast<double>(C);
  return st;
}

// Backpropagates from the loss (times loss_scale). Every probed weight
// gradient is formed in `scratch`, handed to `visit`, then overwritten.
void run_backward(const ProbeModel& model, const Trajectory& traj, const ForwardState& st,
                  double loss_scale, Exec exec, const GroupVisitor& visit) {
  const auto& cfg = model.config();
  const std::size_t T = st.length;
  const std::size_t D = cfg.model_dim;
  const std::size_t F = cfg.ffn_hidden_dim;
  const std::size_t V = cfg.vocab_size;
  const std::size_t C = st.target_rows.size();

  std::vector<double> scratch(std::max(D * D, F * D));
  auto emit = [&](std::size_t layer, Projection p, std::size_t rows, std::size_t cols,
                  std::span<const double> upstream, std::span<const double> input) {
    std::span<double> g(scratch.data(), rows * cols);
    kernels::matmul_tn(upstream, input, g, T, rows, cols, exec);
    visit(layer * kGroupsPerLayer + static_cast<std::size_t>(p), g);
  };

  // d loss / d logits = (softmax - onehot) * scale / C
  std::vector<double> dlogits(C * V);
  const double coef = loss_scale / static_cast<double>(C);
  for (std::size_t r = 0; r < C; ++r) {
    const TokenId target = traj.tokens[st.target_rows[r] + 1];
    for (std::size_t v = 0; v < V; ++v) {
      const double g = st.probs[r * V + v] - (v == target ? 1.0 : 0.0);
      dlogits[r * V + v] = g * coef;
    }
  }
  std::vector<double> drows(C * D);
  kernels::matmul_nn(dlogits, model.unembedding().span(), drows, C, V, D, exec);
  std::vector<double> dnf(T * D, 0.0);
  for (std::size_t r = 0; r < C; ++r) {
    std::copy_n(drows.begin() + static_cast<std::ptrdiff_t>(r * D), D,
                dnf.begin() + static_cast<std::ptrdiff_t>(st.target_rows[r] * D));
  }

  std::vector<double> dx(T * D, 0.0);
  rmsnorm_backward_accumulate(dnf, st.x_final, st.rf, model.final_gain(), dx, T, D);

  const Attention attention(T, D, cfg.num_heads, traj.attention_mask);
  std::vector<double> dm(T * F), da(T * F), du(T * F);
  std::vector<double> dn(T * D), tmp(T * D), dh(T * D), dattn(T * D);
  std::vector<double> dq(T * D), dk(T * D), dv(T * D);

  for (std::size_t li = cfg.num_layers; li-- > 0;) {
    const DecoderLayer& w = model.layers()[li];
    const LayerCache& c = st.layers[li];

    // FFN: x_out = h + act * W_down^T
    emit(li, Projection::down, D, F, dx, c.act);
    kernels::matmul_nn(dx, w.w_down.span(), dm, T, D, F, exec);
    for (std::size_t i = 0; i < T * F; ++i) {
      const double a = c.gate_pre[i];
      const double s = sigmoid(a);
      du[i] = dm[i] * (a * s);
      da[i] = dm[i] * c.up[i] * (s * (1.0 + a * (1.0 - s)));
    }
    emit(li, Projection::up, F, D, du, c.n2);
    emit(li, Projection::gate, F, D, da, c.n2);
    kernels::matmul_nn(da, w.w_gate.span(), dn, T, F, D, exec);
    kernels::matmul_nn(du, w.w_up.span(), tmp, T, F, D, exec);
    for (std::size_t i = 0; i < T * D; ++i) dn[i] += tmp[i];
    dh = dx;
    rmsnorm_backward_accumulate(dn, c.h, c.r2, w.ffn_gain, dh, T, D);

    // Attention: h = x_in + attn * W_o^T
    emit(li, Projection::o, D, D, dh, c.attn);
    kernels::matmul_nn(dh, w.wo.span(), dattn, T, D, D, exec);
    attention.backward(c, dattn, dq, dk, dv, exec);
    emit(li, Projection::v, D, D, dv, c.n1);
    emit(li, Projection::k, D, D, dk, c.n1);
    emit(li, Projection::q, D, D, dq, c.n1);
    kernels::matmul_nn(dq, w.wq.span(), dn, T, D, D, exec);
    kernels::matmul_nn(dk, w.wk.span(), tmp, T, D, D, exec);
    for (std::size_t i = 0; i < T * D; ++i) dn[i] += tmp[i];
    kernels::matmul_nn(dv, w.wv.span(), tmp, T, D, D, exec);
    for (std::size_t i = 0; i < T * D; ++i) dn[i] += tmp[i];
    dx = dh;
    rmsnorm_backward_accumulate(dn, c.x_in, c.r1, w.attn_gain, dx, T, D);
  }
}

}  // namespace

double forward_loss(const ProbeModel& model, const Trajectory& trajectory, Exec exec) {
  return run_forward(model, trajectory, exec).loss;
}

namespace detail {

GradientVector probe_gradients_scaled(const ProbeModel& model, const Trajectory& trajectory,
                                      double loss_scale, Exec exec) {
  const ForwardState st = run_forward(model, trajectory, exec);
  GradientVector out;
  out.trajectory_id = trajectory.trajectory_id;
  out.norms.assign(model.group_count(), 0.0);
  out.group_names = model.group_names();
  out.group_param_counts = model.group_param_counts();
  out.loss_value = st.loss * loss_scale;
  run_backward(model, trajectory, st, loss_scale, exec,
               [&out](std::size_t index, std::span<const double> grad) {
                 out.norms[index] = kernels::frobenius_norm(grad);
               });
  return out;
}

}  // namespace detail

GradientVector probe_gradients(const ProbeModel& model, const Trajectory& trajectory, Exec exec) {
  return detail::probe_gradients_scaled(model, trajectory, 1.0, exec);
}

std::vector<GradientVector> probe_corpus(const ProbeModel& model,
                                         std::span<const Trajectory> trajectories, Exec exec) {
  std::vector<GradientVector> results(trajectories.size());
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      results[i] = probe_gradients(model, trajectories[i]);
    }
    return results;
  }

  std::vector<std::exception_ptr> errors(trajectories.size());
  const auto n = static_cast<std::ptrdiff_t>(trajectories.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      results[idx] = probe_gradients(model, trajectories[idx]);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

Matrix group_gradient(const ProbeModel& model, const Trajectory& trajectory,
                      std::size_t group_index) {
  const Matrix& shape = model.group(group_index);
  Matrix grad(shape.rows, shape.cols);
  const ForwardState st = run_forward(model, trajectory, Exec::serial);
  run_backward(model, trajectory, st, 1.0, Exec::serial,
               [&](std::size_t index, std::span<const double> g) {
                 if (index == group_index) std::copy(g.begin(), g.end(), grad.data.begin());
               });
  return grad;
}

FiniteDifferenceResult finite_difference_check(ProbeModel& model, const Trajectory& trajectory,
                                               std::size_t group_index,
                                               std::span<const MatrixEntry> entries,
                                               double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InputError("finite-difference step must be positive and finite");
  }
  Matrix& w = model.group(group_index);
  for (const auto& e : entries) {
    if (e.row >= w.rows || e.col >= w.cols) {
      throw InputError("entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                       ") outside " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                       " group " + model.group_name(group_index));
    }
  }

  const Matrix analytic = group_gradient(model, trajectory, group_index);
  FiniteDifferenceResult result;
  for (const auto& e : entries) {
    double& slot = w.at(e.row, e.col);
    const double original = slot;
    slot = original + step;
    const double plus = forward_loss(model, trajectory);
    slot = original - step;
    const double minus = forward_loss(model, trajectory);
    slot = original;

    const double a = analytic.at(e.row, e.col);
    const double n = (plus - minus) / (2.0 * step);
    if (plus == minus && a != 0.0) result.degenerate_step = true;
    const double denom = std::max({std::abs(a), std::abs(n), kFiniteDifferenceFloor});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(a - n) / denom);
    result.analytic.push_back(a);
    result.numeric.push_back(n);
  }
  return result;
}

}  // namespace gradroute
