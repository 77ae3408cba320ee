#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "usee/rng.hpp"
#include "usee/sde.hpp"

namespace usee {

// Conditioning interpolation weight on the source spectrogram: 1 at t_max
// (earliest reverse step), decaying toward later steps.
// Training-time t sampler with density proportional to sigma(t)^2 (rejection
// against the maximum at t_max). The sigma-weighted DSM residual carries a
// 1/sigma^2 factor, so uniform t lets the smallest t dominate every gradient;
// this density makes the expected contribution of each t region comparable.
inline double sample_t_sigma2(Rng& rng, const SdeSchedule& sched) {
  const double s2max = kernel_variance(sched.t_max, sched);
  for (;;) {
    const double t = rng.uniform(sched.t_min, sched.t_max);
    if (rng.uniform(0.0, 1.0) * s2max <= kernel_variance(t, sched)) return t;
  }
}

inline double cond_interp_weight(double t, const SdeSchedule& sched) {
  if (sched.interp_mode == InterpMode::Linear)
    return (t - sched.t_min) / (sched.t_max - sched.t_min);
  return std::exp(-sched.gamma * (sched.t_max - t));
}

// Per-frame encoder (2 hidden layers) + single-head cross-attention over
// text embeddings + linear decoder. The attention context (queried from the
// first hidden layer) is injected into the second layer's pre-activation, so
// prompt and frame content mix inside a nonlinearity and the prompt can gate
// per-channel gains rather than only add an offset.
// The network output parameterizes the
// score through the denoised-mean form
//   s_theta(x, ...) = (out - x) / sigma(t)^2,
// i.e. the output is an estimate of the perturbation-kernel mean. Compared
// with emitting the scaled noise directly, errors in the output produce a
// bounded pull toward the estimate instead of a 1/sigma-amplified kick, which
// keeps the reverse sampler stable at small t.
struct ScoreNetConfig {
  std::size_t state_channels = 2;  // real channels per frame (2*bins for complex states)
  std::size_t cond_channels = 2;
  std::size_t acoustic_dim = 0;
  std::size_t context_radius = 0;  // neighbor frames of state/cond included per side
  std::size_t hidden = 128;
  std::size_t attn_dim = 64;
  std::size_t text_dim = 64;
  std::size_t time_freqs = 8;
  std::vector<std::string> vocab;  // index 0 reserved for UNK

  std::size_t time_feat_dim() const { return 2 * time_freqs + 1; }  // sin/cos + log sigma
  std::size_t context_frames() const { return 2 * context_radius + 1; }
  std::size_t in_dim() const {
    return context_frames() * (state_channels + cond_channels) + acoustic_dim + time_feat_dim();
  }
};

struct ScoreNetParams {
  ScoreNetConfig cfg;
  std::vector<double> flat;

  struct Slice {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;  // 1 for biases
    std::size_t size() const { return rows * cols; }
  };

  std::vector<Slice> slices() const {
    const auto& c = cfg;
    std::vector<Slice> s;
    std::size_t off = 0;
    auto add = [&](const std::string& n, std::size_t r, std::size_t k) {
      s.push_back({n, off, r, k});
      off += r * k;
    };
    add("emb", c.vocab.size(), c.text_dim);
    add("W1", c.hidden, c.in_dim());
    add("b1", c.hidden, 1);
    add("W2", c.hidden, c.hidden);
    add("b2", c.hidden, 1);
    add("Wq", c.attn_dim, c.hidden);
    add("Wk", c.attn_dim, c.text_dim);
    add("Wv", c.attn_dim, c.text_dim);
    add("Wo", c.hidden, c.attn_dim);
    // feature-wise modulation from the attention context: per-feature scale
    // and shift on the first hidden layer. The scale term is a genuine
    // product between prompt context and frame features; without it the
    // prompt can only shift activations, and conditioning that must *gate*
    // content (e.g. how fast a reverberant tail decays) is unlearnable.
    add("Wfs", c.hidden, c.attn_dim);
    add("Wfb", c.hidden, c.attn_dim);
    add("Wd", c.state_channels, c.hidden);
    add("bd", c.state_channels, 1);
    // linear skip from the current frame's state and condition channels to the
    // output: per-bin linear maps (the dominant part of a denoising mask) stay
    // representable even where the tanh encoder saturates
    add("Ws", c.state_channels, c.state_channels + c.cond_channels);
    // per-channel sigmoid gate on the skip path, computed from the encoder
    // features: lets the net shut the skip off in silent frames (otherwise a
    // fixed linear skip leaks a constant fraction of the input noise)
    add("Wg", c.state_channels, c.hidden);
    add("bg", c.state_channels, 1);
    return s;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& s : slices()) n += s.size();
    return n;
  }

  const double* at(const char* name) const {
    for (const auto& s : slices())
      if (s.name == name) return flat.data() + s.offset;
    throw std::logic_error("unknown slice");
  }
  double* at(const char* name) {
    return const_cast<double*>(static_cast<const ScoreNetParams*>(this)->at(name));
  }
};

inline ScoreNetParams init_params(const ScoreNetConfig& cfg, Rng& rng) {
  ScoreNetParams p;
  p.cfg = cfg;
  p.flat.assign(p.param_count(), 0.0);
  for (const auto& s : p.slices()) {
    if (s.name == "bg") {  // gate starts mostly open
      std::fill_n(p.flat.begin() + static_cast<std::ptrdiff_t>(s.offset), s.size(), 2.0);
      continue;
    }
    if (s.cols == 1) continue;      // biases stay zero
    if (s.name == "Ws") continue;   // skip path starts disabled
    if (s.name == "Wg") continue;   // gate driven by its bias at init
    if (s.name == "Wfs" || s.name == "Wfb") continue;  // modulation starts neutral
    double scale = std::sqrt(1.0 / static_cast<double>(s.cols));
    if (s.name == "Wd") scale *= 0.01;  // near-zero score at init
    if (s.name == "emb") scale = 0.5;
    for (std::size_t i = 0; i < s.size(); ++i)
      p.flat[s.offset + i] = rng.uniform(-scale, scale);
  }
  return p;
}

// Everything the network needs for one item. Frame-major layout throughout.
struct NetInput {
  std::size_t num_frames = 0;
  std::vector<double> state;     // num_frames * state_channels
  std::vector<double> cond;      // num_frames * cond_channels
  std::vector<double> acoustic;  // num_frames * acoustic_dim
  std::vector<int> tokens;       // text token ids; empty = attention skipped
  double t = 0.0;
  double sigma = 1.0;  // sigma(t), used for the time features and score scaling
};

namespace detail {

inline void matvec(const double* W, std::size_t rows, std::size_t cols, const double* x,
                   double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = W + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// out += W^T dy
inline void matvec_t_acc(const double* W, std::size_t rows, std::size_t cols, const double* dy,
                         double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double d = dy[r];
    const double* wr = W + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * d;
  }
}

// dW += dy x^T
inline void outer_acc(double* dW, std::size_t rows, std::size_t cols, const double* dy,
                      const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double d = dy[r];
    double* wr = dW + r * cols;
    for (std::size_t c = 0; c < cols; ++c) wr[c] += d * x[c];
  }
}

inline void time_features(const ScoreNetConfig& cfg, double t, double sigma, double* out) {
  for (std::size_t i = 0; i < cfg.time_freqs; ++i) {
    double w = std::ldexp(3.14159265358979323846, static_cast<int>(i));  // pi * 2^i
    out[2 * i] = std::sin(w * t);
    out[2 * i + 1] = std::cos(w * t);
  }
  out[2 * cfg.time_freqs] = std::log(std::max(sigma, 1e-12));
}

// gather the per-frame input vector (with frame context, zero padded at edges)
inline void build_frame_input(const ScoreNetConfig& cfg, const NetInput& in, std::size_t f,
                              const double* tfeat, double* u) {
  const std::size_t C = cfg.state_channels, Cc = cfg.cond_channels;
  const long long R = static_cast<long long>(cfg.context_radius);
  std::size_t pos = 0;
  for (long long d = -R; d <= R; ++d) {
    long long g = static_cast<long long>(f) + d;
    bool ok = g >= 0 && g < static_cast<long long>(in.num_frames);
    for (std::size_t c = 0; c < C; ++c)
      u[pos++] = ok ? in.state[static_cast<std::size_t>(g) * C + c] : 0.0;
  }
  for (long long d = -R; d <= R; ++d) {
    long long g = static_cast<long long>(f) + d;
    bool ok = g >= 0 && g < static_cast<long long>(in.num_frames);
    for (std::size_t c = 0; c < Cc; ++c)
      u[pos++] = ok ? in.cond[static_cast<std::size_t>(g) * Cc + c] : 0.0;
  }
  for (std::size_t a = 0; a < cfg.acoustic_dim; ++a)
    u[pos++] = in.acoustic.empty() ? 0.0 : in.acoustic[f * cfg.acoustic_dim + a];
  for (std::size_t i = 0; i < cfg.time_feat_dim(); ++i) u[pos++] = tfeat[i];
}

struct ForwardCache {
  std::vector<double> tfeat;
  std::vector<double> u;       // per frame inputs, Tf * I
  std::vector<double> h1, h2;  // post-tanh activations, Tf * H
  std::vector<double> fs, h1m; // film scales and modulated h1, Tf * H
  std::vector<double> q;       // Tf * K
  std::vector<double> attn;    // Tf * n_tokens
  std::vector<double> ctx;     // Tf * K
  std::vector<double> keys, vals;  // n_tokens * K
  std::vector<double> embs;        // n_tokens * E
  std::vector<double> gate;        // Tf * C, sigmoid skip gates
  std::vector<double> skipv;       // Tf * C, ungated skip values
  std::vector<double> out;         // Tf * C (raw, before / sigma)
};

inline void net_forward_cached(const ScoreNetParams& p, const NetInput& in, ForwardCache& cc) {
  const auto& cfg = p.cfg;
  const std::size_t Tf = in.num_frames, I = cfg.in_dim(), H = cfg.hidden, K = cfg.attn_dim,
                    E = cfg.text_dim, C = cfg.state_channels, Nt = in.tokens.size();
  if (in.state.size() != Tf * C) throw std::invalid_argument("net: state size mismatch");
  if (in.cond.size() != Tf * cfg.cond_channels)
    throw std::invalid_argument("net: frame-count mismatch between state and condition");

  cc.tfeat.resize(cfg.time_feat_dim());
  time_features(cfg, in.t, in.sigma, cc.tfeat.data());
  cc.u.resize(Tf * I);
  cc.h1.resize(Tf * H);
  cc.h2.resize(Tf * H);
  cc.fs.assign(Tf * H, 0.0);
  cc.h1m.resize(Tf * H);
  cc.gate.resize(Tf * C);
  cc.skipv.resize(Tf * C);
  cc.out.resize(Tf * C);
  cc.q.assign(Tf * K, 0.0);
  cc.attn.assign(Tf * Nt, 0.0);
  cc.ctx.assign(Tf * K, 0.0);
  cc.keys.assign(Nt * K, 0.0);
  cc.vals.assign(Nt * K, 0.0);
  cc.embs.assign(Nt * E, 0.0);

  const double* emb = p.at("emb");
  const double* W1 = p.at("W1");
  const double* b1 = p.at("b1");
  const double* W2 = p.at("W2");
  const double* b2 = p.at("b2");
  const double* Wq = p.at("Wq");
  const double* Wk = p.at("Wk");
  const double* Wv = p.at("Wv");
  const double* Wo = p.at("Wo");
  const double* Wfs = p.at("Wfs");
  const double* Wfb = p.at("Wfb");
  const double* Wd = p.at("Wd");
  const double* bd = p.at("bd");
  const double* Ws = p.at("Ws");
  const double* Wg = p.at("Wg");
  const double* bg = p.at("bg");

  for (std::size_t j = 0; j < Nt; ++j) {
    int id = in.tokens[j];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab.size())
      throw std::invalid_argument("net: token id out of range");
    const double* e = emb + static_cast<std::size_t>(id) * E;
    std::copy(e, e + E, cc.embs.data() + j * E);
    matvec(Wk, K, E, e, cc.keys.data() + j * K);
    matvec(Wv, K, E, e, cc.vals.data() + j * K);
  }

  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(K));
  std::vector<double> logits(Nt), o(H);
  for (std::size_t f = 0; f < Tf; ++f) {
    double* u = cc.u.data() + f * I;
    build_frame_input(cfg, in, f, cc.tfeat.data(), u);
    double* h1 = cc.h1.data() + f * H;
    matvec(W1, H, I, u, h1);
    for (std::size_t i = 0; i < H; ++i) h1[i] = std::tanh(h1[i] + b1[i]);

    // Cross-attention context modulates the first hidden layer feature-wise
    // (scale + shift) and enters the second layer's pre-activation, so prompt
    // and frame content interact multiplicatively, not just additively.
    double* h1m = cc.h1m.data() + f * H;
    std::copy(h1, h1 + H, h1m);
    double* h2 = cc.h2.data() + f * H;
    if (Nt > 0) {
      double* q = cc.q.data() + f * K;
      matvec(Wq, K, H, h1, q);
      double mx = -1e300;
      for (std::size_t j = 0; j < Nt; ++j) {
        double l = 0.0;
        for (std::size_t i = 0; i < K; ++i) l += q[i] * cc.keys[j * K + i];
        logits[j] = l * inv_sqrt_k;
        mx = std::max(mx, logits[j]);
      }
      double zsum = 0.0;
      for (std::size_t j = 0; j < Nt; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        zsum += logits[j];
      }
      double* ctx = cc.ctx.data() + f * K;
      for (std::size_t j = 0; j < Nt; ++j) {
        double a = logits[j] / zsum;
        cc.attn[f * Nt + j] = a;
        for (std::size_t i = 0; i < K; ++i) ctx[i] += a * cc.vals[j * K + i];
      }
      double* fsf = cc.fs.data() + f * H;
      matvec(Wfs, H, K, ctx, fsf);
      matvec(Wfb, H, K, ctx, o.data());  // reuse o as the shift buffer
      for (std::size_t i = 0; i < H; ++i) h1m[i] = h1[i] * (1.0 + fsf[i]) + o[i];
      matvec(W2, H, H, h1m, h2);
      matvec(Wo, H, K, ctx, o.data());
      for (std::size_t i = 0; i < H; ++i) h2[i] += o[i];
    } else {
      matvec(W2, H, H, h1m, h2);
    }
    for (std::size_t i = 0; i < H; ++i) h2[i] = std::tanh(h2[i] + b2[i]);

    double* out = cc.out.data() + f * C;
    matvec(Wd, C, H, h2, out);
    const std::size_t Cc = cfg.cond_channels;
    const double* sf = in.state.data() + f * C;
    const double* cf = in.cond.data() + f * Cc;
    double* gf = cc.gate.data() + f * C;
    double* kf = cc.skipv.data() + f * C;
    for (std::size_t c = 0; c < C; ++c) {
      const double* wr = Ws + c * (C + Cc);
      double acc = 0.0;
      for (std::size_t j = 0; j < C; ++j) acc += wr[j] * sf[j];
      for (std::size_t j = 0; j < Cc; ++j) acc += wr[C + j] * cf[j];
      kf[c] = acc;
      double pre = bg[c];
      const double* wg = Wg + c * H;
      for (std::size_t i = 0; i < H; ++i) pre += wg[i] * h2[i];
      gf[c] = 1.0 / (1.0 + std::exp(-pre));
      out[c] += bd[c] + gf[c] * acc;
    }
  }
}

// backprop of d(loss)/d(raw output) into the flat gradient vector
inline void net_backward_cached(const ScoreNetParams& p, const NetInput& in,
                                const ForwardCache& cc, const std::vector<double>& d_out,
                                std::vector<double>& grad) {
  const auto& cfg = p.cfg;
  const std::size_t Tf = in.num_frames, I = cfg.in_dim(), H = cfg.hidden, K = cfg.attn_dim,
                    E = cfg.text_dim, C = cfg.state_channels, Nt = in.tokens.size();
  if (grad.size() != p.flat.size()) throw std::invalid_argument("net: grad buffer size");

  ScoreNetParams gview;
  gview.cfg = cfg;
  gview.flat.swap(grad);  // borrow for slice addressing
  double* g_emb = gview.at("emb");
  double* gW1 = gview.at("W1");
  double* gb1 = gview.at("b1");
  double* gW2 = gview.at("W2");
  double* gb2 = gview.at("b2");
  double* gWq = gview.at("Wq");
  double* gWk = gview.at("Wk");
  double* gWv = gview.at("Wv");
  double* gWo = gview.at("Wo");
  double* gWfs = gview.at("Wfs");
  double* gWfb = gview.at("Wfb");
  double* gWd = gview.at("Wd");
  double* gbd = gview.at("bd");
  double* gWs = gview.at("Ws");
  double* gWg = gview.at("Wg");
  double* gbg = gview.at("bg");
  const double* W2 = p.at("W2");
  const double* Wq = p.at("Wq");
  const double* Wk = p.at("Wk");
  const double* Wv = p.at("Wv");
  const double* Wo = p.at("Wo");
  const double* Wfs = p.at("Wfs");
  const double* Wfb = p.at("Wfb");
  const double* Wd = p.at("Wd");
  const double* Wg = p.at("Wg");

  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(K));
  std::vector<double> dh2(H), dctx(K), dq(K), dl(Nt), dh1(H), dp1(H), dp2(H), dh1m(H), dfs(H);
  std::vector<double> dkeys(Nt * K, 0.0), dvals(Nt * K, 0.0);

  for (std::size_t f = 0; f < Tf; ++f) {
    const double* dout = d_out.data() + f * C;
    const double* h2 = cc.h2.data() + f * H;
    const double* h1 = cc.h1.data() + f * H;
    const double* u = cc.u.data() + f * I;

    outer_acc(gWd, C, H, dout, h2);
    for (std::size_t c = 0; c < C; ++c) gbd[c] += dout[c];
    std::fill(dh2.begin(), dh2.end(), 0.0);
    matvec_t_acc(Wd, C, H, dout, dh2.data());
    {
      const std::size_t Cc = cfg.cond_channels;
      const double* sf = in.state.data() + f * C;
      const double* cf = in.cond.data() + f * Cc;
      const double* gf = cc.gate.data() + f * C;
      const double* kf = cc.skipv.data() + f * C;
      for (std::size_t c = 0; c < C; ++c) {
        double* wr = gWs + c * (C + Cc);
        const double d = dout[c] * gf[c];  // through the gate
        for (std::size_t j = 0; j < C; ++j) wr[j] += d * sf[j];
        for (std::size_t j = 0; j < Cc; ++j) wr[C + j] += d * cf[j];
        // gate pre-activation gradient
        const double dpre = dout[c] * kf[c] * gf[c] * (1.0 - gf[c]);
        gbg[c] += dpre;
        double* wg = gWg + c * H;
        const double* wgp = Wg + c * H;
        for (std::size_t i = 0; i < H; ++i) {
          wg[i] += dpre * h2[i];
          dh2[i] += dpre * wgp[i];
        }
      }
    }

    for (std::size_t i = 0; i < H; ++i) dp2[i] = dh2[i] * (1.0 - h2[i] * h2[i]);
    outer_acc(gW2, H, H, dp2.data(), cc.h1m.data() + f * H);
    for (std::size_t i = 0; i < H; ++i) gb2[i] += dp2[i];
    std::fill(dh1m.begin(), dh1m.end(), 0.0);
    matvec_t_acc(W2, H, H, dp2.data(), dh1m.data());
    std::fill(dh1.begin(), dh1.end(), 0.0);

    if (Nt > 0) {
      const double* ctx = cc.ctx.data() + f * K;
      const double* q = cc.q.data() + f * K;
      const double* a = cc.attn.data() + f * Nt;
      const double* fsf = cc.fs.data() + f * H;
      outer_acc(gWo, H, K, dp2.data(), ctx);
      std::fill(dctx.begin(), dctx.end(), 0.0);
      matvec_t_acc(Wo, H, K, dp2.data(), dctx.data());

      // feature-wise modulation backprop
      for (std::size_t i = 0; i < H; ++i) dfs[i] = dh1m[i] * h1[i];
      outer_acc(gWfs, H, K, dfs.data(), ctx);
      outer_acc(gWfb, H, K, dh1m.data(), ctx);
      matvec_t_acc(Wfs, H, K, dfs.data(), dctx.data());
      matvec_t_acc(Wfb, H, K, dh1m.data(), dctx.data());
      for (std::size_t i = 0; i < H; ++i) dh1[i] += dh1m[i] * (1.0 + fsf[i]);

      double dsum = 0.0;
      for (std::size_t j = 0; j < Nt; ++j) {
        double da = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
          da += cc.vals[j * K + i] * dctx[i];
          dvals[j * K + i] += a[j] * dctx[i];
        }
        dl[j] = da;
      }
      for (std::size_t j = 0; j < Nt; ++j) dsum += a[j] * dl[j];
      std::fill(dq.begin(), dq.end(), 0.0);
      for (std::size_t j = 0; j < Nt; ++j) {
        double dlj = a[j] * (dl[j] - dsum) * inv_sqrt_k;
        for (std::size_t i = 0; i < K; ++i) {
          dq[i] += dlj * cc.keys[j * K + i];
          dkeys[j * K + i] += dlj * q[i];
        }
      }
      outer_acc(gWq, K, H, dq.data(), h1);
      matvec_t_acc(Wq, K, H, dq.data(), dh1.data());
    } else {
      for (std::size_t i = 0; i < H; ++i) dh1[i] += dh1m[i];
    }

    for (std::size_t i = 0; i < H; ++i) dp1[i] = dh1[i] * (1.0 - h1[i] * h1[i]);
    outer_acc(gW1, H, I, dp1.data(), u);
    for (std::size_t i = 0; i < H; ++i) gb1[i] += dp1[i];
  }

  // token-shared projections and embedding rows
  std::vector<double> de(E);
  for (std::size_t j = 0; j < Nt; ++j) {
    const double* e = cc.embs.data() + j * E;
    outer_acc(gWk, K, E, dkeys.data() + j * K, e);
    outer_acc(gWv, K, E, dvals.data() + j * K, e);
    std::fill(de.begin(), de.end(), 0.0);
    matvec_t_acc(Wk, K, E, dkeys.data() + j * K, de.data());
    matvec_t_acc(Wv, K, E, dvals.data() + j * K, de.data());
    double* row = g_emb + static_cast<std::size_t>(in.tokens[j]) * E;
    for (std::size_t i = 0; i < E; ++i) row[i] += de[i];
  }

  gview.flat.swap(grad);  // give the buffer back
}

}  // namespace detail

// raw network output: the estimate of the perturbation-kernel mean
inline std::vector<double> net_forward(const ScoreNetParams& p, const NetInput& in) {
  detail::ForwardCache cc;
  detail::net_forward_cached(p, in, cc);
  return cc.out;
}

// score estimate s_theta = (out - x) / sigma(t)^2
inline std::vector<double> net_score(const ScoreNetParams& p, const NetInput& in) {
  auto out = net_forward(p, in);
  const double inv = 1.0 / std::max(in.sigma * in.sigma, 1e-24);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - in.state[i]) * inv;
  return out;
}

// One training item; t and z are pre-sampled so the loss is deterministic.
struct TrainItem {
  std::size_t num_frames = 0;
  std::vector<double> x0;        // Tf * C, channel representation of the target state
  std::vector<double> y;         // Tf * C, source state
  std::vector<double> acoustic;  // Tf * A
  std::vector<int> tokens;
  double t = 0.5;
  std::vector<double> z;  // Tf * C standard normal
};

using TrainBatch = std::vector<TrainItem>;

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Denoising score matching with sigma(t) weighting:
//   loss = mean over items of mean_i (sigma * s_theta(x_t)_i + z_i)^2
// With the denoised-mean parameterization the residual reduces to
//   sigma * s + z = (out - x_t)/sigma + z = (out - mu)/sigma,
// whose minimizer is out = E[mu | x_t, y, c], i.e. the true score.
inline LossGrad dsm_loss(const ScoreNetParams& p, const TrainBatch& batch,
                         const SdeSchedule& sched) {
  if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  LossGrad out;
  out.grad.assign(p.flat.size(), 0.0);
  detail::ForwardCache cc;
  const std::size_t C = p.cfg.state_channels;
  for (const auto& item : batch) {
    const std::size_t n = item.num_frames * C;
    if (item.x0.size() != n || item.y.size() != n || item.z.size() != n)
      throw std::invalid_argument("dsm_loss: item shape mismatch");
    const double sigma = kernel_std(item.t, sched);
    const double w = mean_weight(item.t, sched);
    NetInput in;
    in.num_frames = item.num_frames;
    in.t = item.t;
    in.sigma = sigma;
    in.acoustic = item.acoustic;
    in.tokens = item.tokens;
    in.state.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      in.state[i] = w * item.x0[i] + (1.0 - w) * item.y[i] + sigma * item.z[i];
    const double wc = cond_interp_weight(item.t, sched);
    in.cond.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      in.cond[i] = wc * item.y[i] + (1.0 - wc) * in.state[i];

    detail::net_forward_cached(p, in, cc);
    std::vector<double> d(n);
    const double scale = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(n));
    const double inv_sigma = 1.0 / std::max(sigma, 1e-12);
    double item_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = (cc.out[i] - in.state[i]) * inv_sigma + item.z[i];
      item_loss += r * r;
      d[i] = 2.0 * r * scale * inv_sigma;
    }
    out.loss += item_loss * scale;
    detail::net_backward_cached(p, in, cc, d, out.grad);
  }
  return out;
}

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t steps = 1000;
  std::size_t log_every = 10;
};

struct AdamState {
  std::vector<double> m, v;
  std::size_t step = 0;
};

inline void adam_step(ScoreNetParams& p, const std::vector<double>& grad, AdamState& st,
                      const OptimizerConfig& oc) {
  if (st.m.empty()) {
    st.m.assign(p.flat.size(), 0.0);
    st.v.assign(p.flat.size(), 0.0);
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(oc.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(oc.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < p.flat.size(); ++i) {
    st.m[i] = oc.beta1 * st.m[i] + (1.0 - oc.beta1) * grad[i];
    st.v[i] = oc.beta2 * st.v[i] + (1.0 - oc.beta2) * grad[i] * grad[i];
    p.flat[i] -= oc.learning_rate * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + oc.eps);
  }
}

struct TrainResult {
  std::vector<std::pair<std::size_t, double>> loss_curve;  // (step, loss)
};

// minibatch DSM training loop; deterministic under a fixed rng seed
inline TrainResult train(ScoreNetParams& p, const std::function<TrainBatch(Rng&)>& next_batch,
                         const SdeSchedule& sched, const OptimizerConfig& oc, Rng& rng,
                         AdamState* resume_state = nullptr,
                         const std::function<void(std::size_t, double)>& on_log = {}) {
  AdamState local;
  AdamState& st = resume_state ? *resume_state : local;
  TrainResult res;
  for (std::size_t s = 0; s < oc.steps; ++s) {
    auto batch = next_batch(rng);
    auto lg = dsm_loss(p, batch, sched);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(st.step + 1));
    adam_step(p, lg.grad, st, oc);
    if (s % oc.log_every == 0 || s + 1 == oc.steps) {
      res.loss_curve.emplace_back(st.step, lg.loss);
      if (on_log) on_log(st.step, lg.loss);
    }
  }
  return res;
}

}  // namespace usee
