#include "aerotrack/seqnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aerotrack/errors.hpp"
#include "json.hpp"

namespace aerotrack {

using nlohmann::json;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_uniform(std::vector<double>& v, Rng& rng, double s) {
  for (auto& x : v) x = rng.uniform(-s, s);
}

void fill_uniform(Mat& m, Rng& rng, double s) { fill_uniform(m.data(), rng, s); }

std::vector<double> mat_vec(const Mat& m, const std::vector<double>& v) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c) * v[c];
    out[r] = s;
  }
  return out;
}

// out[c] += m^T dz, i.e. out[c] += sum_r m(r,c)*dz[r]
void add_mat_t_vec(const Mat& m, const std::vector<double>& dz, std::vector<double>& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double d = dz[r];
    if (d == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c) * d;
  }
}

// grad += dz * x^T
void add_outer(Mat& grad, const std::vector<double>& dz, const std::vector<double>& x) {
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    const double d = dz[r];
    if (d == 0.0) continue;
    for (std::size_t c = 0; c < grad.cols(); ++c) grad(r, c) += d * x[c];
  }
}

void add_scaled(std::vector<double>& acc, const std::vector<double>& v, double s) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * v[i];
}

}  // namespace

// --- parameter containers -----------------------------------------------------

LstmParams LstmParams::zeros(int input_dim, int hidden) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  const auto h = static_cast<std::size_t>(hidden);
  for (int g = 0; g < 4; ++g) {
    p.w[static_cast<std::size_t>(g)] = Mat(h, static_cast<std::size_t>(input_dim));
    p.u[static_cast<std::size_t>(g)] = Mat(h, h);
    p.b[static_cast<std::size_t>(g)].assign(h, 0.0);
  }
  p.attn_vec.assign(h, 0.0);
  p.attn_bias = 0.0;
  return p;
}

LstmParams LstmParams::init(int input_dim, int hidden, Rng& rng) {
  LstmParams p = zeros(input_dim, hidden);
  const double sw = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double su = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int g = 0; g < 4; ++g) {
    fill_uniform(p.w[static_cast<std::size_t>(g)], rng, sw);
    fill_uniform(p.u[static_cast<std::size_t>(g)], rng, su);
  }
  // forget-gate bias starts at 1 so early training remembers by default
  std::fill(p.b[1].begin(), p.b[1].end(), 1.0);
  fill_uniform(p.attn_vec, rng, su);
  return p;
}

MlpParams MlpParams::zeros(const std::vector<int>& dims) {
  if (dims.size() < 2) throw NumericError("MlpParams: need at least two dims");
  MlpParams p;
  p.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    p.weights.emplace_back(static_cast<std::size_t>(dims[l + 1]), static_cast<std::size_t>(dims[l]));
    p.biases.emplace_back(static_cast<std::size_t>(dims[l + 1]), 0.0);
  }
  return p;
}

MlpParams MlpParams::init(const std::vector<int>& dims, Rng& rng) {
  MlpParams p = zeros(dims);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    fill_uniform(p.weights[l], rng, s);
    fill_uniform(p.biases[l], rng, s);
  }
  return p;
}

PointSetRegressorParams PointSetRegressorParams::zeros(int enc_hidden, int feat, int head_hidden) {
  PointSetRegressorParams p;
  p.encoder = MlpParams::zeros({3, enc_hidden, feat});
  p.head = MlpParams::zeros({feat, head_hidden, 3});
  return p;
}

PointSetRegressorParams PointSetRegressorParams::init(Rng& rng, int enc_hidden, int feat,
                                                      int head_hidden) {
  PointSetRegressorParams p;
  p.encoder = MlpParams::init({3, enc_hidden, feat}, rng);
  p.head = MlpParams::init({feat, head_hidden, 3}, rng);
  return p;
}

std::vector<TensorRef> tensor_refs(LstmParams& p) {
  static const char* gate_names[4] = {"i", "f", "g", "o"};
  std::vector<TensorRef> refs;
  for (int g = 0; g < 4; ++g) {
    refs.push_back({std::string("lstm.w_") + gate_names[g], &p.w[static_cast<std::size_t>(g)].data()});
    refs.push_back({std::string("lstm.u_") + gate_names[g], &p.u[static_cast<std::size_t>(g)].data()});
    refs.push_back({std::string("lstm.b_") + gate_names[g], &p.b[static_cast<std::size_t>(g)]});
  }
  refs.push_back({"lstm.attn_vec", &p.attn_vec});
  return refs;  // attn_bias handled separately (scalar)
}

std::vector<TensorRef> tensor_refs(MlpParams& p, const std::string& prefix) {
  std::vector<TensorRef> refs;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    refs.push_back({prefix + ".w" + std::to_string(l), &p.weights[l].data()});
    refs.push_back({prefix + ".b" + std::to_string(l), &p.biases[l]});
  }
  return refs;
}

std::vector<TensorRef> tensor_refs(PointSetRegressorParams& p) {
  auto refs = tensor_refs(p.encoder, "regressor.encoder");
  auto head = tensor_refs(p.head, "regressor.head");
  refs.insert(refs.end(), head.begin(), head.end());
  return refs;
}

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  auto refs = tensor_refs(p.lstm);
  auto c = tensor_refs(p.classifier, "classifier");
  auto r = tensor_refs(p.regressor);
  refs.insert(refs.end(), c.begin(), c.end());
  refs.insert(refs.end(), r.begin(), r.end());
  return refs;
}

// --- LSTM with attention ---------------------------------------------------------

LstmForward lstm_attn_forward(const LstmParams& p, const Mat& seq, const std::vector<bool>& mask) {
  const std::size_t w = mask.size();
  if (seq.rows() != w || seq.cols() != static_cast<std::size_t>(p.input_dim))
    throw NumericError("lstm_attn_forward: sequence shape mismatch");
  const auto h = static_cast<std::size_t>(p.hidden);

  LstmForward f;
  f.gates.resize(w);
  f.h.assign(w, std::vector<double>(h, 0.0));
  f.c.assign(w, std::vector<double>(h, 0.0));
  f.attn.assign(w, 0.0);
  f.attn_logits.assign(w, 0.0);

  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0), x(static_cast<std::size_t>(p.input_dim));
  bool any_present = false;
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) {
      f.h[t] = h_prev;  // carry state through
      f.c[t] = c_prev;
      continue;
    }
    any_present = true;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = seq(t, k);
    std::array<std::vector<double>, 4> z;
    for (int g = 0; g < 4; ++g) {
      z[static_cast<std::size_t>(g)] = mat_vec(p.w[static_cast<std::size_t>(g)], x);
      const auto uh = mat_vec(p.u[static_cast<std::size_t>(g)], h_prev);
      for (std::size_t k = 0; k < h; ++k)
        z[static_cast<std::size_t>(g)][k] += uh[k] + p.b[static_cast<std::size_t>(g)][k];
    }
    auto& gate = f.gates[t];
    gate[0].resize(h);
    gate[1].resize(h);
    gate[2].resize(h);
    gate[3].resize(h);
    for (std::size_t k = 0; k < h; ++k) {
      gate[0][k] = sigmoid(z[0][k]);      // input
      gate[1][k] = sigmoid(z[1][k]);      // forget
      gate[2][k] = std::tanh(z[2][k]);    // cell candidate
      gate[3][k] = sigmoid(z[3][k]);      // output
      f.c[t][k] = gate[1][k] * c_prev[k] + gate[0][k] * gate[2][k];
      f.h[t][k] = gate[3][k] * std::tanh(f.c[t][k]);
    }
    h_prev = f.h[t];
    c_prev = f.c[t];
  }
  if (!any_present) throw NumericError("lstm_attn_forward: empty sequence (all steps masked)");

  // attention over present steps
  double max_logit = -1e300;
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    double e = p.attn_bias;
    for (std::size_t k = 0; k < h; ++k) e += p.attn_vec[k] * f.h[t][k];
    f.attn_logits[t] = e;
    max_logit = std::max(max_logit, e);
  }
  double denom = 0.0;
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    f.attn[t] = std::exp(f.attn_logits[t] - max_logit);
    denom += f.attn[t];
  }
  f.context.assign(h, 0.0);
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    f.attn[t] /= denom;
    add_scaled(f.context, f.h[t], f.attn[t]);
  }
  return f;
}

// --- MLP ---------------------------------------------------------------------------

namespace {

// acts[0] = input, acts[l+1] = post-activation output of layer l
std::vector<std::vector<double>> mlp_forward(const MlpParams& p, const std::vector<double>& in) {
  if (in.size() != static_cast<std::size_t>(p.dims.front()))
    throw NumericError("mlp_forward: input dim mismatch");
  std::vector<std::vector<double>> acts{in};
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto z = mat_vec(p.weights[l], acts.back());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += p.biases[l][k];
    if (l + 1 < p.weights.size())
      for (auto& v : z) v = std::max(0.0, v);  // ReLU on hidden layers
    acts.push_back(std::move(z));
  }
  return acts;
}

// Accumulates parameter grads; returns gradient w.r.t. the input.
std::vector<double> mlp_backward(const MlpParams& p, const std::vector<std::vector<double>>& acts,
                                 std::vector<double> dout, MlpParams* grad) {
  for (std::size_t l = p.weights.size(); l-- > 0;) {
    if (l + 1 < p.weights.size()) {
      // dout currently w.r.t. post-ReLU activation of layer l
      const auto& a = acts[l + 1];
      for (std::size_t k = 0; k < dout.size(); ++k)
        if (a[k] <= 0.0) dout[k] = 0.0;
    }
    if (grad) {
      add_outer(grad->weights[l], dout, acts[l]);
      add_scaled(grad->biases[l], dout, 1.0);
    }
    std::vector<double> din(acts[l].size(), 0.0);
    add_mat_t_vec(p.weights[l], dout, din);
    dout = std::move(din);
  }
  return dout;
}

}  // namespace

ClassifyForward classify_forward(const MlpParams& mlp, const std::vector<double>& input) {
  if (mlp.dims.back() != 2) throw NumericError("classify_forward: head must have 2 outputs");
  ClassifyForward out;
  out.acts = mlp_forward(mlp, input);
  const auto& logits = out.acts.back();
  out.logits = {logits[0], logits[1]};
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
  out.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return out;
}

// --- point-set regressor ---------------------------------------------------------

namespace {

struct RegressCache {
  Vec3 centroid;
  std::vector<std::vector<std::vector<double>>> enc_acts;  // per point
  std::vector<double> pooled;
  std::vector<std::size_t> argmax;  // winning point per pooled feature
  std::vector<std::vector<double>> head_acts;
  Vec3 out;
};

RegressCache regress_forward(const PointSetRegressorParams& p, const std::vector<Vec3>& points) {
  if (points.empty()) throw NumericError("regress_center: empty point list");
  RegressCache cache;
  Vec3 sum{0, 0, 0};
  for (const auto& q : points) sum += q;
  cache.centroid = sum / static_cast<double>(points.size());

  const auto feat = static_cast<std::size_t>(p.encoder.dims.back());
  cache.pooled.assign(feat, 0.0);
  cache.argmax.assign(feat, 0);
  cache.enc_acts.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = points[i] - cache.centroid;
    auto acts = mlp_forward(p.encoder, {q.x, q.y, q.z});
    const auto& e = acts.back();
    for (std::size_t k = 0; k < feat; ++k) {
      if (i == 0 || e[k] > cache.pooled[k]) {
        cache.pooled[k] = e[k];
        cache.argmax[k] = i;
      }
    }
    cache.enc_acts.push_back(std::move(acts));
  }
  cache.head_acts = mlp_forward(p.head, cache.pooled);
  const auto& off = cache.head_acts.back();
  cache.out = cache.centroid + Vec3{off[0], off[1], off[2]};
  return cache;
}

}  // namespace

Vec3 regress_center(const PointSetRegressorParams& p, const std::vector<Vec3>& points) {
  return regress_forward(p, points).out;
}

// --- losses ------------------------------------------------------------------------

double classifier_loss(const LstmParams& lstm, const MlpParams& mlp, const Mat& seq,
                       const std::vector<bool>& mask, int target, double class_weight,
                       LstmParams* grad_lstm, MlpParams* grad_mlp) {
  const auto fwd = lstm_attn_forward(lstm, seq, mask);
  const auto cls = classify_forward(mlp, fwd.context);
  const double p_target = cls.probs[static_cast<std::size_t>(target)];
  const double loss = -class_weight * std::log(std::max(p_target, 1e-300));
  if (!grad_lstm && !grad_mlp) return loss;

  // d loss / d logits for weighted cross-entropy
  std::vector<double> dlogits(2);
  for (int k = 0; k < 2; ++k)
    dlogits[static_cast<std::size_t>(k)] =
        class_weight * (cls.probs[static_cast<std::size_t>(k)] - (k == target ? 1.0 : 0.0));

  std::vector<double> dcontext = mlp_backward(mlp, cls.acts, dlogits, grad_mlp);

  if (!grad_lstm) return loss;
  const auto h = static_cast<std::size_t>(lstm.hidden);
  const std::size_t w = mask.size();

  // attention backward
  std::vector<std::vector<double>> dh(w, std::vector<double>(h, 0.0));
  std::vector<double> dalpha(w, 0.0);
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    add_scaled(dh[t], dcontext, fwd.attn[t]);
    double s = 0.0;
    for (std::size_t k = 0; k < h; ++k) s += fwd.h[t][k] * dcontext[k];
    dalpha[t] = s;
  }
  double inner = 0.0;
  for (std::size_t t = 0; t < w; ++t)
    if (mask[t]) inner += fwd.attn[t] * dalpha[t];
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    const double de = fwd.attn[t] * (dalpha[t] - inner);
    grad_lstm->attn_bias += de;
    add_scaled(grad_lstm->attn_vec, fwd.h[t], de);
    add_scaled(dh[t], lstm.attn_vec, de);
  }

  // BPTT
  std::vector<double> dh_carry(h, 0.0), dc_carry(h, 0.0);
  std::vector<double> x(static_cast<std::size_t>(lstm.input_dim));
  const std::vector<double> zero_state(h, 0.0);
  for (std::size_t t = w; t-- > 0;) {
    for (std::size_t k = 0; k < h; ++k) dh_carry[k] += dh[t][k];
    if (!mask[t]) continue;  // carried state: gradients pass straight through

    const auto& gate = fwd.gates[t];
    const std::vector<double>& c_prev_vec = (t == 0) ? zero_state : fwd.c[t - 1];
    const std::vector<double>& h_prev_vec = (t == 0) ? zero_state : fwd.h[t - 1];

    std::array<std::vector<double>, 4> dz;
    for (auto& v : dz) v.assign(h, 0.0);
    std::vector<double> dc(h, 0.0);
    for (std::size_t k = 0; k < h; ++k) {
      const double tc = std::tanh(fwd.c[t][k]);
      const double o = gate[3][k];
      dz[3][k] = dh_carry[k] * tc * o * (1.0 - o);
      dc[k] = dc_carry[k] + dh_carry[k] * o * (1.0 - tc * tc);
      const double i = gate[0][k], fo = gate[1][k], g = gate[2][k];
      dz[0][k] = dc[k] * g * i * (1.0 - i);
      dz[1][k] = dc[k] * c_prev_vec[k] * fo * (1.0 - fo);
      dz[2][k] = dc[k] * i * (1.0 - g * g);
    }

    for (std::size_t k = 0; k < x.size(); ++k) x[k] = seq(t, k);
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    for (int g = 0; g < 4; ++g) {
      const auto gi = static_cast<std::size_t>(g);
      add_outer(grad_lstm->w[gi], dz[gi], x);
      add_outer(grad_lstm->u[gi], dz[gi], h_prev_vec);
      add_scaled(grad_lstm->b[gi], dz[gi], 1.0);
      add_mat_t_vec(lstm.u[gi], dz[gi], dh_carry);
    }
    for (std::size_t k = 0; k < h; ++k) dc_carry[k] = dc[k] * gate[1][k];
  }
  return loss;
}

double regressor_loss(const PointSetRegressorParams& p, const std::vector<Vec3>& points,
                      const Vec3& target, PointSetRegressorParams* grad) {
  const RegressCache cache = regress_forward(p, points);
  const Vec3 err = cache.out - target;
  const double loss = err.norm2();
  if (!grad) return loss;

  const std::vector<double> dout{2.0 * err.x, 2.0 * err.y, 2.0 * err.z};
  const auto dpooled = mlp_backward(p.head, cache.head_acts, dout, &grad->head);

  // max-pool routes each pooled feature's gradient to its winning point
  const auto feat = dpooled.size();
  std::vector<std::vector<double>> dpoint(points.size());
  for (std::size_t k = 0; k < feat; ++k) {
    if (dpooled[k] == 0.0) continue;
    auto& de = dpoint[cache.argmax[k]];
    if (de.empty()) de.assign(feat, 0.0);
    de[k] += dpooled[k];
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (dpoint[i].empty()) continue;
    mlp_backward(p.encoder, cache.enc_acts[i], dpoint[i], &grad->encoder);
  }
  return loss;
}

// --- training -------------------------------------------------------------------------

ModelParams init_model(const TrainConfig& cfg) {
  Rng rng(Rng::derive_seed(cfg.seed, "seqnet.init"));
  ModelParams m;
  m.lstm = LstmParams::init(kFeatureDim, cfg.hidden, rng);
  m.classifier = MlpParams::init({cfg.hidden, 32, 2}, rng);
  m.regressor = PointSetRegressorParams::init(rng);
  return m;
}

std::vector<Vec3> cap_points(const std::vector<Vec3>& points, int cap) {
  if (cap <= 0 || static_cast<int>(points.size()) <= cap) return points;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(cap));
  const double step = static_cast<double>(points.size()) / cap;
  for (int i = 0; i < cap; ++i) out.push_back(points[static_cast<std::size_t>(i * step)]);
  return out;
}

namespace {

struct HoldoutEval {
  double accuracy = 0.0;
  double recall = 0.0;
  double center_mse = 0.0;
};

HoldoutEval evaluate(const ModelParams& model, const std::vector<const LabeledWindowSample*>& samples,
                     const TrainConfig& cfg) {
  HoldoutEval ev;
  int correct = 0, n_uav = 0, recalled = 0, n_center = 0;
  double mse = 0.0;
  for (const auto* s : samples) {
    const auto fwd = lstm_attn_forward(model.lstm, s->feature.seq, s->feature.mask);
    const auto cls = classify_forward(model.classifier, fwd.context);
    const int truth = s->label == SampleLabel::uav ? 1 : 0;
    const int pred = cls.probs[1] >= cls.probs[0] ? 1 : 0;
    if (pred == truth) ++correct;
    if (truth == 1) {
      ++n_uav;
      if (cls.probs[1] >= cfg.detect_threshold) ++recalled;
      const Vec3 c = regress_center(model.regressor, cap_points(s->points, cfg.regressor_max_points));
      mse += (c - s->target_center).norm2();
      ++n_center;
    }
  }
  ev.accuracy = samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
  ev.recall = n_uav == 0 ? 0.0 : static_cast<double>(recalled) / static_cast<double>(n_uav);
  ev.center_mse = n_center == 0 ? 0.0 : mse / n_center;
  return ev;
}

}  // namespace

TrainMetrics train(ModelParams& model, const std::vector<LabeledWindowSample>& dataset,
                   const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch < 1 || cfg.lr <= 0.0)
    throw ConfigError("train: epochs must be >= 0, batch >= 1, lr > 0");
  int n_uav = 0, n_bg = 0;
  for (const auto& s : dataset) (s.label == SampleLabel::uav ? n_uav : n_bg)++;
  if (n_uav == 0 || n_bg == 0)
    throw NumericError("train: dataset is single-class (uav=" + std::to_string(n_uav) +
                       ", background=" + std::to_string(n_bg) + ")");

  // seeded shuffle, then split holdout from the tail
  Rng rng(Rng::derive_seed(cfg.seed, "seqnet.train"));
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_below(i)]);

  const auto n_holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(order.size())));
  const std::size_t n_train = order.size() - n_holdout;
  std::vector<const LabeledWindowSample*> train_set, holdout_set;
  for (std::size_t i = 0; i < n_train; ++i) train_set.push_back(&dataset[order[i]]);
  for (std::size_t i = n_train; i < order.size(); ++i) holdout_set.push_back(&dataset[order[i]]);
  bool train_has_uav = false, train_has_bg = false;
  for (const auto* s : train_set)
    (s->label == SampleLabel::uav ? train_has_uav : train_has_bg) = true;
  if (!train_has_uav || !train_has_bg)
    throw NumericError("train: training split is single-class; provide more data");

  const auto& eval_set = holdout_set.empty() ? train_set : holdout_set;
  const double mse_before = evaluate(model, eval_set, cfg).center_mse;

  // momentum buffers aligned with the tensor list
  auto refs = tensor_refs(model);
  std::vector<std::vector<double>> velocity(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) velocity[i].assign(refs[i].data->size(), 0.0);
  double vel_attn_bias = 0.0;

  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = train_set.size(); i > 1; --i)
      std::swap(train_set[i - 1], train_set[rng.next_below(i)]);
    epoch_loss = 0.0;
    std::size_t cursor = 0;
    while (cursor < train_set.size()) {
      const std::size_t end = std::min(cursor + static_cast<std::size_t>(cfg.batch), train_set.size());
      ModelParams grads;
      grads.lstm = LstmParams::zeros(model.lstm.input_dim, model.lstm.hidden);
      grads.classifier = MlpParams::zeros(model.classifier.dims);
      grads.regressor = PointSetRegressorParams::zeros(
          model.regressor.encoder.dims[1], model.regressor.encoder.dims[2], model.regressor.head.dims[1]);

      int batch_n = 0;
      for (std::size_t s = cursor; s < end; ++s, ++batch_n) {
        LabeledWindowSample sample = *train_set[s];
        if (cfg.augment_enabled) sample = augment(sample, rng, cfg.aug);
        const int target = sample.label == SampleLabel::uav ? 1 : 0;
        const double weight = target == 1 ? cfg.uav_class_weight : 1.0;
        epoch_loss += classifier_loss(model.lstm, model.classifier, sample.feature.seq,
                                      sample.feature.mask, target, weight, &grads.lstm,
                                      &grads.classifier);
        if (target == 1) {
          epoch_loss += regressor_loss(model.regressor,
                                       cap_points(sample.points, cfg.regressor_max_points),
                                       sample.target_center, &grads.regressor);
        }
      }

      const double scale = 1.0 / static_cast<double>(batch_n);
      auto grad_refs = tensor_refs(grads);
      for (std::size_t i = 0; i < refs.size(); ++i) {
        auto& v = velocity[i];
        auto& g = *grad_refs[i].data;
        auto& pdata = *refs[i].data;
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] = cfg.momentum * v[k] - cfg.lr * g[k] * scale;
          pdata[k] += v[k];
        }
      }
      vel_attn_bias = cfg.momentum * vel_attn_bias - cfg.lr * grads.lstm.attn_bias * scale;
      model.lstm.attn_bias += vel_attn_bias;
      cursor = end;
    }
    epoch_loss /= static_cast<double>(train_set.size());
  }

  TrainMetrics metrics;
  const auto ev = evaluate(model, eval_set, cfg);
  metrics.holdout_accuracy = ev.accuracy;
  metrics.holdout_recall = ev.recall;
  metrics.center_mse_before = mse_before;
  metrics.center_mse_after = ev.center_mse;
  metrics.final_loss = epoch_loss;
  metrics.n_train = static_cast<int>(train_set.size());
  metrics.n_holdout = static_cast<int>(holdout_set.size());
  return metrics;
}

// --- checkpoints ---------------------------------------------------------------------

namespace {

json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Mat mat_from_json(const json& j, std::size_t rows, std::size_t cols, const std::string& name) {
  Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  if (m.rows() != rows || m.cols() != cols || m.data().size() != rows * cols)
    throw IoError("model checkpoint: tensor '" + name + "' has wrong shape");
  if (!m.all_finite()) throw IoError("model checkpoint: tensor '" + name + "' has non-finite entries");
  return m;
}

json mlp_to_json(const MlpParams& p) {
  json layers = json::array();
  for (std::size_t l = 0; l < p.weights.size(); ++l)
    layers.push_back({{"w", mat_to_json(p.weights[l])}, {"b", p.biases[l]}});
  return json{{"dims", p.dims}, {"layers", layers}};
}

MlpParams mlp_from_json(const json& j, const std::string& name) {
  MlpParams p = MlpParams::zeros(j.at("dims").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != p.weights.size()) throw IoError("model checkpoint: '" + name + "' layer count");
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    p.weights[l] = mat_from_json(layers[l].at("w"), static_cast<std::size_t>(p.dims[l + 1]),
                                 static_cast<std::size_t>(p.dims[l]), name);
    p.biases[l] = layers[l].at("b").get<std::vector<double>>();
    if (p.biases[l].size() != static_cast<std::size_t>(p.dims[l + 1]))
      throw IoError("model checkpoint: '" + name + "' bias size");
  }
  return p;
}

}  // namespace

void save_model(const std::string& path, const ModelParams& model) {
  json j;
  j["format"] = "aerotrack-model";
  j["version"] = 1;
  j["input_dim"] = model.lstm.input_dim;
  j["hidden"] = model.lstm.hidden;
  static const char* gate_names[4] = {"i", "f", "g", "o"};
  json lstm;
  for (int g = 0; g < 4; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    lstm[std::string("w_") + gate_names[g]] = mat_to_json(model.lstm.w[gi]);
    lstm[std::string("u_") + gate_names[g]] = mat_to_json(model.lstm.u[gi]);
    lstm[std::string("b_") + gate_names[g]] = model.lstm.b[gi];
  }
  lstm["attn_vec"] = model.lstm.attn_vec;
  lstm["attn_bias"] = model.lstm.attn_bias;
  j["lstm"] = lstm;
  j["classifier"] = mlp_to_json(model.classifier);
  j["regressor"] = {{"encoder", mlp_to_json(model.regressor.encoder)},
                    {"head", mlp_to_json(model.regressor.head)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError("model checkpoint '" + path + "': malformed JSON");
  if (j.value("format", "") != "aerotrack-model")
    throw IoError("model checkpoint '" + path + "': unrecognized format");

  ModelParams model;
  const int input_dim = j.at("input_dim").get<int>();
  const int hidden = j.at("hidden").get<int>();
  if (input_dim != kFeatureDim)
    throw IoError("model checkpoint: input_dim " + std::to_string(input_dim) + " unsupported");
  model.lstm = LstmParams::zeros(input_dim, hidden);
  const auto h = static_cast<std::size_t>(hidden);
  static const char* gate_names[4] = {"i", "f", "g", "o"};
  const auto& lstm = j.at("lstm");
  for (int g = 0; g < 4; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    model.lstm.w[gi] = mat_from_json(lstm.at(std::string("w_") + gate_names[g]), h,
                                     static_cast<std::size_t>(input_dim), "lstm.w");
    model.lstm.u[gi] = mat_from_json(lstm.at(std::string("u_") + gate_names[g]), h, h, "lstm.u");
    model.lstm.b[gi] = lstm.at(std::string("b_") + gate_names[g]).get<std::vector<double>>();
    if (model.lstm.b[gi].size() != h) throw IoError("model checkpoint: lstm bias size");
  }
  model.lstm.attn_vec = lstm.at("attn_vec").get<std::vector<double>>();
  if (model.lstm.attn_vec.size() != h) throw IoError("model checkpoint: attention vector size");
  model.lstm.attn_bias = lstm.at("attn_bias").get<double>();

  model.classifier = mlp_from_json(j.at("classifier"), "classifier");
  if (model.classifier.dims.front() != hidden || model.classifier.dims.back() != 2)
    throw IoError("model checkpoint: classifier dims do not chain with hidden size");
  model.regressor.encoder = mlp_from_json(j.at("regressor").at("encoder"), "regressor.encoder");
  model.regressor.head = mlp_from_json(j.at("regressor").at("head"), "regressor.head");
  if (model.regressor.encoder.dims.front() != 3 || model.regressor.head.dims.back() != 3 ||
      model.regressor.encoder.dims.back() != model.regressor.head.dims.front())
    throw IoError("model checkpoint: regressor dims do not chain");
  return model;
}

// --- gradient check ----------------------------------------------------------------------

GradCheckReport gradient_check(std::uint64_t seed, int hidden, int window, double eps) {
  Rng rng(Rng::derive_seed(seed, "seqnet.gradcheck"));
  ModelParams model;
  model.lstm = LstmParams::init(kFeatureDim, hidden, rng);
  model.classifier = MlpParams::init({hidden, 8, 2}, rng);
  model.regressor = PointSetRegressorParams::init(rng, 6, 10, 6);

  const auto w = static_cast<std::size_t>(window);
  Mat seq(w, kFeatureDim);
  std::vector<bool> mask(w, true);
  mask[w / 2] = false;  // exercise the state carry-through path
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    for (int k = 0; k < kFeatureDim; ++k) seq(t, static_cast<std::size_t>(k)) = rng.normal();
  }
  const int target = 1;
  const double class_weight = 1.7;

  std::vector<Vec3> points;
  for (int i = 0; i < 6; ++i) points.push_back({rng.normal(), rng.normal(), rng.normal()});
  const Vec3 reg_target{rng.normal(), rng.normal(), rng.normal()};

  // analytic gradients
  ModelParams grads;
  grads.lstm = LstmParams::zeros(kFeatureDim, hidden);
  grads.classifier = MlpParams::zeros(model.classifier.dims);
  grads.regressor = PointSetRegressorParams::zeros(6, 10, 6);
  classifier_loss(model.lstm, model.classifier, seq, mask, target, class_weight, &grads.lstm,
                  &grads.classifier);
  regressor_loss(model.regressor, points, reg_target, &grads.regressor);

  auto loss_at = [&](bool classifier_path) {
    return classifier_path
               ? classifier_loss(model.lstm, model.classifier, seq, mask, target, class_weight,
                                 nullptr, nullptr)
               : regressor_loss(model.regressor, points, reg_target, nullptr);
  };

  GradCheckReport report;
  auto param_refs = tensor_refs(model);
  auto grad_refs = tensor_refs(grads);
  for (std::size_t ti = 0; ti < param_refs.size(); ++ti) {
    const bool classifier_path = param_refs[ti].name.rfind("regressor", 0) != 0;
    double tensor_max = 0.0;
    auto& data = *param_refs[ti].data;
    const auto& g = *grad_refs[ti].data;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + eps;
      const double lp = loss_at(classifier_path);
      data[k] = saved - eps;
      const double lm = loss_at(classifier_path);
      data[k] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double rel = std::fabs(g[k] - numeric) / std::max(std::fabs(numeric), 1e-8);
      tensor_max = std::max(tensor_max, rel);
    }
    report.per_tensor.emplace_back(param_refs[ti].name, tensor_max);
    report.max_rel_err = std::max(report.max_rel_err, tensor_max);
  }

  // attention bias scalar
  {
    const double saved = model.lstm.attn_bias;
    model.lstm.attn_bias = saved + eps;
    const double lp = loss_at(true);
    model.lstm.attn_bias = saved - eps;
    const double lm = loss_at(true);
    model.lstm.attn_bias = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double rel =
        std::fabs(grads.lstm.attn_bias - numeric) / std::max(std::fabs(numeric), 1e-8);
    report.per_tensor.emplace_back("lstm.attn_bias", rel);
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  return report;
}

}  // namespace aerotrack
