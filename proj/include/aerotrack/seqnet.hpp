#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aerotrack/dynpoints.hpp"
#include "aerotrack/mat.hpp"
#include "aerotrack/rng.hpp"

namespace aerotrack {

// From-scratch trainable networks for cluster classification and center
// regression. Forward and backward passes are hand-written and verified
// against central finite differences (see gradient_check).

// Gate order everywhere: input, forget, cell, output.
struct LstmParams {
  int input_dim = kFeatureDim;
  int hidden = 32;
  std::array<Mat, 4> w;                     // hidden x input_dim
  std::array<Mat, 4> u;                     // hidden x hidden
  std::array<std::vector<double>, 4> b;     // hidden
  std::vector<double> attn_vec;             // hidden
  double attn_bias = 0.0;

  static LstmParams init(int input_dim, int hidden, Rng& rng);
  static LstmParams zeros(int input_dim, int hidden);
};

struct MlpParams {
  std::vector<int> dims;  // e.g. {hidden, 32, 2}; ReLU between layers, linear output
  std::vector<Mat> weights;
  std::vector<std::vector<double>> biases;

  static MlpParams init(const std::vector<int>& dims, Rng& rng);
  static MlpParams zeros(const std::vector<int>& dims);
};

// Shared per-point encoder, max-pool, offset head; output is the geometric
// centroid plus the head's offset, which makes the regressor translation
// equivariant and permutation invariant by construction.
struct PointSetRegressorParams {
  MlpParams encoder;  // 3 -> enc_hidden -> feat
  MlpParams head;     // feat -> head_hidden -> 3

  static PointSetRegressorParams init(Rng& rng, int enc_hidden = 32, int feat = 64,
                                      int head_hidden = 32);
  static PointSetRegressorParams zeros(int enc_hidden = 32, int feat = 64, int head_hidden = 32);
};

struct ModelParams {
  LstmParams lstm;
  MlpParams classifier;
  PointSetRegressorParams regressor;
};

// Named views over every parameter tensor; used by the optimizer, the
// finite-difference checker, and checkpoint IO.
struct TensorRef {
  std::string name;
  std::vector<double>* data;
};
std::vector<TensorRef> tensor_refs(LstmParams& p);
std::vector<TensorRef> tensor_refs(MlpParams& p, const std::string& prefix);
std::vector<TensorRef> tensor_refs(PointSetRegressorParams& p);
std::vector<TensorRef> tensor_refs(ModelParams& p);

// --- forward passes ---------------------------------------------------------

struct LstmForward {
  std::vector<double> context;  // hidden
  std::vector<double> attn;     // per step; exactly 0 on masked steps, sums to 1
  // caches for backward
  std::vector<std::array<std::vector<double>, 4>> gates;  // per step (present only entries used)
  std::vector<std::vector<double>> h, c;                  // per step, post-update
  std::vector<double> attn_logits;
};

// Attention-weighted LSTM over the present steps; masked steps carry the
// state through unchanged and receive zero attention. Throws on an all-
// masked sequence.
LstmForward lstm_attn_forward(const LstmParams& p, const Mat& seq, const std::vector<bool>& mask);

struct ClassifyForward {
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};
  std::vector<std::vector<double>> acts;  // per-layer activations (cache)
};

ClassifyForward classify_forward(const MlpParams& mlp, const std::vector<double>& input);

Vec3 regress_center(const PointSetRegressorParams& p, const std::vector<Vec3>& points);

// Deterministic stride subsample used to bound the regressor's input size;
// training and inference must apply the same cap.
std::vector<Vec3> cap_points(const std::vector<Vec3>& points, int cap);

// --- losses with gradients ---------------------------------------------------

// Weighted cross-entropy of the (LSTM -> classifier) path for one sample.
// Gradients are accumulated into the provided containers when non-null.
double classifier_loss(const LstmParams& lstm, const MlpParams& mlp, const Mat& seq,
                       const std::vector<bool>& mask, int target, double class_weight,
                       LstmParams* grad_lstm, MlpParams* grad_mlp);

// Squared-error loss ||out - target||^2 of the center regressor.
double regressor_loss(const PointSetRegressorParams& p, const std::vector<Vec3>& points,
                      const Vec3& target, PointSetRegressorParams* grad);

// --- training -----------------------------------------------------------------

struct TrainConfig {
  int epochs = 30;
  int batch = 32;
  double lr = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  double uav_class_weight = 3.0;
  double holdout_fraction = 0.2;
  double detect_threshold = 0.3;  // recall-leaning uav probability cutoff
  int hidden = 32;
  bool augment_enabled = true;
  AugmentConfig aug{0.1, 0.5, 1.0};
  int regressor_max_points = 256;
};

struct TrainMetrics {
  double holdout_accuracy = 0.0;   // argmax correctness
  double holdout_recall = 0.0;     // uav recall at detect_threshold
  double center_mse_before = 0.0;  // mean ||pred-gt||^2 on held-out uav clusters
  double center_mse_after = 0.0;
  double final_loss = 0.0;
  int n_train = 0;
  int n_holdout = 0;
};

// Deterministic minibatch SGD with momentum; same seed, same data -> bit
// identical parameters. Throws when the dataset is single-class.
TrainMetrics train(ModelParams& model, const std::vector<LabeledWindowSample>& dataset,
                   const TrainConfig& cfg);

ModelParams init_model(const TrainConfig& cfg);

// --- checkpoints ----------------------------------------------------------------

void save_model(const std::string& path, const ModelParams& model);
ModelParams load_model(const std::string& path);  // validates tensor shapes

// --- verification ----------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<std::pair<std::string, double>> per_tensor;  // tensor name -> max rel err
};

// Central finite differences (eps) against the analytic gradients on a
// seeded random instance; covers every parameter tensor of all three nets.
GradCheckReport gradient_check(std::uint64_t seed, int hidden = 4, int window = 5,
                               double eps = 1e-5);

}  // namespace aerotrack
