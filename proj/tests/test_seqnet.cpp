#include <algorithm>
#include <cmath>

#include "aerotrack/errors.hpp"
#include "aerotrack/seqnet.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace aerotrack;

namespace {

// Straight-line re-implementation of the attention LSTM forward pass, kept
// deliberately dumb and independent of the production code path.
std::vector<double> oracle_forward(const LstmParams& p, const Mat& seq, const std::vector<bool>& mask) {
  const int h = p.hidden;
  std::vector<double> h_state(static_cast<std::size_t>(h), 0.0);
  std::vector<double> c_state(static_cast<std::size_t>(h), 0.0);
  std::vector<std::vector<double>> hs;
  std::vector<int> present;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) {
      std::vector<double> zi(static_cast<std::size_t>(h)), zf = zi, zg = zi, zo = zi;
      for (int r = 0; r < h; ++r) {
        double si = p.b[0][static_cast<std::size_t>(r)];
        double sf = p.b[1][static_cast<std::size_t>(r)];
        double sg = p.b[2][static_cast<std::size_t>(r)];
        double so = p.b[3][static_cast<std::size_t>(r)];
        for (int c = 0; c < p.input_dim; ++c) {
          const double x = seq(t, static_cast<std::size_t>(c));
          si += p.w[0](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * x;
          sf += p.w[1](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * x;
          sg += p.w[2](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * x;
          so += p.w[3](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * x;
        }
        for (int c = 0; c < h; ++c) {
          const double hp = h_state[static_cast<std::size_t>(c)];
          si += p.u[0](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * hp;
          sf += p.u[1](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * hp;
          sg += p.u[2](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * hp;
          so += p.u[3](static_cast<std::size_t>(r), static_cast<std::size_t>(c)) * hp;
        }
        zi[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(-si));
        zf[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(-sf));
        zg[static_cast<std::size_t>(r)] = std::tanh(sg);
        zo[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(-so));
      }
      for (int r = 0; r < h; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        c_state[ri] = zf[ri] * c_state[ri] + zi[ri] * zg[ri];
        h_state[ri] = zo[ri] * std::tanh(c_state[ri]);
      }
      hs.push_back(h_state);
      present.push_back(static_cast<int>(t));
    }
  }
  std::vector<double> logits;
  double max_logit = -1e300;
  for (const auto& hv : hs) {
    double e = p.attn_bias;
    for (int r = 0; r < h; ++r) e += p.attn_vec[static_cast<std::size_t>(r)] * hv[static_cast<std::size_t>(r)];
    logits.push_back(e);
    max_logit = std::max(max_logit, e);
  }
  double denom = 0.0;
  for (double e : logits) denom += std::exp(e - max_logit);
  std::vector<double> context(static_cast<std::size_t>(h), 0.0);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double a = std::exp(logits[i] - max_logit) / denom;
    for (int r = 0; r < h; ++r) context[static_cast<std::size_t>(r)] += a * hs[i][static_cast<std::size_t>(r)];
  }
  return context;
}

Mat random_seq(Rng& rng, std::size_t w, const std::vector<bool>& mask) {
  Mat seq(w, kFeatureDim);
  for (std::size_t t = 0; t < w; ++t) {
    if (!mask[t]) continue;
    for (int k = 0; k < kFeatureDim; ++k) seq(t, static_cast<std::size_t>(k)) = rng.normal();
  }
  return seq;
}

}  // namespace

TEST_CASE("lstm forward: zero params give zero states and uniform attention") {
  const LstmParams p = LstmParams::zeros(kFeatureDim, 4);
  std::vector<bool> mask(6, true);
  Rng rng(2);
  const Mat seq = random_seq(rng, 6, mask);
  const auto f = lstm_attn_forward(p, seq, mask);
  for (double v : f.context) CHECK(v == 0.0);
  for (std::size_t t = 0; t < 6; ++t) CHECK(f.attn[t] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("lstm forward: singleton present step takes all attention") {
  Rng rng(5);
  const LstmParams p = LstmParams::init(kFeatureDim, 4, rng);
  std::vector<bool> mask(6, false);
  mask[3] = true;
  const Mat seq = random_seq(rng, 6, mask);
  const auto f = lstm_attn_forward(p, seq, mask);
  CHECK(f.attn[3] == doctest::Approx(1.0));
  for (std::size_t t = 0; t < 6; ++t)
    if (t != 3) CHECK(f.attn[t] == 0.0);
}

TEST_CASE("lstm forward: matches the independent oracle to 1e-12") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const LstmParams p = LstmParams::init(kFeatureDim, 4, rng);
    std::vector<bool> mask(5, true);
    if (trial % 2 == 1) mask[static_cast<std::size_t>(trial % 5)] = false;
    const Mat seq = random_seq(rng, 5, mask);
    const auto f = lstm_attn_forward(p, seq, mask);
    const auto oracle = oracle_forward(p, seq, mask);
    REQUIRE(oracle.size() == f.context.size());
    for (std::size_t i = 0; i < oracle.size(); ++i)
      CHECK(f.context[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
  }
}

TEST_CASE("lstm forward: attention sums to 1 over present steps, 0 on masked") {
  Rng rng(9);
  const LstmParams p = LstmParams::init(kFeatureDim, 8, rng);
  std::vector<bool> mask{true, false, true, true, false, true, true};
  const Mat seq = random_seq(rng, mask.size(), mask);
  const auto f = lstm_attn_forward(p, seq, mask);
  double sum = 0.0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    CHECK(f.attn[t] >= 0.0);
    if (!mask[t]) CHECK(f.attn[t] == 0.0);
    sum += f.attn[t];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lstm forward: all-masked sequence is an error") {
  const LstmParams p = LstmParams::zeros(kFeatureDim, 4);
  std::vector<bool> mask(5, false);
  const Mat seq(5, kFeatureDim);
  CHECK_THROWS_WITH_AS(lstm_attn_forward(p, seq, mask), doctest::Contains("empty sequence"),
                       NumericError);
}

TEST_CASE("classifier: softmax basics") {
  SUBCASE("zero weights give 0.5/0.5") {
    const MlpParams mlp = MlpParams::zeros({4, 8, 2});
    const auto out = classify_forward(mlp, {1.0, -2.0, 0.5, 3.0});
    CHECK(out.probs[0] == doctest::Approx(0.5));
    CHECK(out.probs[1] == doctest::Approx(0.5));
  }
  SUBCASE("logits (0, ln 3) give (0.25, 0.75)") {
    MlpParams mlp = MlpParams::zeros({2, 2});
    mlp.biases[0] = {0.0, std::log(3.0)};
    const auto out = classify_forward(mlp, {0.0, 0.0});
    CHECK(out.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.probs[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("shift invariance") {
    MlpParams a = MlpParams::zeros({2, 2});
    a.biases[0] = {0.3, -1.1};
    MlpParams b = MlpParams::zeros({2, 2});
    b.biases[0] = {0.3 + 7.0, -1.1 + 7.0};
    const auto pa = classify_forward(a, {0, 0}).probs;
    const auto pb = classify_forward(b, {0, 0}).probs;
    CHECK(pa[0] == doctest::Approx(pb[0]).epsilon(1e-12));
  }
  SUBCASE("probs sum to 1") {
    Rng rng(3);
    const MlpParams mlp = MlpParams::init({4, 8, 2}, rng);
    for (int i = 0; i < 20; ++i) {
      const auto out = classify_forward(mlp, {rng.normal(), rng.normal(), rng.normal(), rng.normal()});
      CHECK(out.probs[0] + out.probs[1] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(out.probs[0] > 0.0);
      CHECK(out.probs[1] < 1.0);
    }
  }
}

TEST_CASE("regressor: zero head returns the centroid") {
  Rng rng(5);
  PointSetRegressorParams p = PointSetRegressorParams::init(rng);
  for (auto& w : p.head.weights) w = Mat(w.rows(), w.cols());
  for (auto& b : p.head.biases) std::fill(b.begin(), b.end(), 0.0);
  const std::vector<Vec3> pts{{1, 2, 3}, {4, 5, 6}, {7, 8, 10}};
  const Vec3 out = regress_center(p, pts);
  CHECK(out.x == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(out.y == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(out.z == doctest::Approx(19.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("regressor: permutation invariance is bit-exact") {
  Rng rng(6);
  const PointSetRegressorParams p = PointSetRegressorParams::init(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < 12; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
  const Vec3 base = regress_center(p, pts);
  auto shuffled = pts;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[0], shuffled[5]);
  const Vec3 out = regress_center(p, shuffled);
  CHECK(out.x == base.x);
  CHECK(out.y == base.y);
  CHECK(out.z == base.z);
}

TEST_CASE("regressor: translation equivariance is bit-exact") {
  Rng rng(8);
  const PointSetRegressorParams p = PointSetRegressorParams::init(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < 9; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
  const Vec3 base = regress_center(p, pts);
  const Vec3 shift{5, 0, 0};
  std::vector<Vec3> moved;
  for (const auto& q : pts) moved.push_back(q + shift);
  const Vec3 out = regress_center(p, moved);
  // (points - centroid) is exactly unchanged by the shift, so the head
  // offset is bit-identical and the output moves by exactly the shift
  CHECK(out.x == base.x + 5.0);
  CHECK(out.y == base.y);
  CHECK(out.z == base.z);
}

TEST_CASE("regressor: empty point list is an error") {
  const PointSetRegressorParams p = PointSetRegressorParams::zeros();
  CHECK_THROWS_AS(regress_center(p, {}), NumericError);
}

TEST_CASE("gradient check: every tensor below 1e-4 relative error") {
  const auto report = gradient_check(1234, 4, 5);
  for (const auto& [name, err] : report.per_tensor) {
    INFO(name);
    CHECK(err < 1e-4);
  }
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("gradients: doubling the class weight doubles the gradients") {
  Rng rng(10);
  const LstmParams lstm = LstmParams::init(kFeatureDim, 4, rng);
  const MlpParams mlp = MlpParams::init({4, 8, 2}, rng);
  std::vector<bool> mask(5, true);
  const Mat seq = random_seq(rng, 5, mask);

  LstmParams g1 = LstmParams::zeros(kFeatureDim, 4), g2 = LstmParams::zeros(kFeatureDim, 4);
  MlpParams m1 = MlpParams::zeros({4, 8, 2}), m2 = MlpParams::zeros({4, 8, 2});
  const double l1 = classifier_loss(lstm, mlp, seq, mask, 1, 1.0, &g1, &m1);
  const double l2 = classifier_loss(lstm, mlp, seq, mask, 1, 2.0, &g2, &m2);
  CHECK(l2 == doctest::Approx(2.0 * l1).epsilon(1e-12));
  auto r1 = tensor_refs(g1);
  auto r2 = tensor_refs(g2);
  for (std::size_t t = 0; t < r1.size(); ++t)
    for (std::size_t k = 0; k < r1[t].data->size(); ++k)
      CHECK((*r2[t].data)[k] == doctest::Approx(2.0 * (*r1[t].data)[k]).epsilon(1e-9));
}

TEST_CASE("regressor loss: zero at a perfectly matched target") {
  Rng rng(11);
  const PointSetRegressorParams p = PointSetRegressorParams::init(rng, 6, 10, 6);
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
  const Vec3 target = regress_center(p, pts);
  PointSetRegressorParams grad = PointSetRegressorParams::zeros(6, 10, 6);
  const double loss = regressor_loss(p, pts, target, &grad);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-20));
  for (const auto& ref : tensor_refs(grad))
    for (double v : *ref.data) CHECK(std::fabs(v) < 1e-12);
}

namespace {

// Linearly separable fixture: uav clusters move fast, clutter crawls.
std::vector<LabeledWindowSample> separable_dataset(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledWindowSample> data;
  for (int i = 0; i < n; ++i) {
    const bool uav = i % 2 == 0;
    const double speed = uav ? rng.uniform(2.0, 4.0) : rng.uniform(0.0, 0.5);
    const double heading = rng.uniform(0, 2 * M_PI);
    LabeledWindowSample s;
    const std::size_t w = 10;
    s.feature.seq = Mat(w, kFeatureDim);
    s.feature.mask.assign(w, true);
    s.feature.t_end = 1.0;
    for (std::size_t f = 0; f < w; ++f) {
      s.feature.seq(f, 0) = speed * std::cos(heading) + 0.05 * rng.normal();
      s.feature.seq(f, 1) = speed * std::sin(heading) + 0.05 * rng.normal();
      s.feature.seq(f, 2) = 0.02 * rng.normal();
      s.feature.seq(f, 3) = 1.0 / static_cast<double>(w);
      s.feature.seq(f, 4) = rng.uniform(5.0, 30.0);
      s.feature.seq(f, 5) = uav ? rng.uniform(0.2, 0.6) : rng.uniform(0.5, 1.5);
      s.feature.seq(f, 6) = rng.uniform(0.1, 0.4);
    }
    s.label = uav ? SampleLabel::uav : SampleLabel::background;
    if (uav) {
      const Vec3 center{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(10, 30)};
      s.target_center = center;
      for (int k = 0; k < 16; ++k)
        s.points.push_back(center + Vec3{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                         rng.uniform(-0.2, 0.2)});
    } else {
      for (int k = 0; k < 8; ++k)
        s.points.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 5)});
    }
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace

TEST_CASE("train: separable fixture reaches 0.95 held-out accuracy") {
  const auto data = separable_dataset(200, 77);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch = 16;
  cfg.lr = 0.02;
  cfg.hidden = 8;
  cfg.seed = 99;
  cfg.augment_enabled = false;
  ModelParams model = init_model(cfg);
  const TrainMetrics metrics = train(model, data, cfg);
  CHECK(metrics.holdout_accuracy >= 0.95);
  CHECK(metrics.holdout_recall >= 0.9);
  CHECK(metrics.center_mse_after <= metrics.center_mse_before + 1e-9);
}

TEST_CASE("train: deterministic given the seed") {
  const auto data = separable_dataset(60, 5);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch = 8;
  cfg.hidden = 6;
  cfg.seed = 31;
  ModelParams a = init_model(cfg);
  ModelParams b = init_model(cfg);
  train(a, data, cfg);
  train(b, data, cfg);
  auto ra = tensor_refs(a);
  auto rb = tensor_refs(b);
  for (std::size_t t = 0; t < ra.size(); ++t) REQUIRE(*ra[t].data == *rb[t].data);
  CHECK(a.lstm.attn_bias == b.lstm.attn_bias);
}

TEST_CASE("train: zero epochs keeps the initialization") {
  const auto data = separable_dataset(40, 6);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = 6;
  cfg.seed = 8;
  ModelParams trained = init_model(cfg);
  const ModelParams reference = init_model(cfg);
  train(trained, data, cfg);
  auto rt = tensor_refs(trained);
  ModelParams ref_copy = reference;
  auto rr = tensor_refs(ref_copy);
  for (std::size_t t = 0; t < rt.size(); ++t) CHECK(*rt[t].data == *rr[t].data);
}

TEST_CASE("train: single-class dataset is an error") {
  auto data = separable_dataset(40, 6);
  data.erase(std::remove_if(data.begin(), data.end(),
                            [](const LabeledWindowSample& s) { return s.label == SampleLabel::uav; }),
             data.end());
  TrainConfig cfg;
  cfg.hidden = 6;
  CHECK_THROWS_WITH_AS(train(*(new ModelParams(init_model(cfg))), data, cfg),
                       doctest::Contains("single-class"), NumericError);
}

TEST_CASE("train: loss decreases on the separable fixture") {
  const auto data = separable_dataset(100, 13);
  TrainConfig cfg;
  cfg.batch = 16;
  cfg.lr = 0.01;
  cfg.hidden = 8;
  cfg.seed = 4;
  cfg.augment_enabled = false;

  cfg.epochs = 1;
  ModelParams m1 = init_model(cfg);
  const double early = train(m1, data, cfg).final_loss;
  cfg.epochs = 30;
  ModelParams m2 = init_model(cfg);
  const double late = train(m2, data, cfg).final_loss;
  CHECK(late < early);
}

TEST_CASE("checkpoint: save, load, identical behavior; corrupt shapes rejected") {
  aerotrack_test::TempDir dir;
  TrainConfig cfg;
  cfg.hidden = 6;
  cfg.seed = 21;
  const ModelParams model = init_model(cfg);
  const std::string path = dir.file("model.json");
  save_model(path, model);
  const ModelParams back = load_model(path);
  Rng rng(3);
  std::vector<bool> mask(5, true);
  const Mat seq = random_seq(rng, 5, mask);
  const auto a = lstm_attn_forward(model.lstm, seq, mask);
  const auto b = lstm_attn_forward(back.lstm, seq, mask);
  for (std::size_t i = 0; i < a.context.size(); ++i) CHECK(a.context[i] == b.context[i]);

  // tamper with a tensor shape
  auto text = aerotrack_test::slurp(path);
  const auto pos = text.find("\"hidden\": 6");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "\"hidden\": 7");
  std::ofstream(dir.file("bad.json")) << text;
  CHECK_THROWS_AS(load_model(dir.file("bad.json")), IoError);
}
