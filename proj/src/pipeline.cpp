#include "aerotrack/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "aerotrack/centerfix.hpp"
#include "aerotrack/dynpoints.hpp"
#include "aerotrack/errors.hpp"
#include "aerotrack/io.hpp"
#include "aerotrack/metrics.hpp"
#include "aerotrack/mot.hpp"
#include "aerotrack/plot.hpp"
#include "aerotrack/seqcls.hpp"
#include "aerotrack/seqnet.hpp"
#include "aerotrack/synth.hpp"
#include "aerotrack/trajfinish.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace aerotrack {

using nlohmann::json;

int effective_threads(const PipelineConfig& cfg) {
  int n = static_cast<int>(cfg.get_int("threads"));
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("AEROTRACK_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

struct ModelBundle {
  ModelParams model;
  BiasModel bias;
};

std::vector<SensorSpec> sensors_from_config(const PipelineConfig& cfg) {
  const double noise = cfg.get_double("synth.noise_sigma");
  const double dropout = cfg.get_double("synth.dropout_prob");
  std::vector<SensorSpec> out;
  for (const auto& name : split_list(cfg.get_string("synth.sensors"))) {
    const SensorId id = sensor_from_string(name);
    switch (id) {
      case SensorId::lidar_conic: out.push_back(SensorSpec::conic_lidar(noise, dropout)); break;
      case SensorId::lidar_peri: out.push_back(SensorSpec::peri_lidar(noise, dropout)); break;
      case SensorId::radar: out.push_back(SensorSpec::radar(noise, dropout)); break;
    }
  }
  if (out.empty()) throw ConfigError("synth.sensors: at least one sensor required");
  return out;
}

Scenario scenario_from_config(const PipelineConfig& cfg, std::uint64_t seed, bool with_gaps) {
  Scenario sc;
  sc.seed = seed;
  sc.duration = cfg.get_double("synth.duration");
  sc.uav_class = uav_class_from_string(cfg.get_string("synth.uav_class"));
  sc.waypoints = parse_waypoints(cfg.get_string("synth.waypoints"));
  sc.clutter_rate = cfg.get_double("synth.clutter_rate");
  sc.bias_gain = cfg.get_double("synth.bias_gain");
  if (with_gaps) sc.gaps = parse_gaps(cfg.get_string("synth.gaps"));
  return sc;
}

TrainConfig train_config(const PipelineConfig& cfg) {
  TrainConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("seqnet.epochs"));
  tc.batch = static_cast<int>(cfg.get_int("seqnet.batch"));
  tc.lr = cfg.get_double("seqnet.lr");
  tc.momentum = cfg.get_double("seqnet.momentum");
  tc.seed = Rng::derive_seed(cfg.get_u64("seed"), "seqnet");
  tc.uav_class_weight = cfg.get_double("seqnet.uav_weight");
  tc.holdout_fraction = cfg.get_double("seqnet.holdout");
  tc.detect_threshold = cfg.get_double("seqnet.threshold");
  tc.hidden = static_cast<int>(cfg.get_int("seqnet.hidden"));
  tc.augment_enabled = cfg.get_bool("seqnet.augment");
  tc.aug = {cfg.get_double("seqnet.p_drop"), cfg.get_double("seqnet.p_reverse"),
            cfg.get_double("seqnet.p_rotate")};
  tc.regressor_max_points = static_cast<int>(cfg.get_int("seqnet.regressor_max_points"));
  return tc;
}

// Window -> labeled samples for one scenario; background clusters are
// capped per window to keep the classes balanced.
std::vector<LabeledWindowSample> harvest_samples(const PipelineConfig& cfg,
                                                 const SyntheticSequence& seq, Rng& bg_rng) {
  const int w = static_cast<int>(cfg.get_int("dynpoints.w"));
  const int stride = static_cast<int>(cfg.get_int("dynpoints.stride"));
  const double eps = cfg.get_double("dynpoints.eps");
  const int min_points = static_cast<int>(cfg.get_int("dynpoints.min_points"));
  const double r_pos = cfg.get_double("dynpoints.r_pos");
  const double r_neg = cfg.get_double("dynpoints.r_neg");
  const int max_bg = static_cast<int>(cfg.get_int("train.max_bg_per_window"));

  std::vector<LabeledWindowSample> dataset;
  for (const auto& window : build_windows(seq.frames, w, stride)) {
    const auto clusters = cluster_window(window, eps, min_points);
    if (clusters.empty()) continue;
    std::vector<ClusterTrackFeature> features;
    features.reserve(clusters.size());
    for (const auto& c : clusters) features.push_back(extract_features(c, window));
    auto samples = label_clusters(clusters, features, seq.truth, r_pos, r_neg);

    std::vector<LabeledWindowSample> uav, bg;
    for (auto& s : samples)
      (s.label == SampleLabel::uav ? uav : bg).push_back(std::move(s));
    if (max_bg > 0 && static_cast<int>(bg.size()) > max_bg) {
      // seeded subsample of the background clusters
      for (int i = 0; i < max_bg; ++i) {
        const auto j = i + static_cast<int>(bg_rng.next_below(bg.size() - static_cast<std::size_t>(i)));
        std::swap(bg[static_cast<std::size_t>(i)], bg[static_cast<std::size_t>(j)]);
      }
      bg.resize(static_cast<std::size_t>(max_bg));
    }
    for (auto& s : uav) dataset.push_back(std::move(s));
    for (auto& s : bg) dataset.push_back(std::move(s));
  }
  return dataset;
}

double median_interval(const std::vector<std::vector<StampedVec3>>& histories) {
  std::vector<double> stamps;
  for (const auto& h : histories)
    for (const auto& [t, p] : h) stamps.push_back(t);
  std::sort(stamps.begin(), stamps.end());
  std::vector<double> deltas;
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    const double d = stamps[i] - stamps[i - 1];
    if (d > 1e-9) deltas.push_back(d);
  }
  if (deltas.empty()) return 0.5;
  std::sort(deltas.begin(), deltas.end());
  return deltas[deltas.size() / 2];
}

}  // namespace

std::string Pipeline::run_dir() const { return cfg_.get_string("io.run_dir"); }

std::string Pipeline::seq_dir(int i) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "seq_%03d", i);
  return run_dir() + "/" + buf;
}

int Pipeline::n_sequences() const { return static_cast<int>(cfg_.get_int("synth.sequences")); }

void Pipeline::run(const std::string& stage) {
  const auto start = std::chrono::steady_clock::now();
  if (stage == "synth") {
    cmd_synth();
  } else if (stage == "detect") {
    cmd_detect();
  } else if (stage == "track") {
    cmd_track();
  } else if (stage == "finish") {
    cmd_finish();
  } else if (stage == "plot") {
    cmd_plot();
  } else if (stage == "classify") {
    cmd_classify();
  } else if (stage == "eval") {
    cmd_eval();
  } else if (stage == "gradcheck") {
    cmd_gradcheck();
  } else if (stage == "pipeline") {
    for (const char* s : {"synth", "detect", "track", "finish", "plot", "classify", "eval"})
      run(s);
    return;
  } else {
    throw ConfigError("unknown stage '" + stage + "'");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report_.runtime_s[stage] = secs;
  metrics_["runtime." + stage] = secs;
  std::cerr << "[aerotrack] " << stage << " finished in " << secs << " s\n";
}

void Pipeline::cmd_synth() {
  const std::uint64_t root = cfg_.get_u64("seed");
  fs::create_directories(run_dir());
  const auto sensors = sensors_from_config(cfg_);
  const double gt_rate = cfg_.get_double("synth.gt_rate");

  const int n = n_sequences();
  parallel_for(n, effective_threads(cfg_), [&](int i) {
    fs::create_directories(seq_dir(i));
    const auto seed = Rng::derive_seed(Rng::derive_seed(root, "synth"), static_cast<std::uint64_t>(i));
    const Scenario sc = scenario_from_config(cfg_, seed, /*with_gaps=*/true);
    const SyntheticSequence seq = generate_scenario(sc, sensors, gt_rate);
    for (const auto& w : seq.warnings) std::cerr << "[aerotrack] synth seq " << i << ": " << w << "\n";
    write_frames(seq_dir(i) + "/frames.jsonl", seq.frames);
    write_gt(seq_dir(i) + "/gt.csv", seq.truth);
  });

  ScoreStreamParams sp;
  sp.seed = Rng::derive_seed(root, "scores");
  sp.n_real_sequences = static_cast<int>(cfg_.get_int("scores.n_real"));
  sp.embed_dim = static_cast<int>(cfg_.get_int("scores.embed_dim"));
  sp.acc_lo = cfg_.get_double("scores.acc_lo");
  sp.acc_hi = cfg_.get_double("scores.acc_hi");
  const ScoreStream stream = synth_scores(sp);
  write_scores(run_dir() + "/scores.jsonl", stream.records);
  write_seq_labels(run_dir() + "/scores_gt.csv", stream.labels);
}

void Pipeline::cmd_detect() {
  const std::uint64_t root = cfg_.get_u64("seed");
  std::string checkpoint = cfg_.get_string("train.checkpoint");
  if (checkpoint.empty()) checkpoint = run_dir() + "/model.json";
  const std::string bias_path = run_dir() + "/bias.json";

  ModelBundle bundle;
  if (fs::exists(checkpoint) && fs::exists(bias_path)) {
    bundle.model = load_model(checkpoint);
    bundle.bias = load_bias_model(bias_path);
  } else {
    // train the detector on freshly generated scenarios (gap-free variants
    // of the configured scenario with their own seeds)
    const auto sensors = sensors_from_config(cfg_);
    const int n_scen = static_cast<int>(cfg_.get_int("train.scenarios"));
    Rng bg_rng(Rng::derive_seed(root, "train.bg"));
    std::vector<LabeledWindowSample> dataset;
    for (int s = 0; s < n_scen; ++s) {
      const auto seed = Rng::derive_seed(Rng::derive_seed(root, "train"), static_cast<std::uint64_t>(s));
      const Scenario sc = scenario_from_config(cfg_, seed, /*with_gaps=*/false);
      const SyntheticSequence seq = generate_scenario(sc, sensors, cfg_.get_double("synth.gt_rate"));
      auto part = harvest_samples(cfg_, seq, bg_rng);
      dataset.insert(dataset.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
    }
    std::cerr << "[aerotrack] detect: training on " << dataset.size() << " samples from " << n_scen
              << " scenarios\n";
    const TrainConfig tc = train_config(cfg_);
    bundle.model = init_model(tc);
    const TrainMetrics tm = train(bundle.model, dataset, tc);
    metrics_["det_accuracy"] = tm.holdout_accuracy;
    metrics_["det_recall"] = tm.holdout_recall;
    metrics_["center_mse_before"] = tm.center_mse_before;
    metrics_["center_mse_after"] = tm.center_mse_after;
    std::cerr << "[aerotrack] detect: holdout accuracy " << tm.holdout_accuracy << ", uav recall "
              << tm.holdout_recall << ", center mse " << tm.center_mse_before << " -> "
              << tm.center_mse_after << "\n";

    // polynomial bias correction fitted on the regressor's own outputs
    std::vector<Vec3> pred, truth;
    for (const auto& s : dataset) {
      if (s.label != SampleLabel::uav) continue;
      pred.push_back(regress_center(bundle.model.regressor, cap_points(s.points, tc.regressor_max_points)));
      truth.push_back(s.target_center);
    }
    BiasFitReport fit_report;
    bundle.bias = fit_bias(pred, truth, PolyBasis::full_cubic(), cfg_.get_double("centerfix.ridge"),
                           &fit_report);
    metrics_["bias_mse_before"] = fit_report.mse_before;
    metrics_["bias_mse_after"] = fit_report.mse_after;
    std::cerr << "[aerotrack] detect: center bias fit mse " << fit_report.mse_before << " -> "
              << fit_report.mse_after << "\n";
    fs::create_directories(run_dir());
    save_model(checkpoint, bundle.model);
    save_bias_model(bias_path, bundle.bias);
  }

  const int w = static_cast<int>(cfg_.get_int("dynpoints.w"));
  const int stride = static_cast<int>(cfg_.get_int("dynpoints.stride"));
  const double eps = cfg_.get_double("dynpoints.eps");
  const int min_points = static_cast<int>(cfg_.get_int("dynpoints.min_points"));
  const double threshold = cfg_.get_double("seqnet.threshold");
  const int max_points = static_cast<int>(cfg_.get_int("seqnet.regressor_max_points"));

  parallel_for(n_sequences(), effective_threads(cfg_), [&](int i) {
    FrameReader reader(seq_dir(i) + "/frames.jsonl");
    WindowBuilder builder(w, stride);
    std::vector<Detection> detections;
    long frame_count = 0;
    while (auto frame = reader.next()) {
      ++frame_count;
      auto window = builder.push(*frame);
      if (!window) continue;
      const auto clusters = cluster_window(*window, eps, min_points);
      for (const auto& cluster : clusters) {
        const auto feature = extract_features(cluster, *window);
        const auto fwd = lstm_attn_forward(bundle.model.lstm, feature.seq, feature.mask);
        const auto cls = classify_forward(bundle.model.classifier, fwd.context);
        if (cls.probs[1] < threshold) continue;
        std::vector<Vec3> points;
        points.reserve(cluster.members.size());
        for (const auto& m : cluster.members) points.push_back(m.p);
        const Vec3 center = regress_center(bundle.model.regressor, cap_points(points, max_points));
        Detection det;
        det.t = window->t_end;
        det.center = bundle.bias.apply(center);
        det.score = cls.probs[1];
        det.n_points = static_cast<int>(cluster.members.size());
        detections.push_back(det);
      }
    }
    if (frame_count < w)
      std::cerr << "[aerotrack] detect seq " << i << ": fewer than " << w
                << " frames, no windows emitted\n";
    write_detections(seq_dir(i) + "/detections.jsonl", detections);
  });
}

void Pipeline::cmd_track() {
  TrackerConfig tcfg;
  tcfg.q = cfg_.get_double("mot.q");
  tcfg.r = cfg_.get_double("mot.r");
  tcfg.gate = cfg_.get_double("mot.gate");
  tcfg.cov_kill = cfg_.get_double("mot.cov_kill");
  tcfg.n_confirm = static_cast<int>(cfg_.get_int("mot.n_confirm"));

  parallel_for(n_sequences(), effective_threads(cfg_), [&](int i) {
    const auto detections = read_detections(seq_dir(i) + "/detections.jsonl");
    const auto tracks = run_tracker(detections, tcfg);
    std::vector<TrackDump> dumps;
    for (const auto& t : tracks) dumps.push_back({t.id, t.history});
    write_tracks(seq_dir(i) + "/tracks.csv", dumps);
  });
}

void Pipeline::cmd_finish() {
  const double knot_spacing = cfg_.get_double("trajfinish.knot_spacing");
  const double smooth_weight = cfg_.get_double("trajfinish.smooth_weight");
  const double max_extrap = cfg_.get_double("trajfinish.max_extrap");

  parallel_for(n_sequences(), effective_threads(cfg_), [&](int i) {
    const auto dumps = read_tracks(seq_dir(i) + "/tracks.csv");
    const GroundTruth gt = read_gt(seq_dir(i) + "/gt.csv");
    std::vector<Timestamp> stamps;
    for (const auto& [t, p] : gt.samples) stamps.push_back(t);

    std::vector<std::vector<StampedVec3>> histories;
    for (const auto& d : dumps) histories.push_back(d.history);

    Trajectory final_traj;
    if (histories.empty()) {
      std::cerr << "[aerotrack] finish seq " << i << ": no confirmed tracks, empty trajectory\n";
    } else {
      const double dt = median_interval(histories);
      std::vector<std::string> warnings;
      const Trajectory base =
          complete(histories, dt, stamps.front(), stamps.back(), max_extrap, &warnings);
      for (const auto& w : warnings) std::cerr << "[aerotrack] finish seq " << i << ": " << w << "\n";
      if (base.samples.size() >= 5 && base.samples.back().t > base.samples.front().t) {
        const SplineFit spline = smooth_bspline(base, knot_spacing, smooth_weight);
        final_traj = eval_at(spline, stamps, base);
      } else if (!base.samples.empty()) {
        // too short for a spline: piecewise-linear fallback with endpoint hold
        std::vector<StampedVec3> hist;
        for (const auto& s : base.samples) hist.emplace_back(s.t, s.p);
        for (const double t : stamps) {
          TrajSample s;
          s.t = t;
          if (t <= hist.front().first) {
            s.p = hist.front().second;
            s.flag = TrajFlag::interpolated;
          } else if (t >= hist.back().first) {
            s.p = hist.back().second;
            s.flag = TrajFlag::interpolated;
          } else {
            auto it = std::lower_bound(hist.begin(), hist.end(), t,
                                       [](const StampedVec3& a, double v) { return a.first < v; });
            const auto& [tb, pb] = *it;
            const auto& [ta, pa] = *(it - 1);
            const double w = (t - ta) / (tb - ta);
            s.p = pa + (pb - pa) * w;
            s.flag = TrajFlag::interpolated;
          }
          final_traj.samples.push_back(s);
        }
      }
    }
    write_traj(seq_dir(i) + "/traj.csv", final_traj);
  });
}

void Pipeline::cmd_plot() {
  parallel_for(n_sequences(), effective_threads(cfg_), [&](int i) {
    const Trajectory traj = read_traj(seq_dir(i) + "/traj.csv");
    const GroundTruth gt = read_gt(seq_dir(i) + "/gt.csv");
    const std::string svg = emit_plot(traj, gt);
    std::ofstream out(seq_dir(i) + "/plot.svg");
    if (!out) throw IoError("cannot open '" + seq_dir(i) + "/plot.svg' for writing");
    out << svg;
  });
}

void Pipeline::cmd_classify() {
  const auto records = read_scores(run_dir() + "/scores.jsonl");
  const auto predictions =
      classify_scores(records, cfg_.get_double("seqcls.tau"), static_cast<int>(cfg_.get_int("seqcls.k")),
                      cfg_.get_double("seqcls.sample_ratio"), cfg_.get_bool("seqcls.adjacency_only"));
  write_predictions(run_dir() + "/predictions.csv", predictions);
}

void Pipeline::cmd_eval() {
  const int n = n_sequences();
  report_.per_sequence_mse.assign(static_cast<std::size_t>(n), 0.0);
  bool have_pose = false;
  for (int i = 0; i < n; ++i) {
    const std::string traj_path = seq_dir(i) + "/traj.csv";
    if (!fs::exists(traj_path)) continue;
    const Trajectory traj = read_traj(traj_path);
    const GroundTruth gt = read_gt(seq_dir(i) + "/gt.csv");
    std::vector<StampedVec3> pred;
    for (const auto& s : traj.samples) pred.emplace_back(s.t, s.p);
    const double mse = mse_3d(pred, gt.samples);
    report_.per_sequence_mse[static_cast<std::size_t>(i)] = mse;
    metrics_["seq_mse_" + std::to_string(i)] = mse;
    have_pose = true;
  }
  if (have_pose) {
    double sum = 0.0;
    for (const double m : report_.per_sequence_mse) sum += m;
    report_.pose_mse = sum / static_cast<double>(n);
    metrics_["pose_mse"] = report_.pose_mse;
    std::cerr << "[aerotrack] eval: pose mse " << report_.pose_mse << " m^2 over " << n
              << " sequence(s)\n";
  }

  bool have_cls = false;
  const std::string pred_path = run_dir() + "/predictions.csv";
  const std::string labels_path = run_dir() + "/scores_gt.csv";
  if (fs::exists(pred_path) && fs::exists(labels_path)) {
    const auto predictions = read_predictions(pred_path);
    const auto labels = read_seq_labels(labels_path);
    int correct = 0, total = 0;
    for (auto& row : report_.confusion) row.fill(0);
    for (const auto& p : predictions) {
      const auto it = labels.find(p.seq_id);
      if (it == labels.end())
        throw IoError("eval: seq_id '" + p.seq_id + "' missing from scores_gt.csv");
      const int truth = static_cast<int>(it->second);
      const int pred = static_cast<int>(p.cls);
      report_.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)] += 1;
      if (truth == pred) ++correct;
      ++total;
    }
    if (total > 0) {
      report_.classification_accuracy = static_cast<double>(correct) / static_cast<double>(total);
      metrics_["classification_accuracy"] = report_.classification_accuracy;
      have_cls = true;
      std::cerr << "[aerotrack] eval: classification accuracy " << report_.classification_accuracy
                << " over " << total << " recording sequences\n";
    }
  }
  if (!have_pose && !have_cls)
    throw IoError("eval: nothing to evaluate (no traj.csv and no predictions.csv under '" +
                  run_dir() + "')");

  json j;
  if (have_pose) {
    j["pose_mse"] = report_.pose_mse;
    j["per_sequence_mse"] = report_.per_sequence_mse;
  }
  if (have_cls) {
    j["classification_accuracy"] = report_.classification_accuracy;
    j["confusion"] = report_.confusion;
  }
  std::ofstream out(run_dir() + "/eval.json");
  if (!out) throw IoError("cannot open '" + run_dir() + "/eval.json' for writing");
  out << j.dump(1) << '\n';
}

void Pipeline::cmd_gradcheck() {
  const auto report = gradient_check(Rng::derive_seed(cfg_.get_u64("seed"), "gradcheck"));
  for (const auto& [name, err] : report.per_tensor)
    std::cout << "gradcheck " << name << " max_rel_err " << err << "\n";
  std::cout << "gradcheck max relative error: " << report.max_rel_err << "\n";
  metrics_["gradcheck_max_rel_err"] = report.max_rel_err;
  if (report.max_rel_err >= 1e-4)
    throw NumericError("gradient check failed: max relative error " +
                       std::to_string(report.max_rel_err));
}

}  // namespace aerotrack
