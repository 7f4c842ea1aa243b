#pragma once

#include <array>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "aerotrack/config.hpp"

namespace aerotrack {

struct EvalReport {
  double pose_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_sequence_mse;
  double classification_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::array<std::array<int, 4>, 4> confusion{};  // [truth][predicted]
  std::map<std::string, double> runtime_s;        // per stage; console only, never serialized
};

// Orchestrates the full flow over a run directory:
//   synth -> detect -> track -> finish -> plot, and classify -> eval.
// Every stage is restartable from its on-disk inputs.
class Pipeline {
public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

  // stage: synth|detect|track|finish|plot|classify|eval|pipeline|gradcheck
  void run(const std::string& stage);

  const PipelineConfig& config() const { return cfg_; }
  PipelineConfig& config() { return cfg_; }
  const std::map<std::string, double>& metrics() const { return metrics_; }
  const EvalReport& report() const { return report_; }

private:
  void cmd_synth();
  void cmd_detect();
  void cmd_track();
  void cmd_finish();
  void cmd_plot();
  void cmd_classify();
  void cmd_eval();
  void cmd_gradcheck();

  std::string run_dir() const;
  std::string seq_dir(int i) const;
  int n_sequences() const;

  PipelineConfig cfg_;
  std::map<std::string, double> metrics_;
  EvalReport report_;
};

// Worker-pool map over [0, n); results are deterministic because each index
// owns its outputs and errors are re-thrown in index order.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Effective worker count: explicit config value, clamped by the
// AEROTRACK_THREADS environment variable; 0 means hardware concurrency.
int effective_threads(const PipelineConfig& cfg);

}  // namespace aerotrack
