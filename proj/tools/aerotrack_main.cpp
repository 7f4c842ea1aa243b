// aerotrack CLI: thin front end over the shared C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aerotrack_c.h"

int main(int argc, char** argv) {
  CLI::App app{"offline multi-sensor UAV tracking and type classification"};
  app.require_subcommand(1);

  const std::vector<std::string> stages = {"synth",    "detect", "track", "finish",   "plot",
                                           "classify", "eval",   "pipeline", "gradcheck"};
  const char* descriptions[] = {
      "generate synthetic sensor sequences and score streams",
      "train/load the detector and emit per-window detections",
      "run the Kalman multi-object tracker over detections",
      "complete, smooth, and resample trajectories",
      "render trajectory SVG plots",
      "classify UAV type from score streams",
      "compute pose MSE and classification accuracy",
      "run every stage in order",
      "finite-difference check of the network gradients",
  };

  std::string config_path;
  std::vector<std::string> overrides;
  bool dump_config = false;
  std::string selected;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto* sub = app.add_subcommand(stages[i], descriptions[i]);
    sub->add_option("--config", config_path, "config file of dotted keys");
    sub->add_option("--set", overrides, "override, e.g. --set mot.gate=9.5")->take_all();
    sub->add_flag("--dump-config", dump_config, "print the effective config and exit");
    sub->callback([&selected, name = stages[i]] { selected = name; });
  }

  CLI11_PARSE(app, argc, argv);

  at_pipeline* pipeline = at_pipeline_new();
  if (!pipeline) {
    std::fprintf(stderr, "aerotrack: error code=1: out of memory\n");
    return 1;
  }

  int rc = AT_OK;
  if (!config_path.empty()) rc = at_pipeline_load_config(pipeline, config_path.c_str());
  for (std::size_t i = 0; rc == AT_OK && i < overrides.size(); ++i) {
    const auto& kv = overrides[i];
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "aerotrack: error code=2: --set expects key=value, got '%s'\n", kv.c_str());
      at_pipeline_free(pipeline);
      return 2;
    }
    rc = at_pipeline_set(pipeline, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
  }

  if (rc == AT_OK && dump_config) {
    size_t needed = 0;
    at_pipeline_dump_config(pipeline, nullptr, 0, &needed);
    std::string buf(needed, '\0');
    at_pipeline_dump_config(pipeline, buf.data(), buf.size(), &needed);
    std::fputs(buf.c_str(), stdout);
    at_pipeline_free(pipeline);
    return 0;
  }

  if (rc == AT_OK) rc = at_pipeline_run(pipeline, selected.c_str());

  if (rc != AT_OK) {
    std::fprintf(stderr, "aerotrack: error code=%d: %s\n", rc, at_pipeline_error(pipeline));
    at_pipeline_free(pipeline);
    return rc;
  }

  // headline metrics, when the stage produced them
  const char* headline[] = {"pose_mse", "classification_accuracy", "det_accuracy", "det_recall",
                            "gradcheck_max_rel_err"};
  for (const char* name : headline) {
    double value = 0.0;
    if (at_pipeline_metric(pipeline, name, &value) == AT_OK)
      std::printf("%s %.9g\n", name, value);
  }

  at_pipeline_free(pipeline);
  return 0;
}
