#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerotrack/types.hpp"

namespace aerotrack {

// All pipeline file formats. Floats are serialized with 9 significant
// digits ("%.9g"), which makes write->read->write a fixed point: stage
// outputs are byte-stable and evaluation stamps survive the round trip.

std::string fmt_g9(double v);

// --- frames.jsonl ---------------------------------------------------------
// {"t": <s>, "sensor": "lidar_conic"|"lidar_peri"|"radar", "points": [[x,y,z],...]}

class FrameReader {
public:
  explicit FrameReader(const std::string& path);
  std::optional<FramePointCloud> next();  // throws IoError with line number on bad input

private:
  std::ifstream in_;
  std::string path_;
  std::size_t line_no_ = 0;
  double last_t_ = 0.0;
  bool saw_any_ = false;
};

class FrameWriter {
public:
  explicit FrameWriter(const std::string& path);
  void write(const FramePointCloud& frame);

private:
  std::ofstream out_;
  std::string path_;
};

std::vector<FramePointCloud> read_frames(const std::string& path);
void write_frames(const std::string& path, const std::vector<FramePointCloud>& frames);

// --- gt.csv ----------------------------------------------------------------
// header: t,x,y,z,class
GroundTruth read_gt(const std::string& path);
void write_gt(const std::string& path, const GroundTruth& gt);

// --- detections.jsonl -------------------------------------------------------
// {"t": <s>, "center": [x,y,z], "score": <0..1>, "n_points": <int>}
std::vector<Detection> read_detections(const std::string& path);
void write_detections(const std::string& path, const std::vector<Detection>& dets);

// --- tracks.csv --------------------------------------------------------------
// header: track_id,t,x,y,z  (rows grouped by track, time-sorted within track)
struct TrackDump {
  int track_id = 0;
  std::vector<StampedVec3> history;
};
std::vector<TrackDump> read_tracks(const std::string& path);
void write_tracks(const std::string& path, const std::vector<TrackDump>& tracks);

// --- scores.jsonl -------------------------------------------------------------
// {"seq_id": <str>, "frame": <int>, "embedding": [...], "det_conf": <f>, "softmax": [p0..p3]}
std::vector<FrameRecord> read_scores(const std::string& path);
void write_scores(const std::string& path, const std::vector<FrameRecord>& records);

// --- traj.csv -----------------------------------------------------------------
// header: t,x,y,z,flag
Trajectory read_traj(const std::string& path);
void write_traj(const std::string& path, const Trajectory& traj);

// --- predictions.csv ------------------------------------------------------------
// header: seq_id,class,score0,score1,score2,score3
std::vector<SequencePrediction> read_predictions(const std::string& path);
void write_predictions(const std::string& path, const std::vector<SequencePrediction>& preds);

// --- seq_labels.csv ---------------------------------------------------------
// header: seq_id,class — truth labels for the classification benchmark
std::map<std::string, UavClass> read_seq_labels(const std::string& path);
void write_seq_labels(const std::string& path, const std::vector<std::pair<std::string, UavClass>>& labels);

}  // namespace aerotrack
