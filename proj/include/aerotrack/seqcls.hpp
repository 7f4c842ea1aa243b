#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "aerotrack/rng.hpp"
#include "aerotrack/types.hpp"

namespace aerotrack {

// Score-level UAV type classification over precomputed per-frame records:
// group recording sequences into real sequences by embedding similarity,
// select keyframes by detector confidence, and aggregate softmax scores.

// Deterministic stride sampling (every round(1/sample_ratio)-th frame,
// first frame always included), then the mean of the sampled embeddings.
std::vector<double> pool_embedding(const std::vector<FrameRecord>& records, double sample_ratio);

double cosine(const std::vector<double>& u, const std::vector<double>& v);

struct RealSequence {
  std::vector<std::string> members;  // recording order
  std::vector<double> pooled;        // mean of member pooled embeddings
};

// Connected components over cosine >= tau edges; adjacency_only restricts
// edges to temporally adjacent recordings (the default, matching the
// assumption of a substantial gap between distinct real sequences).
std::vector<RealSequence> fuse_sequences(
    const std::vector<std::pair<std::string, std::vector<double>>>& pooled_in_order, double tau,
    bool adjacency_only);

// Top-k by detector confidence; ties broken by (seq_id, frame) ascending.
std::vector<FrameRecord> select_keyframes(const std::vector<FrameRecord>& records, int k);

// Elementwise sum of the keyframe softmax vectors; argmax label with ties
// broken by class order.
std::pair<UavClass, std::array<double, 4>> soft_vote(const std::vector<FrameRecord>& keyframes);

// Seeded uniform subsample without replacement when count > cap; original
// order is preserved.
std::vector<FrameRecord> cap_training_samples(const std::vector<FrameRecord>& records, int cap,
                                              Rng& rng);

// Whole-module pipeline over a scores stream: every member recording of a
// real sequence receives that real sequence's vote.
std::vector<SequencePrediction> classify_scores(const std::vector<FrameRecord>& records, double tau,
                                                int k, double sample_ratio, bool adjacency_only);

}  // namespace aerotrack
