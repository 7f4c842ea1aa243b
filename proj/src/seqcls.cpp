#include "aerotrack/seqcls.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "aerotrack/errors.hpp"

namespace aerotrack {

std::vector<double> pool_embedding(const std::vector<FrameRecord>& records, double sample_ratio) {
  if (records.empty()) throw NumericError("pool_embedding: empty sequence");
  if (!(sample_ratio > 0.0) || sample_ratio > 1.0)
    throw NumericError("pool_embedding: sample_ratio must be in (0, 1]");
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / sample_ratio)));
  const std::size_t dim = records.front().embedding.size();
  std::vector<double> mean(dim, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < records.size(); i += stride) {
    const auto& e = records[i].embedding;
    if (e.size() != dim) throw NumericError("pool_embedding: inconsistent embedding dims");
    for (std::size_t k = 0; k < dim; ++k) mean[k] += e[k];
    ++count;
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw NumericError("cosine: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

namespace {
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};
}  // namespace

std::vector<RealSequence> fuse_sequences(
    const std::vector<std::pair<std::string, std::vector<double>>>& pooled_in_order, double tau,
    bool adjacency_only) {
  if (!(tau > -1.0) || !(tau < 1.0)) throw NumericError("fuse_sequences: tau must be in (-1, 1)");
  const std::size_t n = pooled_in_order.size();
  UnionFind uf(n);
  if (adjacency_only) {
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (cosine(pooled_in_order[i].second, pooled_in_order[i + 1].second) >= tau) uf.unite(i, i + 1);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (cosine(pooled_in_order[i].second, pooled_in_order[j].second) >= tau) uf.unite(i, j);
  }

  std::map<std::size_t, RealSequence> groups;  // keyed by component root = earliest member
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = groups[uf.find(i)];
    g.members.push_back(pooled_in_order[i].first);
    if (g.pooled.empty()) {
      g.pooled = pooled_in_order[i].second;
    } else {
      for (std::size_t k = 0; k < g.pooled.size(); ++k) g.pooled[k] += pooled_in_order[i].second[k];
    }
  }
  std::vector<RealSequence> out;
  for (auto& [root, g] : groups) {
    for (auto& v : g.pooled) v /= static_cast<double>(g.members.size());
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<FrameRecord> select_keyframes(const std::vector<FrameRecord>& records, int k) {
  if (k < 1) throw NumericError("select_keyframes: k must be >= 1");
  std::vector<FrameRecord> sorted = records;
  std::sort(sorted.begin(), sorted.end(), [](const FrameRecord& a, const FrameRecord& b) {
    if (a.det_conf != b.det_conf) return a.det_conf > b.det_conf;
    if (a.seq_id != b.seq_id) return a.seq_id < b.seq_id;
    return a.frame < b.frame;
  });
  if (static_cast<int>(sorted.size()) > k) sorted.resize(static_cast<std::size_t>(k));
  return sorted;
}

std::pair<UavClass, std::array<double, 4>> soft_vote(const std::vector<FrameRecord>& keyframes) {
  if (keyframes.empty()) throw NumericError("soft_vote: empty keyframe list");
  std::array<double, 4> sum{};
  for (const auto& r : keyframes)
    for (std::size_t k = 0; k < 4; ++k) sum[k] += r.softmax[k];
  std::size_t best = 0;
  for (std::size_t k = 1; k < 4; ++k)
    if (sum[k] > sum[best]) best = k;  // ties fall to the earlier class
  return {static_cast<UavClass>(best), sum};
}

std::vector<FrameRecord> cap_training_samples(const std::vector<FrameRecord>& records, int cap,
                                              Rng& rng) {
  if (cap < 1) throw NumericError("cap_training_samples: cap must be >= 1");
  if (static_cast<int>(records.size()) <= cap) return records;
  // partial Fisher-Yates over the index set, then restore original order
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) {
    const std::size_t j = i + rng.next_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  std::vector<FrameRecord> out;
  out.reserve(idx.size());
  for (const std::size_t i : idx) out.push_back(records[i]);
  return out;
}

std::vector<SequencePrediction> classify_scores(const std::vector<FrameRecord>& records, double tau,
                                                int k, double sample_ratio, bool adjacency_only) {
  // group by seq_id, recording order = first appearance in the stream
  std::vector<std::string> order;
  std::map<std::string, std::vector<FrameRecord>> by_seq;
  for (const auto& r : records) {
    auto [it, inserted] = by_seq.try_emplace(r.seq_id);
    if (inserted) order.push_back(r.seq_id);
    it->second.push_back(r);
  }
  for (auto& [id, recs] : by_seq)
    std::sort(recs.begin(), recs.end(),
              [](const FrameRecord& a, const FrameRecord& b) { return a.frame < b.frame; });

  std::vector<std::pair<std::string, std::vector<double>>> pooled;
  pooled.reserve(order.size());
  for (const auto& id : order) pooled.emplace_back(id, pool_embedding(by_seq[id], sample_ratio));

  const auto real_sequences = fuse_sequences(pooled, tau, adjacency_only);

  std::map<std::string, SequencePrediction> result;
  for (const auto& real : real_sequences) {
    std::vector<FrameRecord> all;
    for (const auto& member : real.members) {
      const auto& recs = by_seq[member];
      all.insert(all.end(), recs.begin(), recs.end());
    }
    const auto keyframes = select_keyframes(all, k);
    const auto [cls, scores] = soft_vote(keyframes);
    for (const auto& member : real.members) {
      SequencePrediction p;
      p.seq_id = member;
      p.cls = cls;
      p.scores = scores;
      result[member] = std::move(p);
    }
  }

  std::vector<SequencePrediction> out;
  out.reserve(order.size());
  for (const auto& id : order) out.push_back(result[id]);
  return out;
}

}  // namespace aerotrack
