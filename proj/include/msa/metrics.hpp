// Identification and verification metrics: Top-k accuracy, EER with linear
// interpolation between adjacent ROC points, min-cost-normalized minDCF, and
// linear score fusion over aligned trial lists.

#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "msa/manifest.hpp"
#include "msa/rng.hpp"

namespace msa {

struct TrialPair {
  std::string enrol;
  std::string test;
  bool is_target = false;

  bool operator==(const TrialPair&) const = default;
};

struct ScoreSet {
  std::vector<TrialPair> trials;
  std::vector<double> scores;

  void validate() const {
    if (trials.size() != scores.size())
      throw std::invalid_argument("ScoreSet: trial/score length mismatch");
    if (trials.empty()) throw std::invalid_argument("ScoreSet: empty");
  }

  bool both_classes() const {
    bool t = false, n = false;
    for (const auto& p : trials) (p.is_target ? t : n) = true;
    return t && n;
  }
};

// Fraction of items whose true label is among the k largest logits; ties go to
// the lower index, so an item counts iff fewer than k entries outrank its own.
inline double topk_accuracy(const std::vector<std::vector<double>>& logits,
                            const std::vector<std::size_t>& labels,
                            std::size_t k) {
  if (logits.empty() || logits.size() != labels.size())
    throw std::invalid_argument("topk_accuracy: empty or mismatched input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& row = logits[i];
    const std::size_t y = labels[i];
    if (k < 1 || k > row.size() || y >= row.size())
      throw std::invalid_argument("topk_accuracy: bad k or label");
    std::size_t rank = 0;  // entries strictly ahead of the true label
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] > row[y] || (row[j] == row[y] && j < y)) ++rank;
    if (rank < k) ++correct;
  }
  return double(correct) / double(logits.size());
}

namespace detail {

// (FRR, FAR) operating points at every threshold taken from the score values,
// plus a reject-everything sentinel; FRR(t)=P(target<t), FAR(t)=P(non>=t).
inline std::vector<std::array<double, 2>> roc_points(const ScoreSet& s) {
  std::size_t n_tar = 0, n_non = 0;
  for (const auto& p : s.trials) (p.is_target ? n_tar : n_non)++;
  std::vector<std::pair<double, bool>> sorted(s.scores.size());
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    sorted[i] = {s.scores[i], s.trials[i].is_target};
  std::sort(sorted.begin(), sorted.end());

  std::vector<std::array<double, 2>> pts;
  std::size_t tar_below = 0, non_below = 0, i = 0;
  while (i <= sorted.size()) {
    pts.push_back({double(tar_below) / double(n_tar),
                   double(n_non - non_below) / double(n_non)});
    if (i == sorted.size()) break;
    const double t = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == t) {
      (sorted[i].second ? tar_below : non_below)++;
      ++i;
    }
  }
  return pts;
}

}  // namespace detail

inline double compute_eer(const ScoreSet& s) {
  s.validate();
  if (!s.both_classes())
    throw std::invalid_argument("compute_eer: need both classes");
  const auto pts = detail::roc_points(s);
  // FRR-FAR rises monotonically from -1 (accept all) to +1 (reject all);
  // find the sign change and interpolate linearly between the two points.
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d0 = pts[i - 1][0] - pts[i - 1][1];
    const double d1 = pts[i][0] - pts[i][1];
    if (d1 < 0.0) continue;
    if (d1 == 0.0) return pts[i][0];
    if (d0 == d1) return pts[i][0];
    const double lam = -d0 / (d1 - d0);
    return pts[i - 1][0] + lam * (pts[i][0] - pts[i - 1][0]);
  }
  return pts.back()[0];  // unreachable for well-formed sets
}

inline double min_dcf(const ScoreSet& s, double p_target, double c_miss = 1.0,
                      double c_fa = 1.0) {
  s.validate();
  if (!s.both_classes())
    throw std::invalid_argument("min_dcf: need both classes");
  if (!(p_target > 0.0 && p_target < 1.0))
    throw std::invalid_argument("min_dcf: p_target must be in (0,1)");
  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pt : detail::roc_points(s)) {
    const double cost = c_miss * p_target * pt[0] + c_fa * (1.0 - p_target) * pt[1];
    best = std::min(best, cost);
  }
  return best / norm;
}

// Mean of the two operating points reported alongside EER.
inline double avg_min_dcf(const ScoreSet& s) {
  return 0.5 * (min_dcf(s, 0.01) + min_dcf(s, 0.001));
}

inline ScoreSet fuse_scores(double alpha, const ScoreSet& a, const ScoreSet& b) {
  a.validate();
  b.validate();
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("fuse_scores: alpha outside [0,1]");
  if (a.trials != b.trials)
    throw std::invalid_argument("fuse_scores: misaligned trial lists");
  ScoreSet out;
  out.trials = a.trials;
  // b + alpha*(a-b): endpoints and fuse(alpha, a, a) are exact, not rounded
  if (alpha == 1.0) {
    out.scores = a.scores;
  } else if (alpha == 0.0) {
    out.scores = b.scores;
  } else {
    out.scores.resize(a.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i)
      out.scores[i] = b.scores[i] + alpha * (a.scores[i] - b.scores[i]);
  }
  return out;
}

inline std::vector<std::vector<double>> fuse_logits(
    double alpha, const std::vector<std::vector<double>>& a,
    const std::vector<std::vector<double>>& b) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("fuse_logits: alpha outside [0,1]");
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("fuse_logits: misaligned logit lists");
  std::vector<std::vector<double>> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size())
      throw std::invalid_argument("fuse_logits: row width mismatch");
    out[i].resize(a[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j)
      out[i][j] = alpha == 1.0 ? a[i][j]
                  : alpha == 0.0
                      ? b[i][j]
                      : b[i][j] + alpha * (a[i][j] - b[i][j]);
  }
  return out;
}

// Balanced target/non-target pairs over the given utterances, deterministic
// under the seed.  Target pairs need a speaker with >= 2 utterances.
inline std::vector<TrialPair> build_trials(
    const std::vector<UtteranceRecord>& utts, Rng& rng, std::size_t n_pairs) {
  if (utts.size() < 2)
    throw std::invalid_argument("build_trials: need >= 2 utterances");
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < utts.size(); ++i)
    by_speaker[utts[i].speaker].push_back(i);
  if (by_speaker.size() < 2)
    throw std::invalid_argument("build_trials: need >= 2 speakers");
  std::vector<std::string> speakers;
  std::vector<std::string> multi;  // speakers usable for target pairs
  for (const auto& [spk, idx] : by_speaker) {
    speakers.push_back(spk);
    if (idx.size() >= 2) multi.push_back(spk);
  }
  if (multi.empty())
    throw std::invalid_argument("build_trials: no speaker has 2 utterances");

  std::bernoulli_distribution coin(0.5);
  std::vector<TrialPair> out;
  out.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    TrialPair p;
    p.is_target = coin(rng);
    if (p.is_target) {
      const auto& idx = by_speaker.at(
          multi[std::uniform_int_distribution<std::size_t>(0, multi.size() - 1)(rng)]);
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      std::size_t a = pick(rng), b = pick(rng);
      while (b == a) b = pick(rng);
      p.enrol = utts[idx[a]].path;
      p.test = utts[idx[b]].path;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, speakers.size() - 1);
      std::size_t sa = pick(rng), sb = pick(rng);
      while (sb == sa) sb = pick(rng);
      const auto& ia = by_speaker.at(speakers[sa]);
      const auto& ib = by_speaker.at(speakers[sb]);
      p.enrol = utts[ia[std::uniform_int_distribution<std::size_t>(0, ia.size() - 1)(rng)]].path;
      p.test = utts[ib[std::uniform_int_distribution<std::size_t>(0, ib.size() - 1)(rng)]].path;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace msa
