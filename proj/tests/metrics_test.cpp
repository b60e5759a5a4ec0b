#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msa/metrics.hpp"

using namespace msa;

namespace {

ScoreSet make_set(const std::vector<double>& target_scores,
                  const std::vector<double>& nontarget_scores) {
  ScoreSet s;
  std::size_t id = 0;
  for (double v : target_scores) {
    s.trials.push_back({"e" + std::to_string(id), "t" + std::to_string(id), true});
    s.scores.push_back(v);
    ++id;
  }
  for (double v : nontarget_scores) {
    s.trials.push_back({"e" + std::to_string(id), "t" + std::to_string(id), false});
    s.scores.push_back(v);
    ++id;
  }
  return s;
}

ScoreSet random_set(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::bernoulli_distribution lab(0.5);
  ScoreSet s;
  bool seen_t = false, seen_n = false;
  for (std::size_t i = 0; i < n; ++i) {
    bool t = (i == n - 2) ? true : (i == n - 1) ? false : lab(rng);
    seen_t |= t;
    seen_n |= !t;
    s.trials.push_back({"e" + std::to_string(i), "t" + std::to_string(i), t});
    // quantized scores so exact ties occur regularly
    s.scores.push_back(std::round(d(rng) * 8.0) / 8.0);
  }
  (void)seen_t;
  (void)seen_n;
  return s;
}

// Exhaustive per-threshold recount: for every candidate threshold compute
// FRR/FAR by direct O(n) counting, then intersect the piecewise-linear DET
// segments with the FRR==FAR diagonal.
double oracle_eer(const ScoreSet& s) {
  std::vector<double> th = s.scores;
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(th.back() + 1.0);  // reject-everything point

  std::size_t n_tar = 0, n_non = 0;
  for (const auto& p : s.trials) (p.is_target ? n_tar : n_non)++;
  std::vector<double> frr, far;
  frr.push_back(0.0);  // accept everything
  far.push_back(1.0);
  for (double t : th) {
    std::size_t miss = 0, fa = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      if (s.trials[i].is_target && s.scores[i] < t) ++miss;
      if (!s.trials[i].is_target && s.scores[i] >= t) ++fa;
    }
    frr.push_back(double(miss) / double(n_tar));
    far.push_back(double(fa) / double(n_non));
  }
  for (std::size_t i = 1; i < frr.size(); ++i) {
    const double d0 = frr[i - 1] - far[i - 1], d1 = frr[i] - far[i];
    if (d1 < 0.0) continue;
    if (d1 == 0.0 || d0 == d1) return frr[i];
    const double lam = -d0 / (d1 - d0);
    return frr[i - 1] + lam * (frr[i] - frr[i - 1]);
  }
  return frr.back();
}

double oracle_min_dcf(const ScoreSet& s, double pt) {
  std::vector<double> th = s.scores;
  std::sort(th.begin(), th.end());
  th.push_back(th.back() + 1.0);
  std::size_t n_tar = 0, n_non = 0;
  for (const auto& p : s.trials) (p.is_target ? n_tar : n_non)++;
  double best = 1e18;
  auto cost_at = [&](double t) {
    std::size_t miss = 0, fa = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      if (s.trials[i].is_target && s.scores[i] < t) ++miss;
      if (!s.trials[i].is_target && s.scores[i] >= t) ++fa;
    }
    return pt * double(miss) / double(n_tar) +
           (1.0 - pt) * double(fa) / double(n_non);
  };
  best = std::min(best, cost_at(th.front() - 1.0));
  for (double t : th) best = std::min(best, cost_at(t));
  return best / std::min(pt, 1.0 - pt);
}

}  // namespace

TEST_CASE("topk accuracy") {
  std::vector<std::vector<double>> perfect = {{5, 1, 0}, {0, 9, 1}, {0, 1, 3}};
  std::vector<std::size_t> labels = {0, 1, 2};
  CHECK(topk_accuracy(perfect, labels, 1) == 1.0);
  CHECK(topk_accuracy(perfect, labels, 3) == 1.0);

  // tie broken toward the lower index: label 1 loses the tie against index 0
  std::vector<std::vector<double>> tied = {{2.0, 2.0, 0.0}};
  CHECK(topk_accuracy(tied, {1}, 1) == 0.0);
  CHECK(topk_accuracy(tied, {0}, 1) == 1.0);
  CHECK(topk_accuracy(tied, {1}, 2) == 1.0);

  std::vector<std::vector<double>> one = {{0.0, 1.0}};
  CHECK_THROWS(topk_accuracy({}, {}, 1));
  CHECK_THROWS(topk_accuracy(one, {0}, 0));
  CHECK_THROWS(topk_accuracy(one, {0}, 3));
  CHECK_THROWS(topk_accuracy(one, {5}, 1));
}

TEST_CASE("uniform random logits: Top-1 on K=4 approaches 1/4") {
  Rng rng(11);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<std::vector<double>> logits(10000, std::vector<double>(4));
  std::vector<std::size_t> labels(10000);
  std::uniform_int_distribution<std::size_t> lab(0, 3);
  for (auto& row : logits)
    for (auto& v : row) v = d(rng);
  for (auto& y : labels) y = lab(rng);
  const double acc = topk_accuracy(logits, labels, 1);
  CHECK(acc > 0.23);
  CHECK(acc < 0.27);
  CHECK(topk_accuracy(logits, labels, 4) == 1.0);
}

TEST_CASE("EER basics") {
  auto sep = make_set({0.9, 0.8, 0.7}, {0.1, 0.2, 0.3});
  CHECK(compute_eer(sep) == 0.0);

  auto mixed = make_set({0.9, 0.6, 0.4}, {0.5, 0.2, 0.1});
  CHECK(compute_eer(mixed) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // label swap plus score negation leaves the EER unchanged
  ScoreSet flipped = mixed;
  for (auto& p : flipped.trials) p.is_target = !p.is_target;
  for (auto& v : flipped.scores) v = -v;
  CHECK(compute_eer(flipped) == doctest::Approx(compute_eer(mixed)).epsilon(1e-12));

  auto single = make_set({0.5, 0.7}, {});
  CHECK_THROWS(compute_eer(single));
  CHECK_THROWS(compute_eer(ScoreSet{}));
}

TEST_CASE("EER and minDCF match the exhaustive recount oracle") {
  Rng rng(12);
  std::uniform_int_distribution<std::size_t> size(4, 200);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_set(rng, size(rng));
    CHECK(compute_eer(s) == doctest::Approx(oracle_eer(s)).epsilon(1e-12));
    for (double pt : {0.01, 0.001, 0.3})
      CHECK(min_dcf(s, pt) == doctest::Approx(oracle_min_dcf(s, pt)).epsilon(1e-12));
  }
}

TEST_CASE("EER and minDCF survive strictly monotone score transforms") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_set(rng, 60);
    ScoreSet warped = s;
    for (auto& v : warped.scores) v = std::tanh(3.0 * v) + 2.0;
    CHECK(compute_eer(warped) == doctest::Approx(compute_eer(s)).epsilon(1e-9));
    CHECK(min_dcf(warped, 0.01) ==
          doctest::Approx(min_dcf(s, 0.01)).epsilon(1e-9));
    CHECK(compute_eer(s) >= 0.0);
    CHECK(min_dcf(s, 0.01) >= 0.0);
    CHECK(min_dcf(s, 0.01) <= 1.0 + 1e-12);
  }
}

TEST_CASE("minDCF basics and the averaged operating points") {
  auto sep = make_set({0.9, 0.8}, {0.1, 0.2});
  CHECK(min_dcf(sep, 0.01) == 0.0);
  CHECK(avg_min_dcf(sep) == 0.0);

  auto mixed = make_set({0.9, 0.6, 0.4}, {0.5, 0.2, 0.1});
  CHECK(avg_min_dcf(mixed) ==
        doctest::Approx(0.5 * (min_dcf(mixed, 0.01) + min_dcf(mixed, 0.001))));
  CHECK_THROWS(min_dcf(mixed, 0.0));
  CHECK_THROWS(min_dcf(mixed, 1.0));
}

TEST_CASE("score fusion endpoints, midpoint oracle, and alignment") {
  auto a = make_set({0.9, 0.6}, {0.2});
  ScoreSet b = a;
  b.scores = {0.5, 0.4, 0.6};

  auto f1 = fuse_scores(1.0, a, b);
  auto f0 = fuse_scores(0.0, a, b);
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(f1.scores[i] == a.scores[i]);
    CHECK(f0.scores[i] == b.scores[i]);
  }
  auto fh = fuse_scores(0.5, a, b);
  CHECK(fh.scores[0] == doctest::Approx(0.7));
  CHECK(fh.scores[1] == doctest::Approx(0.5));
  CHECK(fh.scores[2] == doctest::Approx(0.4));

  for (double alpha : {0.0, 0.3, 1.0}) {
    auto same = fuse_scores(alpha, a, a);
    for (std::size_t i = 0; i < a.scores.size(); ++i)
      CHECK(same.scores[i] == a.scores[i]);
  }

  ScoreSet misaligned = b;
  misaligned.trials[0].test = "other";
  CHECK_THROWS(fuse_scores(0.5, a, misaligned));
  CHECK_THROWS(fuse_scores(1.5, a, b));

  auto fl = fuse_logits(0.25, {{4.0, 0.0}}, {{0.0, 4.0}});
  CHECK(fl[0][0] == doctest::Approx(1.0));
  CHECK(fl[0][1] == doctest::Approx(3.0));
  CHECK_THROWS(fuse_logits(0.5, {{1.0}}, {{1.0, 2.0}}));
}

TEST_CASE("trial construction") {
  std::vector<UtteranceRecord> utts = {
      {"a0.wav", "spk_a", "test"}, {"a1.wav", "spk_a", "test"},
      {"b0.wav", "spk_b", "test"}, {"b1.wav", "spk_b", "test"},
      {"c0.wav", "spk_c", "test"}};

  Rng r1(21), r2(21), r3(22);
  auto t1 = build_trials(utts, r1, 1000);
  auto t2 = build_trials(utts, r2, 1000);
  auto t3 = build_trials(utts, r3, 1000);
  CHECK(t1.size() == 1000);
  CHECK(t1 == t2);       // deterministic under seed
  CHECK(t1 != t3);

  std::size_t targets = 0;
  std::map<std::string, std::string> spk_of;
  for (const auto& u : utts) spk_of[u.path] = u.speaker;
  for (const auto& p : t1) {
    CHECK(p.enrol != p.test);
    CHECK((spk_of.at(p.enrol) == spk_of.at(p.test)) == p.is_target);
    if (p.is_target) ++targets;
  }
  const double frac = double(targets) / 1000.0;
  CHECK(frac > 0.45);
  CHECK(frac < 0.55);

  std::vector<UtteranceRecord> solo = {{"x.wav", "s", "test"},
                                       {"y.wav", "s", "test"}};
  CHECK_THROWS(build_trials(solo, r1, 10));
  CHECK_THROWS(build_trials({}, r1, 10));
}
