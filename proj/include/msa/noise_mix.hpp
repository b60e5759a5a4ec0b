// SNR-exact additive noise mixing and the train/test noise partition.
// Powers are mean squared amplitude over the full segment; the noise gain is
// g = sqrt(P_clean / (P_noise * 10^(snr/10))) so the measured SNR of the two
// added components equals the request exactly.  No clipping or peak
// normalization is applied afterwards.

#pragma once

#include <map>

#include "msa/audio.hpp"
#include "msa/manifest.hpp"
#include "msa/rng.hpp"

namespace msa {

inline const std::vector<std::string>& noise_categories() {
  static const std::vector<std::string> cats = {"noise", "music", "babble"};
  return cats;
}

inline const std::vector<int>& snr_grid() {
  static const std::vector<int> grid = {0, 5, 10, 15, 20};
  return grid;
}

inline double mean_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / double(x.size());
}

struct MixResult {
  Waveform mixed;
  Waveform noise_component;  // the scaled, length-fitted noise actually added
  double gain = 0.0;
};

// Fit noise to `len` samples: uniform random crop when longer, loop-concat
// then crop when shorter.
inline std::vector<double> fit_noise_length(const std::vector<double>& noise,
                                            std::size_t len, Rng& rng) {
  std::vector<double> src = noise;
  while (src.size() < len)
    src.insert(src.end(), noise.begin(), noise.end());
  std::uniform_int_distribution<std::size_t> d(0, src.size() - len);
  const std::size_t off = d(rng);
  return {src.begin() + off, src.begin() + off + len};
}

inline MixResult mix_at_snr(const Waveform& clean, const Waveform& noise,
                            double snr_db, Rng& rng) {
  if (clean.sample_rate != noise.sample_rate)
    throw std::invalid_argument("mix_at_snr: sample rates differ");
  if (clean.samples.empty() || noise.samples.empty())
    throw std::invalid_argument("mix_at_snr: empty input");

  std::vector<double> n = fit_noise_length(noise.samples, clean.samples.size(), rng);
  const double p_clean = mean_power(clean.samples);
  const double p_noise = mean_power(n);
  if (p_clean <= 0.0)
    throw std::invalid_argument("mix_at_snr: silent clean signal, SNR undefined");
  if (p_noise <= 0.0)
    throw std::invalid_argument("mix_at_snr: silent noise crop, SNR undefined");

  const double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  MixResult r;
  r.gain = g;
  r.mixed.sample_rate = clean.sample_rate;
  r.noise_component.sample_rate = clean.sample_rate;
  r.mixed.samples.resize(clean.samples.size());
  r.noise_component.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    r.noise_component.samples[i] = g * n[i];
    r.mixed.samples[i] = clean.samples[i] + r.noise_component.samples[i];
    if (!std::isfinite(r.mixed.samples[i]))
      throw std::runtime_error("mix_at_snr: non-finite sample");
  }
  return r;
}

// Disjoint train/test partition, stratified per category, deterministic under
// the passed engine.  Every category needs at least 2 entries.
inline std::pair<std::vector<NoiseRecord>, std::vector<NoiseRecord>>
split_noise_corpus(const std::vector<NoiseRecord>& entries, Rng& rng,
                   double train_ratio = 0.5) {
  std::map<std::string, std::vector<NoiseRecord>> by_cat;
  for (const auto& e : entries) by_cat[e.category].push_back(e);

  std::vector<NoiseRecord> train, test;
  for (auto& [cat, recs] : by_cat) {
    if (recs.size() < 2)
      throw std::invalid_argument("split_noise_corpus: category '" + cat +
                                  "' has fewer than 2 entries");
    std::shuffle(recs.begin(), recs.end(), rng);
    std::size_t n_train = std::size_t(std::lround(double(recs.size()) * train_ratio));
    n_train = std::min(std::max<std::size_t>(n_train, 1), recs.size() - 1);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      auto r = recs[i];
      r.split = i < n_train ? "train" : "test";
      (i < n_train ? train : test).push_back(r);
    }
  }
  return {train, test};
}

}  // namespace msa
