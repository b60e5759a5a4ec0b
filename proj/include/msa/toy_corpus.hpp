// Deterministic synthetic corpus: harmonic-stack "speakers" whose identity is
// spectrally encoded (distinct f0 and harmonic emphasis), plus a three-category
// noise bank (filtered white noise, chord loops, multi-source babble).  All
// audio derives from per-utterance seeds, so output bytes are reproducible
// regardless of generation order.

#pragma once

#include <filesystem>

#include "msa/audio.hpp"
#include "msa/manifest.hpp"
#include "msa/noise_mix.hpp"

namespace msa {

struct SyntheticSpeakerSpec {
  std::string id;
  double f0 = 140.0;                 // Hz
  std::vector<double> harmonics;     // amplitude per harmonic, index 0 = f0
  double jitter_depth = 0.01;        // relative f0 wobble
  double jitter_rate = 3.0;          // Hz
  std::uint64_t seed = 0;
};

inline std::vector<SyntheticSpeakerSpec> make_speaker_specs(
    std::size_t n_speakers, std::uint64_t seed) {
  if (n_speakers < 2)
    throw std::invalid_argument("make_speaker_specs: need >= 2 speakers");
  std::vector<SyntheticSpeakerSpec> specs;
  for (std::size_t i = 0; i < n_speakers; ++i) {
    auto rng = derive_rng(seed, "speaker", std::uint64_t(i));
    SyntheticSpeakerSpec s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "spk%02zu", i);
    s.id = buf;
    s.f0 = 120.0 + 17.0 * double(i);  // disjoint fundamentals by construction
    s.harmonics.resize(8);
    std::uniform_real_distribution<double> amp(0.15, 0.45);
    for (auto& a : s.harmonics) a = amp(rng);
    s.harmonics[i % s.harmonics.size()] = 1.0;  // speaker-specific dominant
    std::uniform_real_distribution<double> jd(0.005, 0.02), jr(2.0, 5.0);
    s.jitter_depth = jd(rng);
    s.jitter_rate = jr(rng);
    s.seed = mix_seed(seed, s.id);
    specs.push_back(std::move(s));
  }
  return specs;
}

namespace detail {

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0)
    for (double& v : x) v *= peak / m;
}

// Harmonic stack with phase-accumulated f0 wobble and a slow amplitude
// envelope; shared by speakers and the babble noise sources.
inline std::vector<double> harmonic_stack(double f0,
                                          const std::vector<double>& harmonics,
                                          double jitter_depth,
                                          double jitter_rate, std::size_t n,
                                          std::size_t sr, Rng& rng) {
  constexpr double kTau = 6.283185307179586;
  std::uniform_real_distribution<double> ph(0.0, kTau);
  std::vector<double> phase(harmonics.size());
  for (auto& p : phase) p = ph(rng);
  const double jphase = ph(rng), ephase = ph(rng);
  std::uniform_real_distribution<double> er(0.5, 1.5);
  const double erate = er(rng);  // Hz, amplitude modulation
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / double(sr);
    const double f = f0 * (1.0 + jitter_depth * std::sin(kTau * jitter_rate * t + jphase));
    const double env = 0.7 + 0.3 * std::sin(kTau * erate * t + ephase);
    double v = 0.0;
    for (std::size_t h = 0; h < harmonics.size(); ++h) {
      phase[h] += kTau * f * double(h + 1) / double(sr);
      v += harmonics[h] * std::sin(phase[h]);
    }
    out[i] = env * v;
  }
  return out;
}

}  // namespace detail

inline Waveform synthesize_utterance(const SyntheticSpeakerSpec& spec,
                                     std::size_t utt_index, double seconds) {
  if (seconds <= 0.0)
    throw std::invalid_argument("synthesize_utterance: seconds <= 0");
  auto rng = derive_rng(spec.seed, "utt", std::uint64_t(utt_index));
  Waveform w;
  const std::size_t n = std::size_t(seconds * double(w.sample_rate));
  w.samples = detail::harmonic_stack(spec.f0, spec.harmonics, spec.jitter_depth,
                                     spec.jitter_rate, n, w.sample_rate, rng);
  detail::normalize_peak(w.samples, 0.5);
  return w;
}

// Writes one WAV per (speaker, utterance) into out_dir plus a dataset manifest
// ("corpus_manifest.txt", paths relative to out_dir).  The last quarter of each
// speaker's utterances (at least one) is the test split.
inline std::vector<UtteranceRecord> generate_corpus(const std::string& out_dir,
                                                    std::size_t n_speakers,
                                                    std::size_t utts_per_speaker,
                                                    double seconds,
                                                    std::uint64_t seed) {
  if (n_speakers < 2)
    throw std::invalid_argument("generate_corpus: need >= 2 speakers");
  if (utts_per_speaker < 2)
    throw std::invalid_argument("generate_corpus: need >= 2 utts per speaker");
  std::filesystem::create_directories(out_dir);
  const auto specs = make_speaker_specs(n_speakers, seed);
  const std::size_t n_test = std::max<std::size_t>(1, utts_per_speaker / 4);
  std::vector<UtteranceRecord> recs;
  for (const auto& spec : specs) {
    for (std::size_t u = 0; u < utts_per_speaker; ++u) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_utt%02zu.wav", spec.id.c_str(), u);
      save_wav(out_dir + "/" + buf, synthesize_utterance(spec, u, seconds));
      const bool test = u >= utts_per_speaker - n_test;
      recs.push_back({buf, spec.id, test ? "test" : "train"});
    }
  }
  save_dataset_manifest(out_dir + "/corpus_manifest.txt", recs);
  return recs;
}

inline Waveform synthesize_noise(const std::string& category,
                                 std::size_t index, double seconds,
                                 std::uint64_t seed) {
  constexpr double kTau = 6.283185307179586;
  auto rng = derive_rng(seed, "noise", category, std::uint64_t(index));
  Waveform w;
  const std::size_t n = std::size_t(seconds * double(w.sample_rate));
  const std::size_t sr = w.sample_rate;
  std::vector<double> x(n, 0.0);
  if (category == "noise") {
    // one-pole lowpassed white noise, random cutoff
    std::uniform_real_distribution<double> a(0.5, 0.95), u(-1.0, 1.0);
    const double pole = a(rng);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      state = pole * state + (1.0 - pole) * u(rng);
      x[i] = state;
    }
  } else if (category == "music") {
    // looped triads over a random root; chord changes every half second
    std::uniform_real_distribution<double> root(110.0, 220.0), ph(0.0, kTau);
    const double base = root(rng);
    const double ratios[4][3] = {{1.0, 1.25, 1.5},
                                 {1.125, 1.40625, 1.6875},
                                 {1.333, 1.666, 2.0},
                                 {1.0, 1.2, 1.5}};
    std::vector<double> phases(3);
    for (auto& p : phases) p = ph(rng);
    const std::size_t hold = sr / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t chord = (i / hold) % 4;
      double v = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        phases[k] += kTau * base * ratios[chord][k] / double(sr);
        v += std::sin(phases[k]) + 0.3 * std::sin(2.0 * phases[k]);
      }
      x[i] = v;
    }
  } else if (category == "babble") {
    // at least three overlapped speech-like harmonic sources
    std::uniform_real_distribution<double> f0(150.0, 320.0), amp(0.2, 0.8);
    for (int src = 0; src < 4; ++src) {
      std::vector<double> harm(6);
      for (auto& h : harm) h = amp(rng);
      auto voice = detail::harmonic_stack(f0(rng), harm, 0.03, 5.5, n, sr, rng);
      for (std::size_t i = 0; i < n; ++i) x[i] += voice[i];
    }
  } else {
    throw std::invalid_argument("synthesize_noise: unknown category " + category);
  }
  detail::normalize_peak(x, 0.5);
  w.samples = std::move(x);
  return w;
}

// Writes n_per_category WAVs for each of the three categories plus a noise
// manifest ("noise_manifest.txt") with a stratified train/test split.
inline std::vector<NoiseRecord> generate_noise_bank(const std::string& out_dir,
                                                    std::size_t n_per_category,
                                                    double seconds,
                                                    std::uint64_t seed) {
  if (n_per_category < 2)
    throw std::invalid_argument("generate_noise_bank: need >= 2 per category");
  std::filesystem::create_directories(out_dir);
  std::vector<NoiseRecord> recs;
  for (const auto& cat : noise_categories()) {
    for (std::size_t i = 0; i < n_per_category; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%02zu.wav", cat.c_str(), i);
      save_wav(out_dir + "/" + buf, synthesize_noise(cat, i, seconds, seed));
      recs.push_back({buf, cat, ""});
    }
  }
  auto rng = derive_rng(seed, "noise-split");
  auto [train, test] = split_noise_corpus(recs, rng);
  recs = std::move(train);
  recs.insert(recs.end(), test.begin(), test.end());
  std::sort(recs.begin(), recs.end(),
            [](const NoiseRecord& a, const NoiseRecord& b) { return a.path < b.path; });
  save_noise_manifest(out_dir + "/noise_manifest.txt", recs);
  return recs;
}

}  // namespace msa
