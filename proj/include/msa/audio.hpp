// Waveform I/O and magnitude-spectrogram extraction: 16 kHz mono PCM16 WAV
// in, Hamming-windowed frames (25 ms window / 10 ms hop by default), 512-point
// FFT, magnitudes of bins 0..fft/2.  No normalization is applied anywhere.

#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "msa/rng.hpp"
#include "msa/tensor.hpp"

namespace msa {

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = 16000;

  double seconds() const { return double(samples.size()) / sample_rate; }
};

struct SpectrogramConfig {
  int window_ms = 25;
  int hop_ms = 10;
  std::size_t fft_size = 512;
  double segment_seconds = 3.0;

  std::size_t window_samples(int rate) const { return std::size_t(rate) * window_ms / 1000; }
  std::size_t hop_samples(int rate) const { return std::size_t(rate) * hop_ms / 1000; }
  std::size_t bins() const { return fft_size / 2 + 1; }

  void validate(int rate) const {
    if (window_ms <= 0 || hop_ms <= 0 || hop_ms > window_ms)
      throw std::invalid_argument("SpectrogramConfig: need 0 < hop_ms <= window_ms");
    if (fft_size < window_samples(rate))
      throw std::invalid_argument("SpectrogramConfig: fft_size < window length");
    if (fft_size == 0 || (fft_size & (fft_size - 1)) != 0)
      throw std::invalid_argument("SpectrogramConfig: fft_size must be a power of two");
  }
};

// ---------------------------------------------------------------------------
// WAV I/O (RIFF, PCM16, mono, 16 kHz only; anything else is rejected).
// ---------------------------------------------------------------------------
namespace wav_detail {

inline std::uint32_t rd32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t rd16(const unsigned char* p) {
  return std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
}

}  // namespace wav_detail

inline Waveform load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  using namespace wav_detail;
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("load_wav: not a RIFF/WAVE file: " + path);

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t len = rd32(buf.data() + pos + 4);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      if (pos + 8 + 16 > buf.size())
        throw std::runtime_error("load_wav: truncated fmt chunk: " + path);
      const unsigned char* p = buf.data() + pos + 8;
      format = rd16(p);
      channels = rd16(p + 2);
      rate = rd32(p + 4);
      bits = rd16(p + 14);
      have_fmt = true;
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      if (pos + 8 + len > buf.size())
        throw std::runtime_error("load_wav: truncated data chunk: " + path);
      data = buf.data() + pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (!have_fmt || !data)
    throw std::runtime_error("load_wav: missing fmt/data chunk: " + path);
  if (format != 1 || bits != 16)
    throw std::runtime_error("load_wav: only PCM16 supported: " + path);
  if (channels != 1)
    throw std::runtime_error("load_wav: only mono supported: " + path);
  if (rate != 16000)
    throw std::runtime_error("load_wav: only 16 kHz supported: " + path);

  Waveform w;
  w.sample_rate = int(rate);
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const std::int16_t s = std::int16_t(rd16(data + 2 * i));
    w.samples[i] = double(s) / 32768.0;
  }
  if (w.samples.empty()) throw std::runtime_error("load_wav: empty file: " + path);
  return w;
}

inline void save_wav(const std::string& path, const Waveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_wav: cannot open " + path);
  const std::uint32_t n = std::uint32_t(w.samples.size());
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto w16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  w32(36 + 2 * n);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(std::uint32_t(w.sample_rate));
  w32(std::uint32_t(w.sample_rate) * 2);
  w16(2);
  w16(16);
  f.write("data", 4);
  w32(2 * n);
  for (double s : w.samples) {
    const double clamped = std::max(-1.0, std::min(1.0, s));
    const std::int16_t v = std::int16_t(std::lrint(clamped * 32767.0));
    w16(std::uint16_t(v));
  }
}

// ---------------------------------------------------------------------------
// Iterative radix-2 FFT (fft_size is validated to be a power of two).
// ---------------------------------------------------------------------------
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// stft_magnitude: frames of `window` samples every `hop`, Hamming window,
// zero-pad to fft_size, magnitude of the first fft/2+1 bins.
//
// Frame-count rule: the segment is reflect-padded at the tail so that the
// frame count equals ceil(N / hop) (for a 3 s segment at the default config
// this gives exactly 300 frames instead of the raw 298).
// ---------------------------------------------------------------------------
template <typename T = float>
Tensor<T> stft_magnitude(const Waveform& w, const SpectrogramConfig& cfg) {
  cfg.validate(w.sample_rate);
  const std::size_t win = cfg.window_samples(w.sample_rate);
  const std::size_t hop = cfg.hop_samples(w.sample_rate);
  const std::size_t n = w.samples.size();
  if (n < win)
    throw std::invalid_argument("stft_magnitude: input shorter than one window");

  const std::size_t frames = (n + hop - 1) / hop;
  const std::size_t needed = (frames - 1) * hop + win;
  std::vector<double> x(w.samples);
  while (x.size() < needed) {
    // reflect about the last sample
    const std::size_t i = x.size();
    const std::size_t src = 2 * (n - 1) >= i ? 2 * (n - 1) - i : i % n;
    x.push_back(w.samples[src]);
  }

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * double(i) / double(win - 1));

  const std::size_t bins = cfg.bins();
  Tensor<T> spec({frames, bins, 1});
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t fr = 0; fr < frames; ++fr) {
    for (std::size_t i = 0; i < cfg.fft_size; ++i)
      buf[i] = (i < win) ? std::complex<double>(x[fr * hop + i] * window[i], 0.0)
                         : std::complex<double>(0.0, 0.0);
    fft_inplace(buf);
    for (std::size_t b = 0; b < bins; ++b)
      spec.at(fr, b, 0) = T(std::abs(buf[b]));
  }
  spec.check_finite("stft_magnitude");
  return spec;
}

// Uniformly random fixed-length crop; shorter inputs are loop-padded first.
inline Waveform sample_segment(const Waveform& w, double seconds, Rng& rng) {
  if (w.samples.empty())
    throw std::invalid_argument("sample_segment: empty waveform");
  const std::size_t want = std::size_t(seconds * w.sample_rate);
  std::vector<double> src = w.samples;
  while (src.size() < want)
    src.insert(src.end(), w.samples.begin(),
               w.samples.begin() +
                   std::min(w.samples.size(), want - src.size()));
  std::uniform_int_distribution<std::size_t> d(0, src.size() - want);
  const std::size_t off = d(rng);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(src.begin() + off, src.begin() + off + want);
  return out;
}

}  // namespace msa
