// Speech-enhancement network: a stack of dilated convolution blocks (stride 1,
// same padding, optional multi-stage attention per block) whose single-channel
// output is squashed by a sigmoid into a ratio mask in [0,1] and multiplied
// elementwise into the input spectrogram.

#pragma once

#include "msa/attention.hpp"

namespace msa {

struct SEBlockSpec {
  std::size_t kernel_t = 5, kernel_f = 5, out_channels = 48;
  std::size_t dilation_t = 1, dilation_f = 1;
};

struct SENetConfig {
  std::vector<SEBlockSpec> blocks;

  // The 11-block layout: two separable-style blocks, a dilation ladder over
  // frequency, a reset, a dilation ladder over both axes, then a 1x1x1 head.
  static SENetConfig default_config() {
    SENetConfig c;
    c.blocks = {
        {7, 1, 48, 1, 1}, {1, 7, 48, 1, 1}, {5, 5, 48, 1, 1}, {5, 5, 48, 1, 2},
        {5, 5, 48, 1, 4}, {5, 5, 48, 1, 8}, {5, 5, 48, 1, 1}, {5, 5, 48, 2, 2},
        {5, 5, 48, 4, 4}, {5, 5, 48, 8, 8}, {1, 1, 1, 1, 1},
    };
    return c;
  }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("SENetConfig: no blocks");
    if (blocks.back().out_channels != 1)
      throw std::invalid_argument("SENetConfig: final block must emit 1 channel");
    for (const auto& b : blocks)
      if (b.kernel_t == 0 || b.kernel_f == 0 || b.out_channels == 0 ||
          b.dilation_t == 0 || b.dilation_f == 0)
        throw std::invalid_argument("SENetConfig: zero extent in block spec");
  }
};

template <typename T>
struct SENetParams {
  struct Block {
    Tensor<T> kernel;  // [kT,kF,Cin,Cout]
    Tensor<T> bias;    // [Cout]
    std::size_t dilation_t = 1, dilation_f = 1;
    bool has_ms = false;
    MSBlockParams<T> ms;
  };
  std::vector<Block> blocks;

  static SENetParams init(const SENetConfig& cfg, bool ms_enabled, Rng& rng) {
    cfg.validate();
    SENetParams p;
    std::size_t cin = 1;
    for (const auto& spec : cfg.blocks) {
      Block b;
      b.kernel = Tensor<T>({spec.kernel_t, spec.kernel_f, cin, spec.out_channels},
                           T(0), true);
      b.bias = Tensor<T>({spec.out_channels}, T(0), true);
      kaiming_uniform(b.kernel, spec.kernel_t * spec.kernel_f * cin, rng);
      b.dilation_t = spec.dilation_t;
      b.dilation_f = spec.dilation_f;
      b.has_ms = ms_enabled;
      if (ms_enabled) b.ms = MSBlockParams<T>::init(spec.out_channels, rng);
      p.blocks.push_back(std::move(b));
      cin = spec.out_channels;
    }
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string bp = prefix + "/block" + std::to_string(i);
      fn(bp + "/kernel", blocks[i].kernel);
      fn(bp + "/bias", blocks[i].bias);
      if (blocks[i].has_ms) blocks[i].ms.visit(bp + "/ms", fn);
    }
  }
};

// All blocks are stride-1 same-padding, so every block output keeps the input
// T x F extents; block k emits cfg.blocks[k].out_channels channels.
inline std::vector<Shape> se_output_trace(const SENetConfig& cfg, std::size_t t,
                                          std::size_t f) {
  cfg.validate();
  std::vector<Shape> trace;
  for (const auto& b : cfg.blocks) trace.push_back({t, f, b.out_channels});
  return trace;
}

// conv -> optional MS -> ReLU per block; the final block swaps the ReLU for a
// sigmoid so the output is a ratio mask in [0,1].
template <typename T>
Tensor<T> forward_mask(Tape<T>& tape, const Tensor<T>& spectrogram,
                       const SENetParams<T>& params) {
  if (spectrogram.rank() != 3 || spectrogram.extent(2) != 1)
    throw std::invalid_argument("forward_mask: expected a T x F x 1 input");
  Tensor<T> h = spectrogram;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto& b = params.blocks[i];
    h = conv2d(tape, h, b.kernel, b.bias, {1, 1},
               {b.dilation_t, b.dilation_f}, PadMode::Same);
    if (b.has_ms) h = apply_ms(tape, h, b.ms);
    h = (i + 1 == params.blocks.size()) ? sigmoid(tape, h) : relu(tape, h);
  }
  return h;
}

// Elementwise mask application on matching T x F grids.
template <typename T>
Tensor<T> enhance(Tape<T>& tape, const Tensor<T>& spectrogram,
                  const Tensor<T>& mask) {
  if (spectrogram.shape() != mask.shape())
    throw std::invalid_argument("enhance: spectrogram " +
                                shape_str(spectrogram.shape()) + " vs mask " +
                                shape_str(mask.shape()));
  return mul_broadcast(tape, spectrogram, mask);
}

}  // namespace msa
