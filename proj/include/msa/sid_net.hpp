// Speaker-recognition network: residual convolution blocks (optional
// multi-stage attention before the residual addition), average pooling over
// time, and two fully-connected layers producing the speaker embedding and
// class logits.  Output extents per block are asserted at construction time.

#pragma once

#include "msa/attention.hpp"

namespace msa {

struct SIDConvSpec {
  std::size_t kernel_t = 3, kernel_f = 3, out_channels = 64;
  std::size_t stride = 1;  // applied to both spatial axes
};

struct SIDBlockSpec {
  std::vector<SIDConvSpec> convs;
  // Expected output extents for the default input; 0 disables the assertion
  // (used by reduced-width toy configs).
  std::size_t expect_t = 0, expect_f = 0;
};

struct SIDNetConfig {
  std::vector<SIDBlockSpec> blocks;
  std::size_t embedding_dim = 512;

  // Default reading of the block table.  Blocks 4 and 8 print a trailing
  // 128-channel conv that contradicts the 512-channel pool line; the default
  // follows the pool line (block 8 ends at 512 channels).  literal_config()
  // keeps the printed 128-channel projections instead.
  static SIDNetConfig default_config() {
    SIDNetConfig c;
    c.blocks = {
        {{{3, 3, 64, 2}, {3, 3, 64, 1}, {3, 3, 64, 1}}, 150, 129},
        {{{3, 3, 128, 2}, {3, 3, 128, 1}, {3, 3, 128, 1}}, 75, 65},
        {{{3, 3, 128, 1}, {3, 3, 128, 1}}, 75, 65},
        {{{3, 3, 256, 2}, {3, 3, 256, 1}, {3, 3, 256, 1}}, 38, 33},
        {{{3, 3, 256, 1}, {3, 3, 256, 1}}, 38, 33},
        {{{3, 3, 256, 1}, {3, 3, 256, 1}}, 38, 33},
        {{{3, 3, 256, 1}, {3, 3, 256, 1}}, 38, 33},
        {{{3, 3, 512, 2}, {3, 3, 512, 1}, {3, 3, 512, 1}}, 19, 17},
    };
    return c;
  }

  static SIDNetConfig literal_config() {
    SIDNetConfig c = default_config();
    c.blocks[3].convs[2].out_channels = 128;
    c.blocks[7].convs[2].out_channels = 128;
    return c;
  }

  void validate() const {
    if (blocks.empty()) throw std::invalid_argument("SIDNetConfig: no blocks");
    for (const auto& b : blocks) {
      if (b.convs.empty())
        throw std::invalid_argument("SIDNetConfig: empty block");
      for (const auto& cv : b.convs)
        if (cv.kernel_t == 0 || cv.kernel_f == 0 || cv.out_channels == 0 ||
            cv.stride == 0)
          throw std::invalid_argument("SIDNetConfig: zero extent in conv spec");
    }
    if (embedding_dim == 0)
      throw std::invalid_argument("SIDNetConfig: embedding_dim == 0");
  }
};

// Per-block output shapes for a given input; throws if a block's expected
// extents are set and disagree.
inline std::vector<Shape> sid_output_trace(const SIDNetConfig& cfg,
                                           std::size_t t, std::size_t f) {
  cfg.validate();
  std::vector<Shape> trace;
  std::size_t ct = t, cf = f;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    for (const auto& cv : b.convs) {
      ct = (ct + cv.stride - 1) / cv.stride;  // same padding, ceil mode
      cf = (cf + cv.stride - 1) / cv.stride;
    }
    if (b.expect_t && (ct != b.expect_t || cf != b.expect_f))
      throw std::logic_error("sid_output_trace: block " + std::to_string(i + 1) +
                             " yields " + std::to_string(ct) + "x" +
                             std::to_string(cf) + ", expected " +
                             std::to_string(b.expect_t) + "x" +
                             std::to_string(b.expect_f));
    trace.push_back({ct, cf, b.convs.back().out_channels});
  }
  return trace;
}

template <typename T>
struct SIDNetParams {
  struct Conv {
    Tensor<T> kernel;
    Tensor<T> bias;
    std::size_t stride = 1;
  };
  struct Block {
    std::vector<Conv> convs;
    bool has_proj = false;
    Tensor<T> proj_kernel;  // 1x1, stride-matched skip projection
    Tensor<T> proj_bias;
    bool has_ms = false;
    MSBlockParams<T> ms;
  };
  std::vector<Block> blocks;
  Tensor<T> fc_w, fc_b;    // flatten -> embedding
  Tensor<T> cls_w, cls_b;  // embedding -> speakers
  std::size_t input_t = 0, input_f = 0;

  static SIDNetParams init(const SIDNetConfig& cfg, std::size_t num_speakers,
                           std::size_t in_t, std::size_t in_f, bool ms_enabled,
                           Rng& rng) {
    if (num_speakers < 2)
      throw std::invalid_argument("SIDNetParams: need at least 2 speakers");
    const auto trace = sid_output_trace(cfg, in_t, in_f);  // asserts extents
    SIDNetParams p;
    p.input_t = in_t;
    p.input_f = in_f;
    std::size_t cin = 1;
    for (const auto& bs : cfg.blocks) {
      Block b;
      std::size_t block_stride = 1, c = cin;
      for (const auto& cv : bs.convs) {
        Conv conv;
        conv.kernel = Tensor<T>({cv.kernel_t, cv.kernel_f, c, cv.out_channels},
                                T(0), true);
        conv.bias = Tensor<T>({cv.out_channels}, T(0), true);
        kaiming_uniform(conv.kernel, cv.kernel_t * cv.kernel_f * c, rng);
        conv.stride = cv.stride;
        block_stride *= cv.stride;
        c = cv.out_channels;
        b.convs.push_back(std::move(conv));
      }
      if (block_stride != 1 || c != cin) {
        b.has_proj = true;
        b.proj_kernel = Tensor<T>({1, 1, cin, c}, T(0), true);
        b.proj_bias = Tensor<T>({c}, T(0), true);
        kaiming_uniform(b.proj_kernel, cin, rng);
      }
      b.has_ms = ms_enabled;
      if (ms_enabled) b.ms = MSBlockParams<T>::init(c, rng);
      p.blocks.push_back(std::move(b));
      cin = c;
    }
    const Shape last = trace.back();
    const std::size_t flat = last[1] * last[2];  // time pooled away
    p.fc_w = Tensor<T>({flat, cfg.embedding_dim}, T(0), true);
    p.fc_b = Tensor<T>({cfg.embedding_dim}, T(0), true);
    kaiming_uniform(p.fc_w, flat, rng);
    p.cls_w = Tensor<T>({cfg.embedding_dim, num_speakers}, T(0), true);
    p.cls_b = Tensor<T>({num_speakers}, T(0), true);
    kaiming_uniform(p.cls_w, cfg.embedding_dim, rng);
    return p;
  }

  std::size_t num_speakers() const { return cls_w.extent(1); }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string bp = prefix + "/block" + std::to_string(i);
      for (std::size_t j = 0; j < blocks[i].convs.size(); ++j) {
        fn(bp + "/conv" + std::to_string(j) + "/kernel", blocks[i].convs[j].kernel);
        fn(bp + "/conv" + std::to_string(j) + "/bias", blocks[i].convs[j].bias);
      }
      if (blocks[i].has_proj) {
        fn(bp + "/proj/kernel", blocks[i].proj_kernel);
        fn(bp + "/proj/bias", blocks[i].proj_bias);
      }
      if (blocks[i].has_ms) blocks[i].ms.visit(bp + "/ms", fn);
    }
    fn(prefix + "/fc/w", fc_w);
    fn(prefix + "/fc/b", fc_b);
    fn(prefix + "/cls/w", cls_w);
    fn(prefix + "/cls/b", cls_b);
  }
};

// Shared trunk: residual blocks, time pooling, embedding FC.
template <typename T>
Tensor<T> sid_embedding_forward(Tape<T>& tape, const Tensor<T>& spectrogram,
                                const SIDNetParams<T>& params) {
  if (spectrogram.rank() != 3 || spectrogram.extent(2) != 1 ||
      spectrogram.extent(0) != params.input_t ||
      spectrogram.extent(1) != params.input_f)
    throw std::invalid_argument("sid forward: input shape " +
                                shape_str(spectrogram.shape()) +
                                " does not match configured " +
                                std::to_string(params.input_t) + "x" +
                                std::to_string(params.input_f) + "x1");
  Tensor<T> h = spectrogram;
  for (const auto& b : params.blocks) {
    Tensor<T> x = h;
    std::size_t block_stride = 1;
    for (const auto& cv : b.convs) {
      h = conv2d(tape, h, cv.kernel, cv.bias, {cv.stride, cv.stride}, {1, 1},
                 PadMode::Same);
      h = relu(tape, h);
      block_stride *= cv.stride;
    }
    if (b.has_ms) h = apply_ms(tape, h, b.ms);
    Tensor<T> skip =
        b.has_proj ? conv2d(tape, x, b.proj_kernel, b.proj_bias,
                            {block_stride, block_stride}, {1, 1}, PadMode::Same)
                   : x;
    h = relu(tape, add(tape, h, skip));
  }
  auto pooled = pool_over(tape, h, {Axis::Time}, PoolMode::Avg);  // 1 x F' x C
  auto flat = reshape(tape, pooled, {1, pooled.extent(1) * pooled.extent(2)});
  return fully_connected(tape, flat, params.fc_w, params.fc_b);  // 1 x emb
}

template <typename T>
Tensor<T> forward_logits(Tape<T>& tape, const Tensor<T>& spectrogram,
                         const SIDNetParams<T>& params) {
  auto emb = sid_embedding_forward(tape, spectrogram, params);
  return fully_connected(tape, emb, params.cls_w, params.cls_b);  // 1 x K
}

template <typename T>
std::vector<T> extract_embedding(const Tensor<T>& spectrogram,
                                 const SIDNetParams<T>& params) {
  Tape<T> tape(false);
  return sid_embedding_forward(tape, spectrogram, params).data();
}

template <typename T>
double cosine_similarity(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cosine_similarity: size mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * double(b[i]);
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine_similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace msa
