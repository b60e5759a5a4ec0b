// Multi-stage attention over a (T,F,C) feature map: channel gates from a
// shared two-layer MLP on pooled statistics, then frequency and time gates
// from small 2D convolutions over channel-pooled maps, applied sequentially.

#pragma once

#include <functional>

#include "msa/ops.hpp"
#include "msa/rng.hpp"

namespace msa {

inline constexpr std::size_t kChannelAttentionHidden = 100;

template <typename T>
struct ChannelAttentionParams {
  Tensor<T> W0;  // [C, hidden]
  Tensor<T> b0;  // [1, hidden]; the second FC layer carries no bias
  Tensor<T> W1;  // [hidden, C]

  static ChannelAttentionParams init(std::size_t channels, Rng& rng,
                                     std::size_t hidden = kChannelAttentionHidden) {
    ChannelAttentionParams p;
    p.W0 = Tensor<T>({channels, hidden}, T(0), true);
    p.b0 = Tensor<T>({1, hidden}, T(0), true);
    p.W1 = Tensor<T>({hidden, channels}, T(0), true);
    kaiming_uniform(p.W0, channels, rng);
    kaiming_uniform(p.W1, hidden, rng);
    return p;
  }

  std::size_t channels() const { return W0.extent(0); }
};

template <typename T>
struct SpatialAttentionParams {
  Tensor<T> freq_kernel;  // [2,7,2,1]
  Tensor<T> freq_bias;    // [1]
  Tensor<T> time_kernel;  // [7,2,2,1]
  Tensor<T> time_bias;    // [1]

  static SpatialAttentionParams init(Rng& rng) {
    SpatialAttentionParams p;
    p.freq_kernel = Tensor<T>({2, 7, 2, 1}, T(0), true);
    p.freq_bias = Tensor<T>({1}, T(0), true);
    p.time_kernel = Tensor<T>({7, 2, 2, 1}, T(0), true);
    p.time_bias = Tensor<T>({1}, T(0), true);
    kaiming_uniform(p.freq_kernel, 2 * 7 * 2, rng);
    kaiming_uniform(p.time_kernel, 7 * 2 * 2, rng);
    return p;
  }
};

template <typename T>
struct MSBlockParams {
  ChannelAttentionParams<T> channel;
  SpatialAttentionParams<T> spatial;

  static MSBlockParams init(std::size_t channels, Rng& rng) {
    MSBlockParams p;
    p.channel = ChannelAttentionParams<T>::init(channels, rng);
    p.spatial = SpatialAttentionParams<T>::init(rng);
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + "/ca_w0", channel.W0);
    fn(prefix + "/ca_b0", channel.b0);
    fn(prefix + "/ca_w1", channel.W1);
    fn(prefix + "/fa_kernel", spatial.freq_kernel);
    fn(prefix + "/fa_bias", spatial.freq_bias);
    fn(prefix + "/ta_kernel", spatial.time_kernel);
    fn(prefix + "/ta_bias", spatial.time_bias);
  }
};

template <typename T>
struct AttentionMaps {
  Tensor<T> alpha_c;  // [1,1,C]
  Tensor<T> alpha_f;  // [1,F,1]
  Tensor<T> alpha_t;  // [T,1,1]
};

// alpha_C = Sigmoid(MLP(maxpool_{T,F} H) + MLP(avgpool_{T,F} H)), with the
// MLP = FC(C->hidden)+ReLU then FC(hidden->C), parameters shared between the
// two pooled paths.
template <typename T>
Tensor<T> channel_attention(Tape<T>& tape, const Tensor<T>& H,
                            const ChannelAttentionParams<T>& p) {
  const std::size_t C = H.extent(2);
  if (p.W0.extent(0) != C)
    throw std::invalid_argument("channel_attention: channel count mismatch");
  Tensor<T> none;
  auto mlp = [&](const Tensor<T>& pooled) {
    auto v = reshape(tape, pooled, {1, C});
    auto h = relu(tape, fully_connected(tape, v, p.W0, p.b0));
    return fully_connected(tape, h, p.W1, none);
  };
  auto s_max = mlp(pool_over(tape, H, {Axis::Time, Axis::Freq}, PoolMode::Max));
  auto s_avg = mlp(pool_over(tape, H, {Axis::Time, Axis::Freq}, PoolMode::Avg));
  return reshape(tape, sigmoid(tape, add(tape, s_avg, s_max)), {1, 1, C});
}

// alpha_F: pool over C (avg;max) -> T x F x 2, pool that over T (avg;max)
// stacked on the first axis -> 2 x F x 2, conv with the 2x7x2 kernel (valid
// over the extent-2 axis, same-padded over F), sigmoid -> 1 x F x 1.
template <typename T>
Tensor<T> frequency_attention(Tape<T>& tape, const Tensor<T>& H,
                              const SpatialAttentionParams<T>& p) {
  if (H.extent(1) < 7)
    throw std::invalid_argument("frequency_attention: F must be >= 7");
  auto c_avg = pool_over(tape, H, {Axis::Chan}, PoolMode::Avg);
  auto c_max = pool_over(tape, H, {Axis::Chan}, PoolMode::Max);
  auto c_pool = concat(tape, {c_avg, c_max}, 2);  // T x F x 2
  auto t_avg = pool_over(tape, c_pool, {Axis::Time}, PoolMode::Avg);
  auto t_max = pool_over(tape, c_pool, {Axis::Time}, PoolMode::Max);
  auto pooled = concat(tape, {t_avg, t_max}, 0);  // 2 x F x 2
  auto conv = conv2d(tape, pooled, p.freq_kernel, p.freq_bias, {1, 1}, {1, 1},
                     PadMode::Valid, PadMode::Same);
  return sigmoid(tape, conv);  // 1 x F x 1
}

// alpha_T: mirror of frequency attention with time and frequency swapped;
// kernel 7x2x2, same-padded over T, valid over the extent-2 axis -> T x 1 x 1.
template <typename T>
Tensor<T> time_attention(Tape<T>& tape, const Tensor<T>& H,
                         const SpatialAttentionParams<T>& p) {
  if (H.extent(0) < 7)
    throw std::invalid_argument("time_attention: T must be >= 7");
  auto c_avg = pool_over(tape, H, {Axis::Chan}, PoolMode::Avg);
  auto c_max = pool_over(tape, H, {Axis::Chan}, PoolMode::Max);
  auto c_pool = concat(tape, {c_avg, c_max}, 2);  // T x F x 2
  auto f_avg = pool_over(tape, c_pool, {Axis::Freq}, PoolMode::Avg);
  auto f_max = pool_over(tape, c_pool, {Axis::Freq}, PoolMode::Max);
  auto pooled = concat(tape, {f_avg, f_max}, 1);  // T x 2 x 2
  auto conv = conv2d(tape, pooled, p.time_kernel, p.time_bias, {1, 1}, {1, 1},
                     PadMode::Same, PadMode::Valid);
  return sigmoid(tape, conv);  // T x 1 x 1
}

// Channel, then frequency, then time gates, in this fixed order.
template <typename T>
Tensor<T> apply_ms(Tape<T>& tape, const Tensor<T>& H, const MSBlockParams<T>& p,
                   AttentionMaps<T>* maps = nullptr) {
  auto alpha_c = channel_attention(tape, H, p.channel);
  auto h1 = mul_broadcast(tape, H, alpha_c);
  auto alpha_f = frequency_attention(tape, h1, p.spatial);
  auto h2 = mul_broadcast(tape, h1, alpha_f);
  auto alpha_t = time_attention(tape, h2, p.spatial);
  auto h3 = mul_broadcast(tape, h2, alpha_t);
  if (maps) *maps = {alpha_c, alpha_f, alpha_t};
  return h3;
}

}  // namespace msa
