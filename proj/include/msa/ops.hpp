// Differentiable ops over Tensor<T>: convolution, pooling, fully-connected,
// elementwise nonlinearities, broadcast multiply, concat and losses.  Each op
// computes its forward result eagerly and, when the tape is recording and an
// input is tracked, appends a backward closure to the tape.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "msa/tensor.hpp"

namespace msa {

enum class Axis : std::size_t { Time = 0, Freq = 1, Chan = 2 };
enum class PadMode { Same, Valid };
enum class PoolMode { Max, Avg };

namespace detail {

template <typename T>
inline bool track(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> ins) {
  if (!tape.recording()) return false;
  for (auto* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Output extent and begin-padding for one spatial axis.
inline void conv_axis_geometry(std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t dilation, PadMode pad,
                               std::size_t* out, std::ptrdiff_t* pad_begin) {
  if (stride == 0 || dilation == 0)
    throw std::invalid_argument("conv2d: stride and dilation must be >= 1");
  const std::size_t span = (k - 1) * dilation + 1;
  if (pad == PadMode::Same) {
    *out = (in + stride - 1) / stride;
    const std::ptrdiff_t total =
        std::max<std::ptrdiff_t>(0, std::ptrdiff_t((*out - 1) * stride + span) -
                                        std::ptrdiff_t(in));
    *pad_begin = total / 2;
  } else {
    if (in < span)
      throw std::invalid_argument("conv2d: input extent " + std::to_string(in) +
                                  " smaller than dilated kernel span " +
                                  std::to_string(span));
    *out = (in - span) / stride + 1;
    *pad_begin = 0;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: input [T,F,Cin] (x) kernel [kT,kF,Cin,Cout] -> [To,Fo,Cout].
// Cross-correlation with dilated taps, zero padding, per-axis padding mode.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, std::pair<std::size_t, std::size_t> stride,
                 std::pair<std::size_t, std::size_t> dilation, PadMode pad_t,
                 PadMode pad_f) {
  if (input.rank() != 3 || kernel.rank() != 4)
    throw std::invalid_argument("conv2d: expected input rank 3 and kernel rank 4");
  const std::size_t Tin = input.extent(0), Fin = input.extent(1),
                    Cin = input.extent(2);
  const std::size_t kT = kernel.extent(0), kF = kernel.extent(1),
                    Cout = kernel.extent(3);
  if (kernel.extent(2) != Cin)
    throw std::invalid_argument("conv2d: kernel Cin " +
                                std::to_string(kernel.extent(2)) +
                                " != input Cin " + std::to_string(Cin));
  if (bias.defined() && bias.size() != Cout)
    throw std::invalid_argument("conv2d: bias size != Cout");

  std::size_t To, Fo;
  std::ptrdiff_t padT, padF;
  detail::conv_axis_geometry(Tin, kT, stride.first, dilation.first, pad_t, &To, &padT);
  detail::conv_axis_geometry(Fin, kF, stride.second, dilation.second, pad_f, &Fo, &padF);

  Tensor<T> out({To, Fo, Cout}, T(0),
                detail::track(tape, {&input, &kernel, &bias}));

  const T* in = input.data().data();
  const T* ker = kernel.data().data();
  T* o = out.data().data();
  for (std::size_t to = 0; to < To; ++to) {
    for (std::size_t fo = 0; fo < Fo; ++fo) {
      T* op = o + (to * Fo + fo) * Cout;
      if (bias.defined())
        for (std::size_t co = 0; co < Cout; ++co) op[co] = bias[co];
      for (std::size_t kt = 0; kt < kT; ++kt) {
        const std::ptrdiff_t ti =
            std::ptrdiff_t(to * stride.first) - padT + std::ptrdiff_t(kt * dilation.first);
        if (ti < 0 || ti >= std::ptrdiff_t(Tin)) continue;
        for (std::size_t kf = 0; kf < kF; ++kf) {
          const std::ptrdiff_t fi =
              std::ptrdiff_t(fo * stride.second) - padF + std::ptrdiff_t(kf * dilation.second);
          if (fi < 0 || fi >= std::ptrdiff_t(Fin)) continue;
          const T* ip = in + (std::size_t(ti) * Fin + std::size_t(fi)) * Cin;
          const T* kp = ker + (kt * kF + kf) * Cin * Cout;
          for (std::size_t ci = 0; ci < Cin; ++ci) {
            const T v = ip[ci];
            const T* kc = kp + ci * Cout;
            for (std::size_t co = 0; co < Cout; ++co) op[co] += v * kc[co];
          }
        }
      }
    }
  }
  out.check_finite("conv2d");

  if (out.requires_grad()) {
    tape.record([input, kernel, bias, out, stride, dilation, padT, padF, To, Fo,
                 Tin, Fin, Cin, kT, kF, Cout]() mutable {
      const T* go = out.grad().data();
      const T* in = input.data().data();
      const T* ker = kernel.data().data();
      T* gin = input.requires_grad() ? input.grad().data() : nullptr;
      T* gker = kernel.requires_grad() ? kernel.grad().data() : nullptr;
      T* gbias = (bias.defined() && bias.requires_grad()) ? bias.grad().data() : nullptr;
      for (std::size_t to = 0; to < To; ++to) {
        for (std::size_t fo = 0; fo < Fo; ++fo) {
          const T* gop = go + (to * Fo + fo) * Cout;
          if (gbias)
            for (std::size_t co = 0; co < Cout; ++co) gbias[co] += gop[co];
          for (std::size_t kt = 0; kt < kT; ++kt) {
            const std::ptrdiff_t ti =
                std::ptrdiff_t(to * stride.first) - padT + std::ptrdiff_t(kt * dilation.first);
            if (ti < 0 || ti >= std::ptrdiff_t(Tin)) continue;
            for (std::size_t kf = 0; kf < kF; ++kf) {
              const std::ptrdiff_t fi =
                  std::ptrdiff_t(fo * stride.second) - padF + std::ptrdiff_t(kf * dilation.second);
              if (fi < 0 || fi >= std::ptrdiff_t(Fin)) continue;
              const std::size_t ibase = (std::size_t(ti) * Fin + std::size_t(fi)) * Cin;
              const std::size_t kbase = (kt * kF + kf) * Cin * Cout;
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                const T* kc = ker + kbase + ci * Cout;
                if (gin) {
                  T acc = T(0);
                  for (std::size_t co = 0; co < Cout; ++co) acc += kc[co] * gop[co];
                  gin[ibase + ci] += acc;
                }
                if (gker) {
                  const T v = in[ibase + ci];
                  T* gk = gker + kbase + ci * Cout;
                  for (std::size_t co = 0; co < Cout; ++co) gk[co] += v * gop[co];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, std::pair<std::size_t, std::size_t> stride,
                 std::pair<std::size_t, std::size_t> dilation, PadMode pad) {
  return conv2d(tape, input, kernel, bias, stride, dilation, pad, pad);
}

// ---------------------------------------------------------------------------
// pool_over: reduce named axes of a [T,F,C] map; reduced axes keep extent 1.
// Avg splits gradient uniformly; max routes it to the first argmax.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> pool_over(Tape<T>& tape, const Tensor<T>& input,
                    std::initializer_list<Axis> axes, PoolMode mode) {
  if (input.rank() != 3)
    throw std::invalid_argument("pool_over: expected rank-3 input");
  if (axes.size() == 0) throw std::invalid_argument("pool_over: no axes given");
  std::array<bool, 3> red{false, false, false};
  for (Axis a : axes) red[std::size_t(a)] = true;

  const std::size_t ext[3] = {input.extent(0), input.extent(1), input.extent(2)};
  Shape oshape = {red[0] ? 1 : ext[0], red[1] ? 1 : ext[1], red[2] ? 1 : ext[2]};
  Tensor<T> out(oshape, T(0), detail::track(tape, {&input}));

  const std::size_t group = ext[0] * ext[1] * ext[2] / shape_numel(oshape);
  std::vector<std::uint32_t> argmax;
  if (mode == PoolMode::Max)
    argmax.assign(out.size(), 0);

  auto out_index = [red, oshape](std::size_t t, std::size_t f, std::size_t c) {
    return ((red[0] ? 0 : t) * oshape[1] + (red[1] ? 0 : f)) * oshape[2] +
           (red[2] ? 0 : c);
  };

  if (mode == PoolMode::Max) {
    std::vector<bool> seen(out.size(), false);
    std::size_t flat = 0;
    for (std::size_t t = 0; t < ext[0]; ++t)
      for (std::size_t f = 0; f < ext[1]; ++f)
        for (std::size_t c = 0; c < ext[2]; ++c, ++flat) {
          const std::size_t oi = out_index(t, f, c);
          const T v = input[flat];
          if (!seen[oi] || v > out[oi]) {  // strict > keeps the first argmax
            seen[oi] = true;
            out[oi] = v;
            argmax[oi] = std::uint32_t(flat);
          }
        }
  } else {
    std::size_t flat = 0;
    for (std::size_t t = 0; t < ext[0]; ++t)
      for (std::size_t f = 0; f < ext[1]; ++f)
        for (std::size_t c = 0; c < ext[2]; ++c, ++flat)
          out[out_index(t, f, c)] += input[flat];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= T(group);
  }
  out.check_finite("pool_over");

  if (out.requires_grad()) {
    tape.record([input, out, red, ext, oshape, mode, group,
                 argmax = std::move(argmax), out_index]() mutable {
      if (!input.requires_grad()) return;
      T* gin = input.grad().data();
      const T* go = out.grad().data();
      if (mode == PoolMode::Max) {
        for (std::size_t i = 0; i < out.size(); ++i) gin[argmax[i]] += go[i];
      } else {
        std::size_t flat = 0;
        for (std::size_t t = 0; t < ext[0]; ++t)
          for (std::size_t f = 0; f < ext[1]; ++f)
            for (std::size_t c = 0; c < ext[2]; ++c, ++flat)
              gin[flat] += go[out_index(t, f, c)] / T(group);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// fully_connected: x [n,din] * W [din,dout] + b -> [n,dout].  Bias optional
// (pass a default-constructed Tensor to omit it).
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> fully_connected(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& W,
                          const Tensor<T>& b) {
  if (x.rank() != 2 || W.rank() != 2)
    throw std::invalid_argument("fully_connected: x and W must be rank 2");
  const std::size_t n = x.extent(0), din = x.extent(1), dout = W.extent(1);
  if (W.extent(0) != din)
    throw std::invalid_argument("fully_connected: inner extents disagree: " +
                                shape_str(x.shape()) + " vs " + shape_str(W.shape()));
  if (b.defined() && b.size() != dout)
    throw std::invalid_argument("fully_connected: bias size != dout");

  Tensor<T> out({n, dout}, T(0), detail::track(tape, {&x, &W, &b}));
  for (std::size_t i = 0; i < n; ++i) {
    T* op = &out[i * dout];
    if (b.defined())
      for (std::size_t j = 0; j < dout; ++j) op[j] = b[j];
    for (std::size_t k = 0; k < din; ++k) {
      const T v = x[i * din + k];
      const T* wp = &W[k * dout];
      for (std::size_t j = 0; j < dout; ++j) op[j] += v * wp[j];
    }
  }
  out.check_finite("fully_connected");

  if (out.requires_grad()) {
    tape.record([x, W, b, out, n, din, dout]() mutable {
      const T* go = out.grad().data();
      for (std::size_t i = 0; i < n; ++i) {
        const T* gop = go + i * dout;
        if (x.requires_grad()) {
          T* gx = &x.grad()[i * din];
          for (std::size_t k = 0; k < din; ++k) {
            const T* wp = &W[k * dout];
            T acc = T(0);
            for (std::size_t j = 0; j < dout; ++j) acc += wp[j] * gop[j];
            gx[k] += acc;
          }
        }
        if (W.requires_grad()) {
          for (std::size_t k = 0; k < din; ++k) {
            const T v = x[i * din + k];
            T* gw = &W.grad()[k * dout];
            for (std::size_t j = 0; j < dout; ++j) gw[j] += v * gop[j];
          }
        }
        if (b.defined() && b.requires_grad()) {
          T* gb = b.grad().data();
          for (std::size_t j = 0; j < dout; ++j) gb[j] += gop[j];
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise ops.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out(x.shape(), T(0), detail::track(tape, {&x}));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  out.check_finite("relu");
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      if (!x.requires_grad()) return;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > T(0)) x.grad()[i] += out.grad()[i];  // grad at 0 is 0
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out(x.shape(), T(0), detail::track(tape, {&x}));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  out.check_finite("sigmoid");
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      if (!x.requires_grad()) return;
      for (std::size_t i = 0; i < x.size(); ++i)
        x.grad()[i] += out.grad()[i] * out[i] * (T(1) - out[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape(), T(0), detail::track(tape, {&a, &b}));
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  out.check_finite("add");
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const T g = out.grad()[i];
        if (a.requires_grad()) a.grad()[i] += g;
        if (b.requires_grad()) b.grad()[i] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T c) {
  Tensor<T> out(x.shape(), T(0), detail::track(tape, {&x}));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * c;
  out.check_finite("scale");
  if (out.requires_grad()) {
    tape.record([x, out, c]() mutable {
      if (!x.requires_grad()) return;
      for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += c * out.grad()[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// mul_broadcast: a (*) b where every axis of b equals a's or is 1; the
// gradient for b sums over its broadcast axes.  Ranks must match.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> mul_broadcast(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank())
    throw std::invalid_argument("mul_broadcast: rank mismatch");
  const std::size_t r = a.rank();
  for (std::size_t i = 0; i < r; ++i)
    if (b.extent(i) != a.extent(i) && b.extent(i) != 1)
      throw std::invalid_argument("mul_broadcast: incompatible axes " +
                                  shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));

  // Strides for b with broadcast axes pinned to 0.
  std::array<std::size_t, 4> bs{0, 0, 0, 0}, ae{1, 1, 1, 1};
  for (std::size_t i = 0; i < r; ++i) ae[i] = a.extent(i);
  {
    std::size_t s = 1;
    for (std::size_t i = r; i-- > 0;) {
      bs[i] = (b.extent(i) == 1) ? 0 : s;
      s *= b.extent(i);
    }
  }

  Tensor<T> out(a.shape(), T(0), detail::track(tape, {&a, &b}));
  auto for_each = [ae, bs](auto&& body) {
    std::size_t flat = 0;
    for (std::size_t i0 = 0; i0 < ae[0]; ++i0)
      for (std::size_t i1 = 0; i1 < ae[1]; ++i1)
        for (std::size_t i2 = 0; i2 < ae[2]; ++i2)
          for (std::size_t i3 = 0; i3 < ae[3]; ++i3, ++flat)
            body(flat, i0 * bs[0] + i1 * bs[1] + i2 * bs[2] + i3 * bs[3]);
  };
  for_each([&](std::size_t ia, std::size_t ib) { out[ia] = a[ia] * b[ib]; });
  out.check_finite("mul_broadcast");

  if (out.requires_grad()) {
    tape.record([a, b, out, for_each]() mutable {
      for_each([&](std::size_t ia, std::size_t ib) {
        const T g = out.grad()[ia];
        if (a.requires_grad()) a.grad()[ia] += g * b[ib];
        if (b.requires_grad()) b.grad()[ib] += g * a[ia];
      });
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// concat along one axis; all other extents must agree.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts,
                 std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t r = parts[0].rank();
  if (axis >= r) throw std::invalid_argument("concat: axis out of range");
  Shape oshape = parts[0].shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].rank() != r)
      throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t i = 0; i < r; ++i)
      if (i != axis && parts[p].extent(i) != oshape[i])
        throw std::invalid_argument("concat: non-concat extents differ");
    oshape[axis] += parts[p].extent(axis);
  }

  bool track = false;
  for (const auto& p : parts) track = track || (tape.recording() && p.requires_grad());
  Tensor<T> out(oshape, T(0), track);

  // outer = product of extents before axis, inner = product after.
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= oshape[i];
  for (std::size_t i = axis + 1; i < r; ++i) inner *= oshape[i];

  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pa = p.extent(axis);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t j = 0; j < pa; ++j)
        for (std::size_t k = 0; k < inner; ++k)
          out[(o * oshape[axis] + off + j) * inner + k] =
              p[(o * pa + j) * inner + k];
    off += pa;
  }
  out.check_finite("concat");

  if (out.requires_grad()) {
    tape.record([parts, out, axis, outer, inner, oshape]() mutable {
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t pa = p.extent(axis);
        if (p.requires_grad()) {
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < pa; ++j)
              for (std::size_t k = 0; k < inner; ++k)
                p.grad()[(o * pa + j) * inner + k] +=
                    out.grad()[(o * oshape[axis] + off + j) * inner + k];
        }
        off += pa;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reshape: same element count, gradient passes straight through.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor<T> out(shape, T(0), detail::track(tape, {&x}));
  out.data() = x.data();
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      if (!x.requires_grad()) return;
      for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out({1}, T(0), detail::track(tape, {&x}));
  T acc = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  out[0] = acc;
  out.check_finite("sum");
  if (out.requires_grad()) {
    tape.record([x, out]() mutable {
      if (!x.requires_grad()) return;
      const T g = out.grad()[0];
      for (std::size_t i = 0; i < x.size(); ++i) x.grad()[i] += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::size_t label) {
  const std::size_t K = logits.size();
  if (label >= K)
    throw std::invalid_argument("softmax_cross_entropy: label " +
                                std::to_string(label) + " out of range for K=" +
                                std::to_string(K));
  T m = logits[0];
  for (std::size_t i = 1; i < K; ++i) m = std::max(m, logits[i]);
  T z = T(0);
  for (std::size_t i = 0; i < K; ++i) z += std::exp(logits[i] - m);
  const T logz = std::log(z) + m;

  Tensor<T> out({1}, T(0), detail::track(tape, {&logits}));
  out[0] = logz - logits[label];
  out.check_finite("softmax_cross_entropy");
  if (out.requires_grad()) {
    tape.record([logits, out, label, logz, K]() mutable {
      if (!logits.requires_grad()) return;
      const T g = out.grad()[0];
      for (std::size_t i = 0; i < K; ++i) {
        T p = std::exp(logits[i] - logz);  // softmax - one-hot
        if (i == label) p -= T(1);
        logits.grad()[i] += g * p;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mse_loss(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mse_loss: shape mismatch");
  Tensor<T> out({1}, T(0), detail::track(tape, {&a, &b}));
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  out[0] = acc / T(a.size());
  out.check_finite("mse_loss");
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      const T g = out.grad()[0] * T(2) / T(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const T d = a[i] - b[i];
        if (a.requires_grad()) a.grad()[i] += g * d;
        if (b.requires_grad()) b.grad()[i] -= g * d;
      }
    });
  }
  return out;
}

// Plain softmax (no grad); handy for probability read-outs in tests/eval.
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  T m = logits[0];
  for (T v : logits) m = std::max(m, v);
  T z = T(0);
  std::vector<T> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (T& v : p) v /= z;
  return p;
}

}  // namespace msa
