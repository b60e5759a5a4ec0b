// Central finite-difference verification of reverse-mode gradients.

#pragma once

#include <functional>

#include "msa/ops.hpp"

namespace msa {

// fn must evaluate a scalar from `inputs` using the given tape.  Returns the
// maximum over all coordinates of |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-8).  Meant to run at 64-bit precision.
template <typename T>
T grad_check(const std::function<Tensor<T>(Tape<T>&, std::vector<Tensor<T>>&)>& fn,
             std::vector<Tensor<T>>& inputs, T eps = T(1e-5)) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Tape<T> tape;
  Tensor<T> loss = fn(tape, inputs);
  if (loss.size() != 1)
    throw std::invalid_argument("grad_check: fn must be scalar-valued");
  tape.backward(loss);

  auto eval = [&]() {
    Tape<T> t(false);
    return fn(t, inputs).item();
  };

  T max_err = T(0);
  for (auto& in : inputs) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const T saved = in[i];
      in[i] = saved + eps;
      const T fp = eval();
      in[i] = saved - eps;
      const T fm = eval();
      in[i] = saved;
      const T numeric = (fp - fm) / (T(2) * eps);
      const T analytic = in.has_grad() ? in.grad()[i] : T(0);
      const T denom = std::max({std::abs(analytic), std::abs(numeric), T(1e-8)});
      max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
    }
  }
  return max_err;
}

}  // namespace msa
