#pragma once

#include <functional>
#include <span>

#include "remede/tensor.hpp"

namespace remede {

// Central finite-difference gradient check.
//
// `eval` recomputes the scalar loss from the current contents of `params`
// (which this function perturbs in place and restores). `analytic` holds one
// gradient tensor per parameter, matching shapes. Returns the maximum
// relative error over all coordinates.
double finite_diff_check(const std::function<double()>& eval,
                         std::span<Tensor* const> params,
                         std::span<const Tensor> analytic,
                         double step = 1e-6);

// Single-tensor convenience overload.
double finite_diff_check(const std::function<double()>& eval, Tensor& param,
                         const Tensor& analytic, double step = 1e-6);

}  // namespace remede
