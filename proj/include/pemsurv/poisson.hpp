// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>
#include <cmath>

namespace pemsurv {

/// Unit Poisson deviance 2 (y log(y/mu) - (y - mu)), with y log y = 0 at y = 0.
template <class Scalar>
Scalar poisson_unit_deviance(Scalar y, Scalar mu) {
    using std::log;
    if (y == Scalar(0)) return Scalar(2) * mu;
    return Scalar(2) * (y * log(y / mu) - (y - mu));
}

/// Gradient and hessian of the Poisson negative log-likelihood with respect
/// to the margin, where the mean is exp(margin + log_offset):
/// g = mu - y, h = mu.
template <class Margin, class Offset, class Label, class Grad, class Hess>
void poisson_gradient_hessian(const Eigen::ArrayBase<Margin>& margin, const Eigen::ArrayBase<Offset>& log_offset,
                              const Eigen::ArrayBase<Label>& y, Eigen::ArrayBase<Grad>& grad,
                              Eigen::ArrayBase<Hess>& hess) {
    hess.derived() = (margin + log_offset).exp();
    grad.derived() = hess - y;
}

/// Negative log-likelihood per row up to the label-only constant:
/// mu - y (margin + log_offset).
template <class Scalar>
Scalar poisson_nll(Scalar y, Scalar eta_with_offset) {
    using std::exp;
    return exp(eta_with_offset) - y * eta_with_offset;
}

/// Mean unit deviance over rows.
template <class Margin, class Offset, class Label>
typename Margin::Scalar poisson_mean_deviance(const Eigen::ArrayBase<Margin>& margin,
                                              const Eigen::ArrayBase<Offset>& log_offset,
                                              const Eigen::ArrayBase<Label>& y) {
    using Scalar = typename Margin::Scalar;
    const Eigen::Index n = margin.size();
    if (n == 0) return Scalar(0);
    Scalar total(0);
    for (Eigen::Index i = 0; i < n; ++i) {
        using std::exp;
        total += poisson_unit_deviance<Scalar>(y(i), exp(margin(i) + log_offset(i)));
    }
    return total / Scalar(n);
}

}  // namespace pemsurv
