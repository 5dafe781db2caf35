// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <string>

#include <Eigen/Dense>

#include "ctr/common/error.hpp"
#include "ctr/common/types.hpp"

namespace ctr {

namespace detail {

// y[i] += a * x[i]. Written on the interleaved doubles so it vectorizes
// without relying on the target's complex-multiply support.
inline void ComplexAxpy(Complex a, const Complex* x, Complex* y, Eigen::Index n) {
  const double ar = a.real(), ai = a.imag();
  const double* xs = reinterpret_cast<const double*>(x);
  double* ys = reinterpret_cast<double*>(y);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xr = xs[2 * i], xi = xs[2 * i + 1];
    ys[2 * i] += ar * xr - ai * xi;
    ys[2 * i + 1] += ar * xi + ai * xr;
  }
}

}  // namespace detail

// Per-frequency filtering of a spectrogram with a tap window spanning frames
// [t - past + 1, t + future]:
//
//   out(t, f) = sum_k conj(taps(f, k)) * z(t - past + 1 + k, f)
//
// taps is [bin, tap]; frames outside the spectrogram read as zero.
inline Eigen::MatrixXcd SubbandConvolve(const Eigen::MatrixXcd& taps, int past_taps, const Eigen::MatrixXcd& z) {
  if (taps.rows() != z.cols())
    throw DimensionError("filter covers " + std::to_string(taps.rows()) + " bins but spectrogram has " +
                         std::to_string(z.cols()));
  const Eigen::Index frames = z.rows();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(frames, z.cols());
  for (Eigen::Index f = 0; f < z.cols(); ++f) {
    for (Eigen::Index k = 0; k < taps.cols(); ++k) {
      const Eigen::Index offset = k - past_taps + 1;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -offset);
      const Eigen::Index t1 = std::min<Eigen::Index>(frames, frames - offset);
      if (t1 <= t0) continue;
      detail::ComplexAxpy(std::conj(taps(f, k)), z.col(f).data() + t0 + offset, out.col(f).data() + t0, t1 - t0);
    }
  }
  return out;
}

// Adjoint of SubbandConvolve with respect to z.
inline Eigen::MatrixXcd SubbandConvolveAdjoint(const Eigen::MatrixXcd& taps, int past_taps,
                                               const Eigen::MatrixXcd& grad) {
  const Eigen::Index frames = grad.rows();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(frames, grad.cols());
  for (Eigen::Index f = 0; f < grad.cols(); ++f) {
    for (Eigen::Index k = 0; k < taps.cols(); ++k) {
      const Eigen::Index offset = k - past_taps + 1;
      const Eigen::Index s0 = std::max<Eigen::Index>(0, offset);
      const Eigen::Index s1 = std::min<Eigen::Index>(frames, frames + offset);
      if (s1 <= s0) continue;
      detail::ComplexAxpy(taps(f, k), grad.col(f).data() + s0 - offset, out.col(f).data() + s0, s1 - s0);
    }
  }
  return out;
}

}  // namespace ctr
