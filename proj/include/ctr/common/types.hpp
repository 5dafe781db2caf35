// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>

namespace ctr {

using Complex = std::complex<double>;

// |z| without the overflow guard of std::abs, which goes through hypot and
// dominates the loss loops. Spectrogram values are nowhere near the limits.
inline double Magnitude(Complex z) { return std::sqrt(z.real() * z.real() + z.imag() * z.imag()); }

}  // namespace ctr
