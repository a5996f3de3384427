// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

// Real FFTs along one spatial axis of a FeatureMap.
//
// Convention: unnormalized forward transform, 1/n on the inverse, so that
// irfft_axis(rfft_axis(x), n) == x. The channel axis is never transformed.
//
// The naive_* functions are an O(n^2) direct-summation reference kept apart
// from the FFT path; they exist to check it.

#pragma once

#include "chasm/tensor.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace chasm {

class FftResidueError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Library-wide verify mode. When enabled, every inverse real transform checks
/// the imaginary residue of the reconstructed line and throws FftResidueError
/// if it exceeds kResidueTolerance relative to the output magnitude.
void set_verify_fft(bool on) noexcept;
bool verify_fft_enabled() noexcept;
/// Largest residue checked by irfft_axis in verify mode since the last call; resets it.
double take_max_fft_residue() noexcept;

inline constexpr double kResidueTolerance = 1e-9;
inline constexpr int kNaiveDftMaxLen = 64;

/// Mixed-radix complex FFT plan for one length. Transforms operate on
/// "vector elements": the data is laid out as n consecutive blocks of
/// `inner` complex values and the transform runs along the block index for
/// every inner offset at once.
class FftPlan {
public:
    explicit FftPlan(int n);

    int size() const noexcept { return n_; }

    /// In-place unnormalized transform; inverse uses exp(+2 pi i jk/n).
    void transform(std::span<Complex> data, std::size_t inner, bool inverse) const;

private:
    void recurse(const Complex* in, std::size_t in_stride, Complex* out, int len, int tw_step,
                 std::size_t inner, int factor_idx, bool inverse, Complex* tmp) const;

    int n_;
    std::vector<int> factors_;  // prime factors, smallest first
    std::vector<Complex> twiddle_;  // exp(-2 pi i j / n)
};

HalfSpectrum rfft_axis(const FeatureMap& x, Axis axis);

/// Inverse of rfft_axis. target_len must satisfy floor(target_len/2)+1 == s.retained().
/// The imaginary part of DC and (for even lengths) Nyquist bins is discarded;
/// in verify mode a non-negligible discarded residue throws.
FeatureMap irfft_axis(const HalfSpectrum& s, int target_len);

/// Same as irfft_axis but never checks the residue. Used by adjoints, whose
/// inputs are not conjugate-symmetric by construction.
FeatureMap irfft_axis_unchecked(const HalfSpectrum& s, int target_len);

/// max |imag| / max(|real|, tiny) of the full-spectrum inverse of s.
double irfft_residue(const HalfSpectrum& s);

HalfSpectrum naive_dft_axis(const FeatureMap& x, Axis axis);
FeatureMap naive_idft_axis(const HalfSpectrum& s, int target_len);

/// Adjoint of rfft_axis w.r.t. the real inner product on (Re, Im) pairs:
/// <rfft(x), y> = <x, rfft_adjoint(y)> with <a, b> = sum Re(conj(a) b).
FeatureMap rfft_adjoint(const HalfSpectrum& y, int target_len);

/// Adjoint of irfft_axis under the same inner product.
HalfSpectrum irfft_adjoint(const FeatureMap& g, Axis axis);

/// Half-spectrum inner product weighting bins by their multiplicity in the full
/// spectrum (1 for DC and Nyquist, 2 otherwise): equals the full-spectrum
/// real inner product of the conjugate-symmetric extensions.
double weighted_inner(const HalfSpectrum& a, const HalfSpectrum& b);

/// Plain real inner product sum Re(conj(a) b) over stored bins.
double plain_inner(const HalfSpectrum& a, const HalfSpectrum& b);

/// Multiplicity of bin k in a length-n spectrum.
inline int bin_multiplicity(int k, int n) noexcept
{
    if (k == 0) return 1;
    if (n % 2 == 0 && k == n / 2) return 1;
    return 2;
}

/// Unnormalized 2D complex transform of an image (rows then columns).
void fft2(ComplexImage& img, bool inverse);

}  // namespace chasm
