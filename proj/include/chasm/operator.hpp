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

// Harmonized per-axis spectral operator: M(k) = U diag(lambda_k) U^T with a
// single orthogonal U = exp(A(theta)) shared by all frequency bins of one axis
// and a per-bin positive gain vector interpolated from a B x C table.

#pragma once

#include "chasm/linalg.hpp"
#include "chasm/tensor.hpp"

#include <span>
#include <vector>

namespace chasm {

/// Number of strictly-lower-triangular entries of a C x C matrix.
constexpr int skew_size(int channels) noexcept { return channels * (channels - 1) / 2; }

/// Packed strictly-lower-triangular parameters, row-major:
/// (1,0), (2,0), (2,1), (3,0), ...
struct SkewParams {
    int channels = 0;
    std::vector<double> theta;

    static SkewParams zeros(int channels);
    void validate() const;
    bool is_zero() const noexcept;
};

/// Position of A(i, j), i > j, in the packed theta vector.
constexpr int skew_index(int i, int j) noexcept { return i * (i - 1) / 2 + j; }

struct OrthoBasis {
    Matrix u;

    int channels() const noexcept { return u.rows(); }
    /// max |U^T U - I|
    double orthogonality_error() const;
};

enum class GainMode { Positive, Signed, Complex };

/// Raw (pre-activation) gain table, B x C row-major.
struct GainTable {
    int bins = 0;
    int channels = 0;
    std::vector<double> gamma;

    GainTable() = default;
    GainTable(int bins, int channels, double fill = 0.0);

    double& at(int b, int c) noexcept { return gamma[std::size_t(b) * channels + c]; }
    double at(int b, int c) const noexcept { return gamma[std::size_t(b) * channels + c]; }
    std::span<const double> row(int b) const noexcept
    {
        return {gamma.data() + std::size_t(b) * channels, std::size_t(channels)};
    }
    bool empty() const noexcept { return gamma.empty(); }
};

/// Per-bin gain vectors, K x C row-major.
struct GainVectors {
    int bins = 0;
    int channels = 0;
    std::vector<double> lambda;

    std::span<const double> row(int k) const noexcept
    {
        return {lambda.data() + std::size_t(k) * channels, std::size_t(channels)};
    }
    std::span<double> row(int k) noexcept
    {
        return {lambda.data() + std::size_t(k) * channels, std::size_t(channels)};
    }
};

/// Table coordinate of bin k: p = k / (K - 1) * (B - 1), blended between rows
/// lo = floor(p) and hi = lo + 1 with weight frac on hi.
struct InterpTap {
    int lo = 0;
    int hi = 0;
    double frac = 0.0;
};

std::vector<InterpTap> interpolation_taps(int table_bins, int K);

/// Linear interpolation of the table rows to K bins, without activation.
GainTable interpolate_rows(const GainTable& g, int K);

double softplus(double x) noexcept;
/// d softplus / dx = logistic sigmoid
double softplus_grad(double x) noexcept;
double softplus_inverse(double y);

/// ln(e - 1): the raw table value for which softplus gives exactly a unit gain.
double identity_gain_raw() noexcept;

Matrix build_skew(const SkewParams& p);

/// exp(A(theta)); theta == 0 short-circuits to the exact identity.
OrthoBasis basis_from_params(const SkewParams& p);

/// Interpolates then applies the mode activation: Positive is softplus,
/// Signed is the identity. Complex returns the softplus magnitude; phases
/// are handled separately (see interpolate_phases in mixer.hpp).
GainVectors interpolate_gains(const GainTable& g, int K, GainMode mode);

/// out = U (lambda_k .* (U^T v)); real U acts on real and imaginary parts alike.
void apply_operator(const OrthoBasis& basis, std::span<const double> lambda_k, std::span<const Complex> v,
                    std::span<Complex> out);
std::vector<Complex> apply_operator(const OrthoBasis& basis, std::span<const double> lambda_k,
                                    std::span<const Complex> v);

/// Dense M(k) = U diag(lambda_k) U^T. Verification only; the hot path never
/// materializes it.
Matrix dense_operator(const OrthoBasis& basis, std::span<const double> lambda_k);

/// Row permutation of a K x C table: (sigma . L)_k = L_{sigma^{-1}(k)}.
/// sigma[i] is the image of i.
GainVectors reindex_gains(const GainVectors& table, std::span<const int> sigma);
GainTable reindex_gains(const GainTable& table, std::span<const int> sigma);

/// Per-frequency skew parameters for the untied-basis ablation: bins x skew_size(C).
struct UntiedParams {
    int bins = 0;
    int channels = 0;
    std::vector<double> theta;

    SkewParams at(int k) const;
    std::span<double> slice(int k) noexcept
    {
        const std::size_t p = skew_size(channels);
        return {theta.data() + std::size_t(k) * p, p};
    }
};

/// Learnable spectral core of one axis. Which fields are populated depends on
/// the core variant (see MixerParams); unused groups stay empty.
struct AxisOperatorParams {
    Axis axis = Axis::Height;
    SkewParams skew;     // shared basis (empty for the identity-basis variant)
    GainTable gains;     // B x C raw gains (K x C for the untied variant)
    GainTable phases;    // B x C raw phases, complex-gain variant only
    UntiedParams untied; // untied variant only

    int channels() const noexcept { return gains.channels; }
    /// Number of trainable scalars for this axis.
    std::size_t parameter_count() const noexcept;
};

}  // namespace chasm
