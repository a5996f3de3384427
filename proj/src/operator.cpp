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

#include "chasm/operator.hpp"

#include <algorithm>
#include <numbers>
#include <cmath>
#include <string>

namespace chasm {

SkewParams SkewParams::zeros(int channels)
{
    if (channels < 1) throw std::invalid_argument("SkewParams: channels must be >= 1");
    return {channels, std::vector<double>(skew_size(channels), 0.0)};
}

void SkewParams::validate() const
{
    if (channels < 1) throw std::invalid_argument("SkewParams: channels must be >= 1");
    if (theta.size() != std::size_t(skew_size(channels)))
        throw std::invalid_argument("SkewParams: expected " + std::to_string(skew_size(channels)) +
                                    " parameters, got " + std::to_string(theta.size()));
    for (double t : theta)
        if (!std::isfinite(t)) throw std::invalid_argument("SkewParams: non-finite entry");
}

bool SkewParams::is_zero() const noexcept
{
    return std::all_of(theta.begin(), theta.end(), [](double t) { return t == 0.0; });
}

double OrthoBasis::orthogonality_error() const
{
    Matrix g = u.transposed() * u;
    g -= Matrix::identity(u.rows());
    return max_abs(g);
}

GainTable::GainTable(int bins_, int channels_, double fill)
    : bins(bins_), channels(channels_), gamma(std::size_t(bins_) * channels_, fill)
{
    if (bins_ < 1 || channels_ < 1) throw std::invalid_argument("GainTable: bins and channels must be >= 1");
}

std::vector<InterpTap> interpolation_taps(int table_bins, int K)
{
    if (table_bins < 1 || K < 1) throw std::invalid_argument("interpolation_taps: B and K must be >= 1");
    std::vector<InterpTap> taps(K);
    if (table_bins == 1 || K == 1) return taps;  // broadcast row 0 / coordinate 0
    for (int k = 0; k < K; ++k) {
        const double p = double(k) * (table_bins - 1) / (K - 1);
        int lo = int(std::floor(p));
        if (lo >= table_bins - 1) {
            taps[k] = {table_bins - 1, table_bins - 1, 0.0};
        } else {
            taps[k] = {lo, lo + 1, p - lo};
        }
    }
    return taps;
}

GainTable interpolate_rows(const GainTable& g, int K)
{
    const auto taps = interpolation_taps(g.bins, K);
    GainTable out(K, g.channels);
    for (int k = 0; k < K; ++k) {
        const auto& t = taps[k];
        for (int c = 0; c < g.channels; ++c)
            out.at(k, c) = t.frac == 0.0 ? g.at(t.lo, c) : (1.0 - t.frac) * g.at(t.lo, c) + t.frac * g.at(t.hi, c);
    }
    return out;
}

double softplus(double x) noexcept
{
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double softplus_grad(double x) noexcept
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_inverse(double y)
{
    if (!(y > 0.0)) throw std::invalid_argument("softplus_inverse: argument must be positive");
    // ln(e^y - 1) = y + ln(1 - e^-y)
    return y + std::log(-std::expm1(-y));
}

double identity_gain_raw() noexcept { return std::log(std::numbers::e - 1.0); }

Matrix build_skew(const SkewParams& p)
{
    p.validate();
    const int C = p.channels;
    Matrix a(C, C);
    for (int i = 1; i < C; ++i)
        for (int j = 0; j < i; ++j) {
            const double t = p.theta[skew_index(i, j)];
            a(i, j) = t;
            a(j, i) = -t;
        }
    return a;
}

OrthoBasis basis_from_params(const SkewParams& p)
{
    p.validate();
    if (p.is_zero()) return {Matrix::identity(p.channels)};
    return {matrix_exp(build_skew(p))};
}

GainVectors interpolate_gains(const GainTable& g, int K, GainMode mode)
{
    const GainTable pre = interpolate_rows(g, K);
    GainVectors out{K, g.channels, pre.gamma};
    if (mode != GainMode::Signed)
        for (double& v : out.lambda) v = softplus(v);
    return out;
}

void apply_operator(const OrthoBasis& basis, std::span<const double> lambda_k, std::span<const Complex> v,
                    std::span<Complex> out)
{
    const int C = basis.channels();
    if (lambda_k.size() != std::size_t(C) || v.size() != std::size_t(C) || out.size() != std::size_t(C))
        throw std::invalid_argument("apply_operator: dimension mismatch");
    const Matrix& U = basis.u;
    // y = lambda .* (U^T v)
    Complex y[64];
    std::vector<Complex> heap;
    Complex* yp = y;
    if (C > 64) {
        heap.resize(C);
        yp = heap.data();
    }
    for (int j = 0; j < C; ++j) {
        Complex s{};
        for (int i = 0; i < C; ++i) s += U(i, j) * v[i];
        yp[j] = lambda_k[j] * s;
    }
    for (int i = 0; i < C; ++i) {
        Complex s{};
        for (int j = 0; j < C; ++j) s += U(i, j) * yp[j];
        out[i] = s;
    }
}

std::vector<Complex> apply_operator(const OrthoBasis& basis, std::span<const double> lambda_k,
                                    std::span<const Complex> v)
{
    std::vector<Complex> out(v.size());
    apply_operator(basis, lambda_k, v, out);
    return out;
}

Matrix dense_operator(const OrthoBasis& basis, std::span<const double> lambda_k)
{
    const int C = basis.channels();
    if (lambda_k.size() != std::size_t(C)) throw std::invalid_argument("dense_operator: dimension mismatch");
    Matrix m(C, C);
    for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j) {
            double s = 0.0;
            for (int l = 0; l < C; ++l) s += basis.u(i, l) * lambda_k[l] * basis.u(j, l);
            m(i, j) = s;
        }
    return m;
}

namespace {
void check_permutation(std::span<const int> sigma, int K)
{
    if (sigma.size() != std::size_t(K)) throw std::invalid_argument("reindex_gains: permutation size mismatch");
    std::vector<bool> seen(K, false);
    for (int s : sigma) {
        if (s < 0 || s >= K || seen[s]) throw std::invalid_argument("reindex_gains: not a permutation");
        seen[s] = true;
    }
}
}  // namespace

GainVectors reindex_gains(const GainVectors& table, std::span<const int> sigma)
{
    check_permutation(sigma, table.bins);
    GainVectors out = table;
    // out row sigma(i) = table row i, i.e. out_k = table_{sigma^{-1}(k)}
    for (int i = 0; i < table.bins; ++i) std::copy(table.row(i).begin(), table.row(i).end(), out.row(sigma[i]).begin());
    return out;
}

GainTable reindex_gains(const GainTable& table, std::span<const int> sigma)
{
    check_permutation(sigma, table.bins);
    GainTable out = table;
    for (int i = 0; i < table.bins; ++i)
        for (int c = 0; c < table.channels; ++c) out.at(sigma[i], c) = table.at(i, c);
    return out;
}

SkewParams UntiedParams::at(int k) const
{
    const std::size_t p = skew_size(channels);
    SkewParams s{channels, std::vector<double>(theta.begin() + std::ptrdiff_t(k * p),
                                               theta.begin() + std::ptrdiff_t((k + 1) * p))};
    return s;
}

std::size_t AxisOperatorParams::parameter_count() const noexcept
{
    return skew.theta.size() + gains.gamma.size() + phases.gamma.size() + untied.theta.size();
}

}  // namespace chasm
