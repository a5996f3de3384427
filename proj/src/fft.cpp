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

#include "chasm/fft.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

namespace chasm {

namespace {

std::atomic<bool> g_verify_fft{false};
std::atomic<double> g_max_residue{0.0};

void note_residue(double r) noexcept
{
    double cur = g_max_residue.load();
    while (r > cur && !g_max_residue.compare_exchange_weak(cur, r)) {
    }
}

std::vector<int> prime_factors(int n)
{
    std::vector<int> f;
    for (int p = 2; p * p <= n; ++p)
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    if (n > 1) f.push_back(n);
    return f;
}

// Packs the transformed axis as the outer (block) index so FftPlan can run
// over all other coordinates at once. For Height: blocks of W*C; for Width:
// one transform per row, blocks of C.
struct AxisLayout {
    int n;          // transform length
    int rows;       // independent batches (1 for Height, H for Width)
    std::size_t inner;
};

AxisLayout layout_for(Axis axis, int h, int w, int c)
{
    if (axis == Axis::Height) return {h, 1, std::size_t(w) * c};
    return {w, h, std::size_t(c)};
}

void check_target(const HalfSpectrum& s, int target_len)
{
    if (target_len < 1 || target_len / 2 + 1 != s.retained() || target_len != s.original_len())
        throw std::invalid_argument("irfft: target length " + std::to_string(target_len) +
                                    " inconsistent with " + std::to_string(s.retained()) +
                                    " retained bins");
}

FeatureMap make_output(const HalfSpectrum& s, int target_len)
{
    if (s.axis() == Axis::Height) return FeatureMap(target_len, s.other_len(), s.channels());
    return FeatureMap(s.other_len(), target_len, s.channels());
}

// Full complex inverse of a half spectrum; returns real part in out and the
// relative imaginary residue.
double inverse_into(const HalfSpectrum& s, int n, FeatureMap& out)
{
    const int K = s.retained();
    const int rows = s.axis() == Axis::Height ? 1 : s.other_len();
    const std::size_t inner = s.axis() == Axis::Height ? std::size_t(s.other_len()) * s.channels()
                                                       : std::size_t(s.channels());
    FftPlan plan(n);
    std::vector<Complex> buf(std::size_t(n) * inner);
    auto src = s.values();
    auto dst = out.values();
    double max_re = 0.0, max_im = 0.0;
    for (int r = 0; r < rows; ++r) {
        const Complex* base = src.data() + std::size_t(r) * K * inner;
        for (int k = 0; k < n; ++k) {
            Complex* b = buf.data() + std::size_t(k) * inner;
            if (k < K) {
                std::copy_n(base + std::size_t(k) * inner, inner, b);
            } else {
                const Complex* m = base + std::size_t(n - k) * inner;
                for (std::size_t i = 0; i < inner; ++i) b[i] = std::conj(m[i]);
            }
        }
        plan.transform(buf, inner, true);
        const double scale = 1.0 / n;
        double* o = dst.data() + std::size_t(r) * n * inner;
        for (std::size_t i = 0; i < buf.size(); ++i) {
            o[i] = buf[i].real() * scale;
            max_re = std::max(max_re, std::abs(o[i]));
            max_im = std::max(max_im, std::abs(buf[i].imag() * scale));
        }
    }
    return max_im / std::max(max_re, 1e-300);
}

}  // namespace

void set_verify_fft(bool on) noexcept { g_verify_fft.store(on); }
bool verify_fft_enabled() noexcept { return g_verify_fft.load(); }
double take_max_fft_residue() noexcept { return g_max_residue.exchange(0.0); }

FftPlan::FftPlan(int n) : n_(n)
{
    if (n < 1) throw std::invalid_argument("FftPlan: length must be >= 1");
    factors_ = prime_factors(n);
    twiddle_.resize(n);
    for (int j = 0; j < n; ++j) {
        const double ang = -2.0 * std::numbers::pi * j / n;
        twiddle_[j] = {std::cos(ang), std::sin(ang)};
    }
}

void FftPlan::transform(std::span<Complex> data, std::size_t inner, bool inverse) const
{
    if (data.size() != std::size_t(n_) * inner)
        throw std::invalid_argument("FftPlan::transform: buffer size mismatch");
    if (n_ == 1) return;
    std::vector<Complex> in(data.begin(), data.end());
    int maxp = *std::max_element(factors_.begin(), factors_.end());
    std::vector<Complex> tmp(std::size_t(maxp) * inner);
    recurse(in.data(), 1, data.data(), n_, 1, inner, 0, inverse, tmp.data());
}

// Decimation in time: split the length-len sequence (stride in_stride blocks)
// into p interleaved subsequences of length len/p, transform each into a
// contiguous slot of out, then combine with p-point butterflies.
void FftPlan::recurse(const Complex* in, std::size_t in_stride, Complex* out, int len, int tw_step,
                      std::size_t inner, int factor_idx, bool inverse, Complex* tmp) const
{
    if (len == 1) {
        std::copy_n(in, inner, out);
        return;
    }
    const int p = factors_[factor_idx];
    const int m = len / p;
    for (int r = 0; r < p; ++r)
        recurse(in + std::size_t(r) * in_stride * inner, in_stride * p, out + std::size_t(r) * m * inner,
                m, tw_step * p, inner, factor_idx + 1, inverse, tmp);

    auto tw = [&](long e) {
        Complex t = twiddle_[(e * tw_step) % n_];
        return inverse ? std::conj(t) : t;
    };

    if (p == 2) {
        for (int k = 0; k < m; ++k) {
            const Complex w = tw(k);
            Complex* a = out + std::size_t(k) * inner;
            Complex* b = out + std::size_t(k + m) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
                const Complex t = w * b[i];
                b[i] = a[i] - t;
                a[i] += t;
            }
        }
        return;
    }

    for (int k = 0; k < m; ++k) {
        for (int q = 0; q < p; ++q) {
            Complex* acc = tmp + std::size_t(q) * inner;
            std::fill_n(acc, inner, Complex{});
            const long idx = k + long(q) * m;
            for (int r = 0; r < p; ++r) {
                const Complex w = tw(long(r) * idx % len);
                const Complex* src = out + (std::size_t(r) * m + k) * inner;
                for (std::size_t i = 0; i < inner; ++i) acc[i] += w * src[i];
            }
        }
        for (int q = 0; q < p; ++q)
            std::copy_n(tmp + std::size_t(q) * inner, inner, out + (std::size_t(q) * m + k) * inner);
    }
}

HalfSpectrum rfft_axis(const FeatureMap& x, Axis axis)
{
    if (x.empty()) throw std::invalid_argument("rfft_axis: empty input");
    const AxisLayout L = layout_for(axis, x.height(), x.width(), x.channels());
    const int other = axis == Axis::Height ? x.width() : x.height();
    HalfSpectrum s(axis, L.n, other, x.channels());
    const int K = s.retained();
    FftPlan plan(L.n);
    std::vector<Complex> buf(std::size_t(L.n) * L.inner);
    auto src = x.values();
    auto dst = s.values();
    for (int r = 0; r < L.rows; ++r) {
        const double* base = src.data() + std::size_t(r) * L.n * L.inner;
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {base[i], 0.0};
        plan.transform(buf, L.inner, false);
        std::copy_n(buf.data(), std::size_t(K) * L.inner, dst.data() + std::size_t(r) * K * L.inner);
    }
    return s;
}

FeatureMap irfft_axis(const HalfSpectrum& s, int target_len)
{
    check_target(s, target_len);
    FeatureMap out = make_output(s, target_len);
    const double residue = inverse_into(s, target_len, out);
    if (verify_fft_enabled()) note_residue(residue);
    if (verify_fft_enabled() && residue > kResidueTolerance)
        throw FftResidueError("irfft_axis: imaginary residue " + std::to_string(residue) +
                              " exceeds tolerance; half spectrum is not conjugate-symmetric");
    return out;
}

FeatureMap irfft_axis_unchecked(const HalfSpectrum& s, int target_len)
{
    check_target(s, target_len);
    FeatureMap out = make_output(s, target_len);
    inverse_into(s, target_len, out);
    return out;
}

double irfft_residue(const HalfSpectrum& s)
{
    FeatureMap out = make_output(s, s.original_len());
    return inverse_into(s, s.original_len(), out);
}

HalfSpectrum naive_dft_axis(const FeatureMap& x, Axis axis)
{
    const int n = x.extent(axis);
    if (n > kNaiveDftMaxLen)
        throw std::invalid_argument("naive_dft_axis: axis length " + std::to_string(n) + " exceeds cap " +
                                    std::to_string(kNaiveDftMaxLen));
    const int other = axis == Axis::Height ? x.width() : x.height();
    HalfSpectrum s(axis, n, other, x.channels());
    for (int k = 0; k < s.retained(); ++k)
        for (int o = 0; o < other; ++o)
            for (int c = 0; c < x.channels(); ++c) {
                Complex acc{};
                for (int t = 0; t < n; ++t) {
                    const double v = axis == Axis::Height ? x(t, o, c) : x(o, t, c);
                    const double ang = -2.0 * std::numbers::pi * double((long(k) * t) % n) / n;
                    acc += v * Complex(std::cos(ang), std::sin(ang));
                }
                s(k, o, c) = acc;
            }
    return s;
}

FeatureMap naive_idft_axis(const HalfSpectrum& s, int target_len)
{
    check_target(s, target_len);
    const int n = target_len;
    if (n > kNaiveDftMaxLen) throw std::invalid_argument("naive_idft_axis: axis length exceeds cap");
    FeatureMap out = make_output(s, n);
    const int K = s.retained();
    std::vector<Complex> full(n);
    for (int o = 0; o < s.other_len(); ++o)
        for (int c = 0; c < s.channels(); ++c) {
            for (int k = 0; k < n; ++k) full[k] = k < K ? s(k, o, c) : std::conj(s(n - k, o, c));
            for (int t = 0; t < n; ++t) {
                Complex acc{};
                for (int k = 0; k < n; ++k) {
                    const double ang = 2.0 * std::numbers::pi * double((long(k) * t) % n) / n;
                    acc += full[k] * Complex(std::cos(ang), std::sin(ang));
                }
                const double v = acc.real() / n;
                if (s.axis() == Axis::Height)
                    out(t, o, c) = v;
                else
                    out(o, t, c) = v;
            }
        }
    return out;
}

FeatureMap rfft_adjoint(const HalfSpectrum& y, int target_len)
{
    HalfSpectrum scaled = y;
    const int n = target_len;
    for (int k = 0; k < y.retained(); ++k) {
        const double f = double(n) / bin_multiplicity(k, n);
        for (int o = 0; o < y.other_len(); ++o)
            for (auto& v : scaled.line(k, o)) v *= f;
    }
    return irfft_axis_unchecked(scaled, n);
}

HalfSpectrum irfft_adjoint(const FeatureMap& g, Axis axis)
{
    HalfSpectrum s = rfft_axis(g, axis);
    const int n = s.original_len();
    for (int k = 0; k < s.retained(); ++k) {
        const double f = double(bin_multiplicity(k, n)) / n;
        for (int o = 0; o < s.other_len(); ++o)
            for (auto& v : s.line(k, o)) v *= f;
    }
    return s;
}

double weighted_inner(const HalfSpectrum& a, const HalfSpectrum& b)
{
    if (a.retained() != b.retained() || a.other_len() != b.other_len() || a.channels() != b.channels())
        throw std::invalid_argument("weighted_inner: shape mismatch");
    double s = 0.0;
    for (int k = 0; k < a.retained(); ++k) {
        const int m = bin_multiplicity(k, a.original_len());
        for (int o = 0; o < a.other_len(); ++o) {
            auto la = a.line(k, o);
            auto lb = b.line(k, o);
            for (std::size_t c = 0; c < la.size(); ++c) s += m * (std::conj(la[c]) * lb[c]).real();
        }
    }
    return s;
}

double plain_inner(const HalfSpectrum& a, const HalfSpectrum& b)
{
    if (a.values().size() != b.values().size()) throw std::invalid_argument("plain_inner: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) s += (std::conj(a.values()[i]) * b.values()[i]).real();
    return s;
}

void fft2(ComplexImage& img, bool inverse)
{
    const int H = img.height(), W = img.width();
    // columns: blocks of W values, transform along H
    FftPlan ph(H);
    ph.transform(img.values(), std::size_t(W), inverse);
    FftPlan pw(W);
    for (int h = 0; h < H; ++h) pw.transform(img.values().subspan(std::size_t(h) * W, W), 1, inverse);
}

}  // namespace chasm
