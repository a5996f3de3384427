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
#include "chasm/rng.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace chasm;
using chasm::testing::random_map;

namespace {

// Direct summation along one axis, written independently of the library.
std::vector<Complex> dft_line(const std::vector<double>& x)
{
    const int n = int(x.size());
    std::vector<Complex> out(n / 2 + 1);
    for (int k = 0; k <= n / 2; ++k) {
        Complex s = 0.0;
        for (int j = 0; j < n; ++j) s += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * j / n);
        out[k] = s;
    }
    return out;
}

// Builds the conjugate-symmetric full spectrum and inverts it by summation.
std::vector<double> idft_line(const std::vector<Complex>& half, int n)
{
    std::vector<Complex> full(n);
    for (int k = 0; k < n; ++k) full[k] = k <= n / 2 ? half[k] : std::conj(half[n - k]);
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
        Complex s = 0.0;
        for (int k = 0; k < n; ++k) s += full[k] * std::polar(1.0, 2.0 * std::numbers::pi * double(k) * j / n);
        out[j] = s.real() / n;
    }
    return out;
}

std::vector<double> line_of(const FeatureMap& x, Axis a, int other, int c)
{
    std::vector<double> v(x.extent(a));
    for (int i = 0; i < int(v.size()); ++i) v[i] = a == Axis::Height ? x(i, other, c) : x(other, i, c);
    return v;
}

double max_rel_diff(const HalfSpectrum& a, const HalfSpectrum& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        num = std::max(num, std::abs(a.values()[i] - b.values()[i]));
        den = std::max(den, std::abs(b.values()[i]));
    }
    return num / std::max(den, 1e-300);
}

HalfSpectrum random_spectrum(Axis a, int n, int other, int c, Rng& rng)
{
    HalfSpectrum s(a, n, other, c);
    for (auto& z : s.values()) z = {rng.normal(), rng.normal()};
    for (int o = 0; o < other; ++o)
        for (int ch = 0; ch < c; ++ch) {
            s(0, o, ch).imag(0.0);
            if (s.has_nyquist()) s(n / 2, o, ch).imag(0.0);
        }
    return s;
}

}  // namespace

TEST(Rfft, ConstantLineHasOnlyDc)
{
    FeatureMap x(4, 1, 1, 2.5);
    const HalfSpectrum s = rfft_axis(x, Axis::Height);
    ASSERT_EQ(s.retained(), 3);
    EXPECT_NEAR(std::abs(s(0, 0, 0) - Complex(10.0, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(1, 0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(2, 0, 0)), 0.0, 1e-15);
}

TEST(Rfft, ImpulseAtZeroIsFlat)
{
    FeatureMap x(1, 4, 1);
    x(0, 0, 0) = 1.0;
    const HalfSpectrum s = rfft_axis(x, Axis::Width);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::abs(s(k, 0, 0) - Complex(1.0, 0.0)), 0.0, 1e-15);
}

TEST(Rfft, ImpulseAtOneNaive)
{
    FeatureMap x(4, 1, 1);
    x(1, 0, 0) = 1.0;
    const HalfSpectrum s = naive_dft_axis(x, Axis::Height);
    EXPECT_NEAR(std::abs(s(0, 0, 0) - Complex(1.0, 0.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(1, 0, 0) - Complex(0.0, -1.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(2, 0, 0) - Complex(-1.0, 0.0)), 0.0, 1e-15);
}

TEST(Rfft, NaiveLengthOneIsSample)
{
    FeatureMap x(1, 3, 2);
    x(0, 2, 1) = -0.75;
    const HalfSpectrum s = naive_dft_axis(x, Axis::Height);
    ASSERT_EQ(s.retained(), 1);
    EXPECT_EQ(s(0, 2, 1), Complex(-0.75, 0.0));
}

TEST(Rfft, MatchesIndependentSummationLength8)
{
    Rng rng(1);
    const FeatureMap x = random_map(8, 3, 2, rng);
    const HalfSpectrum s = rfft_axis(x, Axis::Height);
    double err = 0.0, scale = 0.0;
    for (int o = 0; o < 3; ++o)
        for (int c = 0; c < 2; ++c) {
            const auto ref = dft_line(line_of(x, Axis::Height, o, c));
            for (int k = 0; k < 5; ++k) {
                err = std::max(err, std::abs(s(k, o, c) - ref[k]));
                scale = std::max(scale, std::abs(ref[k]));
            }
        }
    EXPECT_LT(err / scale, 1e-12);
}

TEST(Rfft, MatchesNaiveOnTwentyInputs)
{
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + int(rng.below(30));
        const Axis a = t % 2 ? Axis::Width : Axis::Height;
        const FeatureMap x = a == Axis::Height ? random_map(n, 3, 2, rng) : random_map(3, n, 2, rng);
        EXPECT_LT(max_rel_diff(rfft_axis(x, a), naive_dft_axis(x, a)), 1e-12) << "n=" << n;
    }
}

TEST(Rfft, FastEqualsNaiveEverySize1To32)
{
    Rng rng(3);
    for (int n = 1; n <= 32; ++n)
        for (Axis a : {Axis::Height, Axis::Width}) {
            const FeatureMap x = a == Axis::Height ? random_map(n, 2, 3, rng) : random_map(2, n, 3, rng);
            EXPECT_LT(max_rel_diff(rfft_axis(x, a), naive_dft_axis(x, a)), 1e-12) << "n=" << n;
        }
}

TEST(Rfft, RejectsNaiveAboveCap)
{
    FeatureMap x(kNaiveDftMaxLen + 1, 1, 1);
    EXPECT_THROW(naive_dft_axis(x, Axis::Height), std::invalid_argument);
}

TEST(Irfft, RoundTrip5x7x3BothAxes)
{
    Rng rng(4);
    const FeatureMap x = random_map(5, 7, 3, rng);
    EXPECT_LT(max_abs_diff(irfft_axis(rfft_axis(x, Axis::Height), 5), x), 1e-12);
    EXPECT_LT(max_abs_diff(irfft_axis(rfft_axis(x, Axis::Width), 7), x), 1e-12);
}

TEST(Irfft, RoundTripEverySize1To33)
{
    Rng rng(5);
    for (int n = 1; n <= 33; ++n) {
        const FeatureMap x = random_map(n, 3, 2, rng);
        const FeatureMap y = random_map(3, n, 2, rng);
        EXPECT_LT(max_abs_diff(irfft_axis(rfft_axis(x, Axis::Height), n), x), 1e-12 * std::max(1.0, max_abs(x)));
        EXPECT_LT(max_abs_diff(irfft_axis(rfft_axis(y, Axis::Width), n), y), 1e-12 * std::max(1.0, max_abs(y)));
    }
}

TEST(Irfft, DcOnlyGivesOnes)
{
    HalfSpectrum s(Axis::Height, 6, 1, 1);
    s(0, 0, 0) = 6.0;
    const FeatureMap x = irfft_axis(s, 6);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(x(i, 0, 0), 1.0, 1e-15);
}

TEST(Irfft, MatchesFullSpectrumSummation)
{
    Rng rng(6);
    for (int n : {1, 2, 5, 8, 9, 16}) {
        const HalfSpectrum s = random_spectrum(Axis::Width, n, 2, 2, rng);
        const FeatureMap x = irfft_axis(s, n);
        for (int o = 0; o < 2; ++o)
            for (int c = 0; c < 2; ++c) {
                std::vector<Complex> half(s.retained());
                for (int k = 0; k < s.retained(); ++k) half[k] = s(k, o, c);
                const auto ref = idft_line(half, n);
                for (int j = 0; j < n; ++j) EXPECT_NEAR(x(o, j, c), ref[j], 1e-12);
            }
    }
}

TEST(Irfft, RejectsLengthMismatch)
{
    HalfSpectrum s(Axis::Height, 8, 1, 1);
    EXPECT_THROW(irfft_axis(s, 10), std::invalid_argument);
    // 9 also maps to 5 bins, but the spectrum records its original length 8.
    EXPECT_THROW(irfft_axis(s, 9), std::invalid_argument);
    EXPECT_NO_THROW(irfft_axis(s, 8));
}

TEST(Irfft, VerifyModeRejectsAsymmetricSpectrum)
{
    HalfSpectrum s(Axis::Height, 4, 1, 1);
    s(0, 0, 0) = {1.0, 0.5};
    set_verify_fft(true);
    EXPECT_THROW(irfft_axis(s, 4), FftResidueError);
    s(0, 0, 0) = {1.0, 0.0};
    EXPECT_NO_THROW(irfft_axis(s, 4));
    set_verify_fft(false);
}

TEST(FftProperties, Linearity)
{
    Rng rng(7);
    const FeatureMap x = random_map(9, 6, 2, rng), y = random_map(9, 6, 2, rng);
    const double a = 0.7, b = -1.3;
    for (Axis ax : {Axis::Height, Axis::Width}) {
        const HalfSpectrum lhs = rfft_axis(a * x + b * y, ax);
        const HalfSpectrum sx = rfft_axis(x, ax), sy = rfft_axis(y, ax);
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < lhs.values().size(); ++i) {
            err = std::max(err, std::abs(lhs.values()[i] - (a * sx.values()[i] + b * sy.values()[i])));
            scale = std::max(scale, std::abs(lhs.values()[i]));
        }
        EXPECT_LT(err / scale, 1e-12);
    }
}

TEST(FftProperties, Parseval)
{
    Rng rng(8);
    for (int n : {1, 4, 7, 12}) {
        const FeatureMap x = random_map(n, 5, 3, rng);
        const HalfSpectrum s = rfft_axis(x, Axis::Height);
        EXPECT_NEAR(dot(x, x), weighted_inner(s, s) / n, 1e-10 * dot(x, x));
    }
}

TEST(FftAdjoint, ForwardAndInverse)
{
    Rng rng(9);
    for (int n : {1, 2, 5, 6, 11}) {
        const FeatureMap x = random_map(n, 4, 2, rng);
        HalfSpectrum y(Axis::Height, n, 4, 2);
        for (auto& z : y.values()) z = {rng.normal(), rng.normal()};
        EXPECT_NEAR(plain_inner(rfft_axis(x, Axis::Height), y), dot(x, rfft_adjoint(y, n)), 1e-10);
        EXPECT_NEAR(dot(irfft_axis_unchecked(y, n), x), plain_inner(y, irfft_adjoint(x, Axis::Height)), 1e-10);
    }
}

TEST(Fft2, RoundTrip)
{
    Rng rng(10);
    ComplexImage img(6, 5);
    for (auto& z : img.values()) z = {rng.normal(), rng.normal()};
    ComplexImage k = img;
    fft2(k, false);
    fft2(k, true);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(std::abs(k.values()[i] / 30.0 - img.values()[i]), 0.0, 1e-13);
}
