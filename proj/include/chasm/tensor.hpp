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

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chasm {

using Complex = std::complex<double>;

enum class Axis { Height, Width };

inline const char* to_string(Axis a) { return a == Axis::Height ? "Height" : "Width"; }

/// Real H x W x C tensor, channel-fastest so that the C coefficients of one
/// spatial position are contiguous.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int height, int width, int channels, double fill = 0.0)
        : h_(height), w_(width), c_(channels)
    {
        if (height < 1 || width < 1 || channels < 1)
            throw std::invalid_argument("FeatureMap: dimensions must be >= 1, got " +
                                        std::to_string(height) + "x" + std::to_string(width) +
                                        "x" + std::to_string(channels));
        data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
    }

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels() const noexcept { return c_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    int extent(Axis a) const noexcept { return a == Axis::Height ? h_ : w_; }

    double& operator()(int h, int w, int c) noexcept { return data_[index(h, w, c)]; }
    double operator()(int h, int w, int c) const noexcept { return data_[index(h, w, c)]; }

    std::size_t index(int h, int w, int c) const noexcept
    {
        return (static_cast<std::size_t>(h) * w_ + w) * c_ + c;
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& raw() noexcept { return data_; }
    const std::vector<double>& raw() const noexcept { return data_; }

    /// Channel vector at one spatial position.
    std::span<double> at(int h, int w) noexcept { return {data_.data() + index(h, w, 0), std::size_t(c_)}; }
    std::span<const double> at(int h, int w) const noexcept
    {
        return {data_.data() + index(h, w, 0), std::size_t(c_)};
    }

    bool same_shape(const FeatureMap& o) const noexcept
    {
        return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
    }

    FeatureMap& operator+=(const FeatureMap& o);
    FeatureMap& operator-=(const FeatureMap& o);
    FeatureMap& operator*=(double s);

    bool all_finite() const noexcept;

private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

FeatureMap operator+(FeatureMap a, const FeatureMap& b);
FeatureMap operator-(FeatureMap a, const FeatureMap& b);
FeatureMap operator*(double s, FeatureMap a);

double max_abs(const FeatureMap& a);
double max_abs_diff(const FeatureMap& a, const FeatureMap& b);
double dot(const FeatureMap& a, const FeatureMap& b);

/// Complex half-spectrum along one axis. For Axis::Height the layout is
/// K x W x C; for Axis::Width it is H x K x C. K = floor(n/2) + 1.
class HalfSpectrum {
public:
    HalfSpectrum() = default;
    HalfSpectrum(Axis axis, int original_len, int other_len, int channels);

    Axis axis() const noexcept { return axis_; }
    int original_len() const noexcept { return n_; }
    int retained() const noexcept { return k_; }
    int other_len() const noexcept { return other_; }
    int channels() const noexcept { return c_; }
    bool has_nyquist() const noexcept { return n_ % 2 == 0 && n_ > 1; }

    /// Element at frequency bin k, position along the other spatial axis, channel c.
    Complex& operator()(int k, int other, int c) noexcept { return data_[index(k, other, c)]; }
    Complex operator()(int k, int other, int c) const noexcept { return data_[index(k, other, c)]; }

    std::size_t index(int k, int other, int c) const noexcept
    {
        if (axis_ == Axis::Height)
            return (static_cast<std::size_t>(k) * other_ + other) * c_ + c;
        return (static_cast<std::size_t>(other) * k_ + k) * c_ + c;
    }

    /// Coefficient vector (length C) for one (bin, other) pair.
    std::span<Complex> line(int k, int other) noexcept
    {
        return {data_.data() + index(k, other, 0), std::size_t(c_)};
    }
    std::span<const Complex> line(int k, int other) const noexcept
    {
        return {data_.data() + index(k, other, 0), std::size_t(c_)};
    }

    std::span<Complex> values() noexcept { return data_; }
    std::span<const Complex> values() const noexcept { return data_; }

private:
    Axis axis_ = Axis::Height;
    int n_ = 0, k_ = 0, other_ = 0, c_ = 0;
    std::vector<Complex> data_;
};

/// Complex 2D image (H x W), row-major.
class ComplexImage {
public:
    ComplexImage() = default;
    ComplexImage(int height, int width, Complex fill = {})
        : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width, fill)
    {
        if (height < 1 || width < 1) throw std::invalid_argument("ComplexImage: dimensions must be >= 1");
    }
    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    std::size_t size() const noexcept { return data_.size(); }
    Complex& operator()(int h, int w) noexcept { return data_[std::size_t(h) * w_ + w]; }
    Complex operator()(int h, int w) const noexcept { return data_[std::size_t(h) * w_ + w]; }
    std::span<Complex> values() noexcept { return data_; }
    std::span<const Complex> values() const noexcept { return data_; }
    std::vector<Complex>& raw() noexcept { return data_; }
    const std::vector<Complex>& raw() const noexcept { return data_; }

private:
    int h_ = 0, w_ = 0;
    std::vector<Complex> data_;
};

/// <a, b> = sum conj(a_i) b_i
Complex inner(const ComplexImage& a, const ComplexImage& b);

/// Stacks real and imaginary parts into a 2-channel FeatureMap.
FeatureMap to_channels(const ComplexImage& img);
/// Inverse of to_channels; expects at least 2 channels (uses channels 0 and 1).
ComplexImage from_channels(const FeatureMap& x);

}  // namespace chasm
