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

#include "chasm/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace chasm {

namespace {
void require_same(const FeatureMap& a, const FeatureMap& b)
{
    if (!a.same_shape(b)) throw std::invalid_argument("FeatureMap shape mismatch");
}
}  // namespace

FeatureMap& FeatureMap::operator+=(const FeatureMap& o)
{
    require_same(*this, o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

FeatureMap& FeatureMap::operator-=(const FeatureMap& o)
{
    require_same(*this, o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

FeatureMap& FeatureMap::operator*=(double s)
{
    for (double& v : data_) v *= s;
    return *this;
}

bool FeatureMap::all_finite() const noexcept
{
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FeatureMap operator+(FeatureMap a, const FeatureMap& b) { return a += b; }
FeatureMap operator-(FeatureMap a, const FeatureMap& b) { return a -= b; }
FeatureMap operator*(double s, FeatureMap a) { return a *= s; }

double max_abs(const FeatureMap& a)
{
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b)
{
    require_same(a, b);
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

double dot(const FeatureMap& a, const FeatureMap& b)
{
    require_same(a, b);
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    return s;
}

HalfSpectrum::HalfSpectrum(Axis axis, int original_len, int other_len, int channels)
    : axis_(axis), n_(original_len), k_(original_len / 2 + 1), other_(other_len), c_(channels)
{
    if (original_len < 1 || other_len < 1 || channels < 1)
        throw std::invalid_argument("HalfSpectrum: dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(k_) * other_ * c_, Complex{});
}

Complex inner(const ComplexImage& a, const ComplexImage& b)
{
    if (a.height() != b.height() || a.width() != b.width())
        throw std::invalid_argument("ComplexImage shape mismatch");
    Complex s{};
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += std::conj(av[i]) * bv[i];
    return s;
}

FeatureMap to_channels(const ComplexImage& img)
{
    FeatureMap x(img.height(), img.width(), 2);
    for (int h = 0; h < img.height(); ++h)
        for (int w = 0; w < img.width(); ++w) {
            x(h, w, 0) = img(h, w).real();
            x(h, w, 1) = img(h, w).imag();
        }
    return x;
}

ComplexImage from_channels(const FeatureMap& x)
{
    if (x.channels() < 2) throw std::invalid_argument("from_channels: need at least 2 channels");
    ComplexImage img(x.height(), x.width());
    for (int h = 0; h < x.height(); ++h)
        for (int w = 0; w < x.width(); ++w) img(h, w) = {x(h, w, 0), x(h, w, 1)};
    return img;
}

}  // namespace chasm
