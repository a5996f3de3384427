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

#include "chasm/mri.hpp"

#include "chasm/fft.hpp"
#include "chasm/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace chasm {

std::string to_string(MaskKind k) { return k == MaskKind::Structured ? "structured" : "random"; }

int SamplingMask::count() const noexcept
{
    return int(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

int line_budget(int lines, double acceleration)
{
    if (lines < 1) throw std::invalid_argument("line_budget: lines must be >= 1");
    if (!(acceleration >= 1.0)) throw std::invalid_argument("line_budget: acceleration must be >= 1");
    return std::clamp(int(std::lround(lines / acceleration)), 1, lines);
}

int center_block_size(int lines, double acceleration, double center_fraction)
{
    if (center_fraction < 0.0 || center_fraction > 1.0)
        throw std::invalid_argument("center_block_size: center fraction must be in [0, 1]");
    // tolerance keeps exact products (e.g. 0.25 * 64) from rounding up
    const int n = int(std::ceil(center_fraction * lines - 1e-9));
    return std::min(std::max(n, 0), line_budget(lines, acceleration));
}

int center_block_start(int lines, int size) { return lines / 2 - size / 2; }

SamplingMask make_structured_mask(int lines, double acceleration, double center_fraction, std::uint64_t)
{
    SamplingMask m;
    m.kind = MaskKind::Structured;
    m.acceleration = acceleration;
    m.center_fraction = center_fraction;
    m.selected.assign(lines, 0);
    const int budget = line_budget(lines, acceleration);
    const int nc = center_block_size(lines, acceleration, center_fraction);
    const int start = center_block_start(lines, nc);
    for (int i = start; i < start + nc; ++i) m.selected[i] = 1;
    std::vector<int> outer;
    for (int i = 0; i < lines; ++i)
        if (!m.selected[i]) outer.push_back(i);
    const int remaining = budget - nc;
    if (remaining > 0) {
        const double spacing = double(outer.size()) / remaining;
        for (int j = 0; j < remaining; ++j) m.selected[outer[std::size_t((j + 0.5) * spacing)]] = 1;
    }
    return m;
}

SamplingMask make_random_mask(int lines, double acceleration, std::uint64_t seed, bool keep_center,
                              double center_fraction)
{
    SamplingMask m;
    m.kind = MaskKind::Random;
    m.acceleration = acceleration;
    m.center_fraction = keep_center ? center_fraction : 0.0;
    m.selected.assign(lines, 0);
    const int budget = line_budget(lines, acceleration);
    int fixed = 0;
    if (keep_center) {
        fixed = center_block_size(lines, acceleration, center_fraction);
        const int start = center_block_start(lines, fixed);
        for (int i = start; i < start + fixed; ++i) m.selected[i] = 1;
    }
    std::vector<int> pool;
    for (int i = 0; i < lines; ++i)
        if (!m.selected[i]) pool.push_back(i);
    Rng rng(derive_seed(seed, 0x6d61736b));
    const int draw = budget - fixed;
    for (int j = 0; j < draw; ++j) {
        const std::size_t pick = j + std::size_t(rng.below(pool.size() - j));
        std::swap(pool[j], pool[pick]);
        m.selected[pool[j]] = 1;
    }
    return m;
}

Phantom make_phantom(int height, int width, std::uint64_t seed, int n_ellipses)
{
    if (n_ellipses < 0) throw std::invalid_argument("make_phantom: n_ellipses must be >= 0");
    Phantom ph;
    ph.image = ComplexImage(height, width);
    ph.seed = seed;
    if (n_ellipses == 0) return ph;
    Rng rng(derive_seed(seed, 0x7068616e));

    // outer body, then additive inner structures
    ph.ellipses.push_back({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.65, 0.9),
                           rng.uniform(0.65, 0.9), rng.uniform(0.0, std::numbers::pi), rng.uniform(0.6, 0.9)});
    for (int i = 1; i < n_ellipses; ++i) {
        const double r = rng.uniform(0.0, 0.55);
        const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
        ph.ellipses.push_back({r * std::cos(t), r * std::sin(t), rng.uniform(0.04, 0.35), rng.uniform(0.04, 0.35),
                               rng.uniform(0.0, std::numbers::pi), rng.uniform(-0.4, 0.4)});
    }
    const double f1 = rng.uniform(0.5, 1.5), f2 = rng.uniform(0.5, 1.5);
    const double p1 = rng.uniform(0.0, 2 * std::numbers::pi), p2 = rng.uniform(0.0, 2 * std::numbers::pi);
    const double ramp_y = rng.uniform(-0.5, 0.5), ramp_x = rng.uniform(-0.5, 0.5);

    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w) {
            const double y = 2.0 * (h + 0.5) / height - 1.0;
            const double x = 2.0 * (w + 0.5) / width - 1.0;
            double v = 0.0;
            for (const auto& e : ph.ellipses) {
                const double c = std::cos(e.angle), s = std::sin(e.angle);
                const double dx = x - e.cx, dy = y - e.cy;
                const double u = (c * dx + s * dy) / e.ax;
                const double q = (-s * dx + c * dy) / e.ay;
                if (u * u + q * q <= 1.0) v += e.intensity;
            }
            v *= 1.0 + 0.1 * std::cos(std::numbers::pi * f1 * x + p1) * std::cos(std::numbers::pi * f2 * y + p2);
            v = std::clamp(v, 0.0, 1.0);
            ph.image(h, w) = std::polar(v, std::numbers::pi * (ramp_x * x + ramp_y * y));
        }
    return ph;
}

CoilSet make_coils(int height, int width, int n_coils)
{
    if (n_coils < 1) throw std::invalid_argument("make_coils: need at least one coil");
    CoilSet cs;
    const double sigma = 0.9;
    for (int c = 0; c < n_coils; ++c) {
        const double ang = 2.0 * std::numbers::pi * c / n_coils;
        const double cx = 1.2 * std::cos(ang), cy = 1.2 * std::sin(ang);
        ComplexImage m(height, width);
        for (int h = 0; h < height; ++h)
            for (int w = 0; w < width; ++w) {
                const double y = 2.0 * (h + 0.5) / height - 1.0;
                const double x = 2.0 * (w + 0.5) / width - 1.0;
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const double mag = std::exp(-d2 / (2 * sigma * sigma));
                m(h, w) = std::polar(mag, ang + 0.5 * (x * std::cos(ang) + y * std::sin(ang)));
            }
        cs.maps.push_back(std::move(m));
    }
    for (int h = 0; h < height; ++h)
        for (int w = 0; w < width; ++w) {
            double s = 0.0;
            for (const auto& m : cs.maps) s += std::norm(m(h, w));
            const double inv = 1.0 / std::sqrt(s);
            for (auto& m : cs.maps) m(h, w) *= inv;
        }
    return cs;
}

namespace {

// out[i] = in[(i + shift) mod n] along both axes
ComplexImage roll(const ComplexImage& in, int sh, int sw)
{
    const int H = in.height(), W = in.width();
    ComplexImage out(H, W);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) out(h, w) = in((h + sh) % H, (w + sw) % W);
    return out;
}

ComplexImage fftshift(const ComplexImage& x) { return roll(x, (x.height() + 1) / 2, (x.width() + 1) / 2); }
ComplexImage ifftshift(const ComplexImage& x) { return roll(x, x.height() / 2, x.width() / 2); }

void check_mask(const ComplexImage& img, const SamplingMask& mask)
{
    if (mask.lines() != img.height())
        throw std::invalid_argument("mask has " + std::to_string(mask.lines()) + " lines but k-space has " +
                                    std::to_string(img.height()) + " rows");
}

void check_coils(const ComplexImage& x, const CoilSet& coils)
{
    for (const auto& m : coils.maps)
        if (m.height() != x.height() || m.width() != x.width())
            throw std::invalid_argument("coil map shape does not match image");
}

}  // namespace

ComplexImage centered_fft2(const ComplexImage& x)
{
    ComplexImage k = ifftshift(x);
    fft2(k, false);
    k = fftshift(k);
    const double s = 1.0 / std::sqrt(double(x.height()) * x.width());
    for (auto& v : k.values()) v *= s;
    return k;
}

ComplexImage centered_ifft2(const ComplexImage& k)
{
    ComplexImage x = ifftshift(k);
    fft2(x, true);
    x = fftshift(x);
    const double s = 1.0 / std::sqrt(double(k.height()) * k.width());
    for (auto& v : x.values()) v *= s;
    return x;
}

void apply_mask(ComplexImage& kspace, const SamplingMask& mask)
{
    check_mask(kspace, mask);
    for (int h = 0; h < kspace.height(); ++h)
        if (!mask.selected[h])
            for (int w = 0; w < kspace.width(); ++w) kspace(h, w) = {};
}

ComplexImage forward_single(const ComplexImage& x, const SamplingMask& mask)
{
    ComplexImage k = centered_fft2(x);
    apply_mask(k, mask);
    return k;
}

ComplexImage adjoint_single(const ComplexImage& y, const SamplingMask& mask)
{
    ComplexImage k = y;
    apply_mask(k, mask);
    return centered_ifft2(k);
}

ComplexImage normal_single(const ComplexImage& x, const SamplingMask& mask)
{
    return adjoint_single(forward_single(x, mask), mask);
}

std::vector<ComplexImage> forward_multi(const ComplexImage& x, const SamplingMask& mask, const CoilSet& coils)
{
    check_coils(x, coils);
    std::vector<ComplexImage> out;
    for (const auto& s : coils.maps) {
        ComplexImage sx(x.height(), x.width());
        for (std::size_t i = 0; i < sx.size(); ++i) sx.values()[i] = s.values()[i] * x.values()[i];
        out.push_back(forward_single(sx, mask));
    }
    return out;
}

ComplexImage adjoint_multi(std::span<const ComplexImage> y, const SamplingMask& mask, const CoilSet& coils)
{
    if (y.size() != coils.maps.size()) throw std::invalid_argument("adjoint_multi: coil count mismatch");
    if (y.empty()) throw std::invalid_argument("adjoint_multi: no coils");
    ComplexImage acc(y[0].height(), y[0].width());
    for (std::size_t c = 0; c < y.size(); ++c) {
        const ComplexImage a = adjoint_single(y[c], mask);
        const auto& s = coils.maps[c];
        for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += std::conj(s.values()[i]) * a.values()[i];
    }
    return acc;
}

ComplexImage normal_multi(const ComplexImage& x, const SamplingMask& mask, const CoilSet& coils)
{
    const auto y = forward_multi(x, mask, coils);
    return adjoint_multi(y, mask, coils);
}

ComplexImage zero_filled_recon(const ComplexImage& kspace, const SamplingMask& mask)
{
    return adjoint_single(kspace, mask);
}

FeatureMap magnitude(const ComplexImage& x)
{
    FeatureMap m(x.height(), x.width(), 1);
    for (int h = 0; h < x.height(); ++h)
        for (int w = 0; w < x.width(); ++w) m(h, w, 0) = std::abs(x(h, w));
    return m;
}

namespace {

void put_le(std::ostream& os, double v)
{
    std::uint64_t u;
    std::memcpy(&u, &v, sizeof u);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((u >> (8 * i)) & 0xff);
    os.write(b, 8);
}

double get_le(const unsigned char* b)
{
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, sizeof v);
    return v;
}

}  // namespace

void write_dump(const std::filesystem::path& path, const DumpHeader& hd, std::span<const double> payload)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_dump: cannot open " + path.string());
    os << "CHASMDUMP 1\n";
    os << "kind " << hd.kind << "\n";
    os << "dtype " << hd.dtype << "\n";
    os << "dims";
    for (int d : hd.dims) os << ' ' << d;
    os << "\n";
    os << "seed " << hd.seed << "\n";
    for (const auto& [k, v] : hd.extra) os << k << ' ' << v << "\n";
    os << "byte_order little\n";
    os << "end\n";
    for (double v : payload) put_le(os, v);
    if (!os) throw std::runtime_error("write_dump: write failed for " + path.string());
}

std::vector<double> read_dump(const std::filesystem::path& path, DumpHeader& hd)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_dump: cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    if (line != "CHASMDUMP 1") throw std::runtime_error("read_dump: bad magic in " + path.string());
    hd = {};
    while (std::getline(is, line) && line != "end") {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kind") ls >> hd.kind;
        else if (key == "dtype") ls >> hd.dtype;
        else if (key == "seed") ls >> hd.seed;
        else if (key == "dims") {
            int d;
            while (ls >> d) hd.dims.push_back(d);
        } else if (key == "byte_order") {
            std::string bo;
            ls >> bo;
            if (bo != "little") throw std::runtime_error("read_dump: unsupported byte order " + bo);
        } else {
            std::string rest;
            std::getline(ls >> std::ws, rest);
            hd.extra.emplace_back(key, rest);
        }
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() % 8 != 0) throw std::runtime_error("read_dump: truncated payload");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_le(bytes.data() + 8 * i);
    return out;
}

void dump_phantom(const std::filesystem::path& path, const Phantom& p)
{
    std::vector<double> payload;
    payload.reserve(p.image.size() * 2);
    for (const Complex& v : p.image.values()) {
        payload.push_back(v.real());
        payload.push_back(v.imag());
    }
    DumpHeader hd{"phantom", "complex128", {p.image.height(), p.image.width()}, p.seed,
                  {{"ellipses", std::to_string(p.ellipses.size())}}};
    write_dump(path, hd, payload);
}

void dump_mask(const std::filesystem::path& path, const SamplingMask& m, std::uint64_t seed)
{
    std::vector<double> payload(m.selected.begin(), m.selected.end());
    std::ostringstream r;
    r << m.acceleration;
    std::ostringstream cf;
    cf << m.center_fraction;
    DumpHeader hd{"mask", "float64", {m.lines()}, seed,
                  {{"mask_kind", to_string(m.kind)}, {"acceleration", r.str()}, {"center_fraction", cf.str()}}};
    write_dump(path, hd, payload);
}

}  // namespace chasm
