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

#include "chasm/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace chasm {

PointwiseMap::PointwiseMap(int in_channels, int out_channels)
    : in(in_channels), out(out_channels), weight(std::size_t(in_channels) * out_channels, 0.0),
      bias(out_channels, 0.0)
{
}

FeatureMap PointwiseMap::apply(const FeatureMap& x) const
{
    if (x.channels() != in) throw std::invalid_argument("PointwiseMap: channel mismatch");
    FeatureMap y(x.height(), x.width(), out);
    for (int h = 0; h < x.height(); ++h)
        for (int w = 0; w < x.width(); ++w) {
            auto xi = x.at(h, w);
            auto yo = y.at(h, w);
            for (int o = 0; o < out; ++o) {
                double s = bias[o];
                const double* wr = weight.data() + std::size_t(o) * in;
                for (int i = 0; i < in; ++i) s += wr[i] * xi[i];
                yo[o] = s;
            }
        }
    return y;
}

FeatureMap PointwiseMap::backward(const FeatureMap& x, const FeatureMap& gy, PointwiseMap& g) const
{
    FeatureMap gx(x.height(), x.width(), in);
    for (int h = 0; h < x.height(); ++h)
        for (int w = 0; w < x.width(); ++w) {
            auto xi = x.at(h, w);
            auto go = gy.at(h, w);
            auto gi = gx.at(h, w);
            for (int o = 0; o < out; ++o) {
                const double gv = go[o];
                g.bias[o] += gv;
                const double* wr = weight.data() + std::size_t(o) * in;
                double* gw = g.weight.data() + std::size_t(o) * in;
                for (int i = 0; i < in; ++i) {
                    gw[i] += gv * xi[i];
                    gi[i] += wr[i] * gv;
                }
            }
        }
    return gx;
}

ToyModel build_toy_model(const ToyModelShape& s, std::uint64_t seed, double lift_noise)
{
    if (s.channels < 2) throw std::invalid_argument("build_toy_model: need at least 2 channels");
    if (s.blocks < 1) throw std::invalid_argument("build_toy_model: need at least one block");
    const int C = s.channels;
    ToyModel m;
    m.lift = PointwiseMap(2, C);
    m.head = PointwiseMap(C, 2);
    m.lift.weight[0 * 2 + 0] = 1.0;
    m.lift.weight[1 * 2 + 1] = 1.0;
    m.head.weight[0 * C + 0] = 1.0;
    m.head.weight[1 * C + 1] = 1.0;
    Rng rng(derive_seed(seed, 0x11f7));
    for (int o = 2; o < C; ++o)
        for (int i = 0; i < 2; ++i) m.lift.weight[std::size_t(o) * 2 + i] = lift_noise * rng.normal();
    const MixerShape ms{s.height, s.width, C, s.bins_h, s.bins_w};
    for (int b = 0; b < s.blocks; ++b) m.blocks.push_back(make_mixer_params(ms, s.variant, s.axis_mode));
    return m;
}

std::vector<ParamGroupRef> model_parameters(ToyModel& m)
{
    std::vector<ParamGroupRef> g;
    g.push_back({"lift.weight", &m.lift.weight});
    g.push_back({"lift.bias", &m.lift.bias});
    for (std::size_t b = 0; b < m.blocks.size(); ++b)
        for (auto& r : parameter_groups(m.blocks[b], "block" + std::to_string(b) + ".")) g.push_back(r);
    g.push_back({"head.weight", &m.head.weight});
    g.push_back({"head.bias", &m.head.bias});
    return g;
}

std::size_t parameter_count(const ToyModel& m)
{
    std::size_t n = m.lift.weight.size() + m.lift.bias.size() + m.head.weight.size() + m.head.bias.size();
    for (const auto& b : m.blocks) n += b.parameter_count();
    return n;
}

std::size_t expected_parameter_count(const ToyModelShape& s)
{
    const std::size_t C = s.channels;
    const std::size_t P = C * (C - 1) / 2;
    auto axis = [&](std::size_t B, std::size_t n) -> std::size_t {
        switch (s.variant) {
        case Variant::Chasm:
        case Variant::SignedGain: return P + B * C;
        case Variant::IdentityBasis: return B * C;
        case Variant::ComplexGain: return P + 2 * B * C;
        case Variant::UntiedBasis: return (n / 2 + 1) * (P + C);
        }
        return 0;
    };
    const std::size_t core = axis(s.bins_h, s.height) + axis(s.bins_w, s.width);
    const std::size_t wrapper = 10 * C + C * C + C;
    return s.blocks * (core + wrapper) + 3 * C + 2 * C + 2;
}

ToyModel zeros_like(const ToyModel& m)
{
    ToyModel z = m;
    for (auto& g : model_parameters(z)) std::fill(g.values->begin(), g.values->end(), 0.0);
    return z;
}

FeatureMap model_forward(const ToyModel& m, const FeatureMap& x)
{
    FeatureMap f = m.lift.apply(x);
    for (const auto& b : m.blocks) f = mixer_forward(f, b);
    return m.head.apply(f);
}

FeatureMap model_forward_traced(const ToyModel& m, const FeatureMap& x, ModelTrace& t)
{
    t.input = x;
    t.block_inputs.clear();
    t.blocks.assign(m.blocks.size(), {});
    FeatureMap f = m.lift.apply(x);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        t.block_inputs.push_back(f);
        f = mixer_forward_traced(f, m.blocks[b], t.blocks[b]);
    }
    t.features = f;
    return m.head.apply(f);
}

FeatureMap model_backward(const ModelTrace& t, const ToyModel& m, const FeatureMap& gy, ToyModel& grads,
                          const GradOptions& opt)
{
    if (grads.blocks.size() != m.blocks.size()) throw std::invalid_argument("model_backward: gradient layout mismatch");
    FeatureMap g = m.head.backward(t.features, gy, grads.head);
    for (std::size_t b = m.blocks.size(); b-- > 0;) g = mixer_backward(t.blocks[b], m.blocks[b], g, grads.blocks[b], opt);
    return m.lift.backward(t.input, g, grads.lift);
}

void randomize(MixerParams& p, Rng& rng, double scale)
{
    for (auto& g : parameter_groups(p)) {
        const bool is_theta = g.name.find("theta") != std::string::npos;
        const bool is_gain = g.name.find("gamma") != std::string::npos;
        const bool is_center = g.name == "refine.kernel";
        const bool is_fuse = g.name == "fuse.weight";
        for (std::size_t i = 0; i < g.values->size(); ++i) {
            double& v = (*g.values)[i];
            if (is_theta) v = scale * rng.normal();
            else if (is_gain) v += scale * rng.normal();
            else if (is_center) v = (i % 9 == 4 ? 1.0 : 0.0) + scale * rng.normal();
            else if (is_fuse) v = scale / std::sqrt(double(p.channels())) * rng.normal();
            else v = scale * rng.normal();
        }
    }
}

void randomize(ToyModel& m, Rng& rng, double scale)
{
    for (auto* pw : {&m.lift, &m.head}) {
        const double s = scale / std::sqrt(double(pw->in));
        for (double& v : pw->weight) v += s * rng.normal();
        for (double& v : pw->bias) v = s * rng.normal();
    }
    for (auto& b : m.blocks) randomize(b, rng, scale);
}

GradCheckReport grad_check(ToyModel& m, const FeatureMap& x, const FeatureMap& target, LossKind loss,
                           double tolerance, const GradOptions& opt, double step)
{
    ModelTrace t;
    FeatureMap gy;
    magnitude_loss(loss, model_forward_traced(m, x, t), target, &gy);
    ToyModel grads = zeros_like(m);
    model_backward(t, m, gy, grads, opt);

    auto params = model_parameters(m);
    std::vector<std::vector<double>> analytic;
    for (auto& g : model_parameters(grads)) analytic.push_back(*g.values);
    return finite_difference_check(
        params, analytic, [&] { return magnitude_loss(loss, model_forward(m, x), target, nullptr); }, step, tolerance);
}

std::uint64_t parameter_hash(const std::vector<ParamGroupRef>& groups)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& g : groups) {
        mix(g.name.data(), g.name.size());
        for (double v : *g.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            for (int k = 0; k < 8; ++k) {
                const unsigned char c = static_cast<unsigned char>(bits >> (8 * k));
                mix(&c, 1);
            }
        }
    }
    return h;
}

}  // namespace chasm
