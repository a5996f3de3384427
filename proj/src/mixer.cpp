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

#include "chasm/mixer.hpp"

#include "chasm/fft.hpp"

#include <cmath>
#include <numbers>

namespace chasm {

namespace {

constexpr std::pair<Variant, const char*> kVariantNames[] = {
    {Variant::Chasm, "Chasm"},           {Variant::IdentityBasis, "IdentityBasis"},
    {Variant::UntiedBasis, "UntiedBasis"}, {Variant::SignedGain, "SignedGain"},
    {Variant::ComplexGain, "ComplexGain"},
};

constexpr std::pair<AxisMode, const char*> kAxisModeNames[] = {
    {AxisMode::ChOnly, "ChOnly"},     {AxisMode::CwOnly, "CwOnly"},     {AxisMode::ChThenCw, "ChThenCw"},
    {AxisMode::CwThenCh, "CwThenCh"}, {AxisMode::ChPlusCw, "ChPlusCw"},
};

bool uses_shared_skew(Variant v)
{
    return v == Variant::Chasm || v == Variant::SignedGain || v == Variant::ComplexGain;
}

void validate_axis(const AxisOperatorParams& p, Variant v, Axis expected, int C, const char* name)
{
    auto fail = [&](const std::string& what) {
        throw std::invalid_argument(std::string("MixerParams.") + name + ": " + what + " (variant " +
                                    to_string(v) + ")");
    };
    if (p.axis != expected) fail("axis tag mismatch");
    if (p.gains.channels != C || p.gains.bins < 1 ||
        p.gains.gamma.size() != std::size_t(p.gains.bins) * C)
        fail("gain table shape");
    const std::size_t P = skew_size(C);
    if (uses_shared_skew(v)) {
        if (p.skew.channels != C || p.skew.theta.size() != P) fail("shared skew parameters missing or mis-sized");
    } else if (!p.skew.theta.empty()) {
        fail("unexpected shared skew parameters");
    }
    if (v == Variant::ComplexGain) {
        if (p.phases.bins != p.gains.bins || p.phases.channels != C) fail("phase table shape");
    } else if (!p.phases.gamma.empty()) {
        fail("unexpected phase table");
    }
    if (v == Variant::UntiedBasis) {
        if (p.untied.channels != C || p.untied.bins != p.gains.bins || p.untied.theta.size() != P * p.untied.bins)
            fail("untied per-bin skew parameters mis-sized");
    } else if (!p.untied.theta.empty()) {
        fail("unexpected untied parameters");
    }
}

// out = U (g .* (U^T v)), g = lam (real) or lam * e^{i phase}
inline void apply_bin(const Matrix& U, const double* lam, const double* phase, const Complex* v, Complex* out,
                      Complex* tmp, int C)
{
    const double* u = U.values().data();
    for (int j = 0; j < C; ++j) tmp[j] = {};
    for (int i = 0; i < C; ++i) {
        const Complex vi = v[i];
        const double* ui = u + std::size_t(i) * C;
        for (int j = 0; j < C; ++j) tmp[j] += ui[j] * vi;
    }
    if (phase) {
        for (int j = 0; j < C; ++j) tmp[j] *= std::polar(lam[j], phase[j]);
    } else {
        for (int j = 0; j < C; ++j) tmp[j] *= lam[j];
    }
    for (int i = 0; i < C; ++i) {
        const double* ui = u + std::size_t(i) * C;
        Complex s{};
        for (int j = 0; j < C; ++j) s += ui[j] * tmp[j];
        out[i] = s;
    }
}

}  // namespace

std::string to_string(Variant v)
{
    for (auto [k, n] : kVariantNames)
        if (k == v) return n;
    return "?";
}

std::string to_string(AxisMode m)
{
    for (auto [k, n] : kAxisModeNames)
        if (k == m) return n;
    return "?";
}

std::optional<Variant> parse_variant(std::string_view s)
{
    for (auto [k, n] : kVariantNames)
        if (s == n) return k;
    return std::nullopt;
}

std::optional<AxisMode> parse_axis_mode(std::string_view s)
{
    for (auto [k, n] : kAxisModeNames)
        if (s == n) return k;
    return std::nullopt;
}

GainMode gain_mode(Variant v) noexcept
{
    switch (v) {
    case Variant::SignedGain: return GainMode::Signed;
    case Variant::ComplexGain: return GainMode::Complex;
    default: return GainMode::Positive;
    }
}

RefineWeights RefineWeights::identity(int channels)
{
    RefineWeights w{channels, std::vector<double>(std::size_t(channels) * 9, 0.0),
                    std::vector<double>(channels, 0.0)};
    for (int c = 0; c < channels; ++c) w.kernel[std::size_t(c) * 9 + 4] = 1.0;
    return w;
}

FuseWeights FuseWeights::zeros(int channels)
{
    return {channels, std::vector<double>(std::size_t(channels) * channels, 0.0), std::vector<double>(channels, 0.0)};
}

FuseWeights FuseWeights::identity(int channels)
{
    FuseWeights w = zeros(channels);
    for (int c = 0; c < channels; ++c) w.weight[std::size_t(c) * channels + c] = 1.0;
    return w;
}

void MixerParams::validate() const
{
    const int C = refine.channels;
    if (C < 1) throw std::invalid_argument("MixerParams: channels must be >= 1");
    if (refine.kernel.size() != std::size_t(C) * 9 || refine.bias.size() != std::size_t(C))
        throw std::invalid_argument("MixerParams.refine: shape mismatch");
    if (fuse.channels != C || fuse.weight.size() != std::size_t(C) * C || fuse.bias.size() != std::size_t(C))
        throw std::invalid_argument("MixerParams.fuse: shape mismatch");
    validate_axis(ch, variant, Axis::Height, C, "ch");
    validate_axis(cw, variant, Axis::Width, C, "cw");
}

MixerParams make_mixer_params(const MixerShape& s, Variant variant, AxisMode mode)
{
    const int C = s.channels;
    if (C < 1 || s.bins_h < 1 || s.bins_w < 1) throw std::invalid_argument("make_mixer_params: invalid shape");
    MixerParams p;
    p.variant = variant;
    p.axis_mode = mode;
    const double raw = variant == Variant::SignedGain ? 1.0 : identity_gain_raw();
    auto make_axis = [&](Axis a, int table_bins, int length) {
        AxisOperatorParams ap;
        ap.axis = a;
        int bins = table_bins;
        if (variant == Variant::UntiedBasis) {
            if (length < 1) throw std::invalid_argument("make_mixer_params: untied variant needs the spatial size");
            bins = length / 2 + 1;
            ap.untied = {bins, C, std::vector<double>(std::size_t(bins) * skew_size(C), 0.0)};
        }
        ap.gains = GainTable(bins, C, raw);
        if (uses_shared_skew(variant)) ap.skew = SkewParams::zeros(C);
        else ap.skew.channels = C;
        if (variant == Variant::ComplexGain) ap.phases = GainTable(bins, C, 0.0);
        return ap;
    };
    p.ch = make_axis(Axis::Height, s.bins_h, s.height);
    p.cw = make_axis(Axis::Width, s.bins_w, s.width);
    p.refine = RefineWeights::identity(C);
    p.fuse = FuseWeights::zeros(C);
    p.validate();
    return p;
}

std::vector<ParamGroupRef> parameter_groups(MixerParams& p, const std::string& prefix)
{
    std::vector<ParamGroupRef> g;
    auto add = [&](const std::string& name, std::vector<double>& v) {
        if (!v.empty()) g.push_back({prefix + name, &v});
    };
    for (auto* ax : {&p.ch, &p.cw}) {
        const std::string a = ax == &p.ch ? "ch." : "cw.";
        add(a + "theta", ax->skew.theta);
        add(a + "untied_theta", ax->untied.theta);
        add(a + "gamma", ax->gains.gamma);
        add(a + "phase", ax->phases.gamma);
    }
    add("refine.kernel", p.refine.kernel);
    add("refine.bias", p.refine.bias);
    add("fuse.weight", p.fuse.weight);
    add("fuse.bias", p.fuse.bias);
    return g;
}

std::vector<double> interpolate_phases(const GainTable& phases, int K, int n)
{
    GainTable pre = interpolate_rows(phases, K);
    for (int c = 0; c < phases.channels; ++c) {
        pre.at(0, c) = 0.0;
        if (n % 2 == 0 && n > 1) pre.at(K - 1, c) = 0.0;
    }
    return pre.gamma;
}

AxisOperator realize(const AxisOperatorParams& p, Variant variant, int length)
{
    AxisOperator op;
    op.axis = p.axis;
    op.variant = variant;
    op.length = length;
    op.bins = length / 2 + 1;
    op.channels = p.gains.channels;
    const int C = op.channels;
    const int K = op.bins;
    if (variant == Variant::UntiedBasis) {
        if (p.untied.bins != K || p.gains.bins != K)
            throw std::invalid_argument("realize: untied tables have " + std::to_string(p.untied.bins) +
                                        " bins but the axis has " + std::to_string(K));
        for (int k = 0; k < K; ++k) {
            SkewParams sk = p.untied.at(k);
            op.skews.push_back(build_skew(sk));
            op.bases.push_back(basis_from_params(sk));
        }
    } else if (variant == Variant::IdentityBasis) {
        op.bases.push_back({Matrix::identity(C)});
    } else {
        op.skews.push_back(build_skew(p.skew));
        op.bases.push_back(basis_from_params(p.skew));
    }
    op.pre = interpolate_rows(p.gains, K);
    op.magnitude = {K, C, op.pre.gamma};
    if (variant != Variant::SignedGain)
        for (double& v : op.magnitude.lambda) v = softplus(v);
    if (variant == Variant::ComplexGain) op.phase = interpolate_phases(p.phases, K, length);
    return op;
}

FeatureMap axis_pass(const FeatureMap& x, const AxisOperator& op, Transform t, HalfSpectrum* spectrum_out)
{
    const int n = x.extent(op.axis);
    if (n != op.length || x.channels() != op.channels)
        throw std::invalid_argument("axis_pass: operator realized for a different shape");
    HalfSpectrum s = t == Transform::Fast ? rfft_axis(x, op.axis) : naive_dft_axis(x, op.axis);
    HalfSpectrum z(op.axis, n, s.other_len(), s.channels());
    const int C = op.channels;
    std::vector<Complex> tmp(C);
    for (int k = 0; k < s.retained(); ++k) {
        const Matrix& U = op.basis(k).u;
        const double* lam = op.magnitude.row(k).data();
        const double* ph = op.phase.empty() ? nullptr : op.phase.data() + std::size_t(k) * C;
        for (int o = 0; o < s.other_len(); ++o)
            apply_bin(U, lam, ph, s.line(k, o).data(), z.line(k, o).data(), tmp.data(), C);
    }
    if (spectrum_out) *spectrum_out = std::move(s);
    return t == Transform::Fast ? irfft_axis(z, n) : naive_idft_axis(z, n);
}

FeatureMap ch_plane_pass(const FeatureMap& x, const AxisOperatorParams& p, Variant variant, Transform t)
{
    if (p.axis != Axis::Height) throw std::invalid_argument("ch_plane_pass: parameters are not tagged Height");
    return axis_pass(x, realize(p, variant, x.height()), t);
}

FeatureMap cw_plane_pass(const FeatureMap& x, const AxisOperatorParams& p, Variant variant, Transform t)
{
    if (p.axis != Axis::Width) throw std::invalid_argument("cw_plane_pass: parameters are not tagged Width");
    return axis_pass(x, realize(p, variant, x.width()), t);
}

FeatureMap variant_core(const FeatureMap& x, const MixerParams& p, Variant variant, Transform t)
{
    MixerParams check = p;
    check.variant = variant;
    check.validate();
    switch (p.axis_mode) {
    case AxisMode::ChOnly: return ch_plane_pass(x, p.ch, variant, t);
    case AxisMode::CwOnly: return cw_plane_pass(x, p.cw, variant, t);
    case AxisMode::ChThenCw: return cw_plane_pass(ch_plane_pass(x, p.ch, variant, t), p.cw, variant, t);
    case AxisMode::CwThenCh: return ch_plane_pass(cw_plane_pass(x, p.cw, variant, t), p.ch, variant, t);
    case AxisMode::ChPlusCw: return ch_plane_pass(x, p.ch, variant, t) + cw_plane_pass(x, p.cw, variant, t);
    }
    throw std::logic_error("variant_core: unknown axis mode");
}

FeatureMap spectral_core(const FeatureMap& x, const MixerParams& p, Transform t)
{
    return variant_core(x, p, p.variant, t);
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) noexcept
{
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

FeatureMap depthwise_conv3x3(const FeatureMap& x, const RefineWeights& wt)
{
    const int H = x.height(), W = x.width(), C = x.channels();
    if (wt.channels != C) throw std::invalid_argument("depthwise_conv3x3: channel mismatch");
    FeatureMap out(H, W, C);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            auto o = out.at(h, w);
            for (int c = 0; c < C; ++c) o[c] = wt.bias[c];
            for (int dy = 0; dy < 3; ++dy) {
                const int hh = h + dy - 1;
                if (hh < 0 || hh >= H) continue;
                for (int dx = 0; dx < 3; ++dx) {
                    const int ww = w + dx - 1;
                    if (ww < 0 || ww >= W) continue;
                    auto in = x.at(hh, ww);
                    const double* k = wt.kernel.data() + dy * 3 + dx;
                    for (int c = 0; c < C; ++c) o[c] += k[std::size_t(c) * 9] * in[c];
                }
            }
        }
    return out;
}

FeatureMap local_refine(const FeatureMap& x, const RefineWeights& w)
{
    FeatureMap r = depthwise_conv3x3(x, w);
    for (double& v : r.values()) v = gelu(v);
    return r;
}

FeatureMap fuse(const FeatureMap& x, const FuseWeights& wt)
{
    const int C = x.channels();
    if (wt.channels != C) throw std::invalid_argument("fuse: channel mismatch");
    FeatureMap out(x.height(), x.width(), C);
    for (int h = 0; h < x.height(); ++h)
        for (int w = 0; w < x.width(); ++w) {
            auto in = x.at(h, w);
            auto o = out.at(h, w);
            for (int i = 0; i < C; ++i) {
                double s = wt.bias[i];
                const double* row = wt.weight.data() + std::size_t(i) * C;
                for (int j = 0; j < C; ++j) s += row[j] * in[j];
                o[i] = s;
            }
        }
    return out;
}

FeatureMap mixer_forward(const FeatureMap& x, const MixerParams& p, Transform t)
{
    FeatureMap y = fuse(local_refine(spectral_core(x, p, t), p.refine), p.fuse);
    y += x;
    return y;
}

}  // namespace chasm
