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

#include "chasm/grad.hpp"

#include "chasm/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace chasm {

namespace {

struct AxisGrad {
    std::vector<Matrix> g_u;  // one per basis in the operator
    std::vector<double> g_mag;  // K x C
    std::vector<double> g_phase;  // K x C (complex variant)
};

// Backward of one axis pass. x_spec is the recorded input spectrum.
FeatureMap axis_pass_backward(const FeatureMap& gz, const AxisOperator& op, const HalfSpectrum& x_spec,
                              AxisGrad& ag)
{
    const int C = op.channels;
    const int K = op.bins;
    const int n = op.length;
    const bool complex_gain = !op.phase.empty();
    const bool fixed_basis = op.variant == Variant::IdentityBasis;

    ag.g_u.assign(op.bases.size(), Matrix(C, C));
    ag.g_mag.assign(std::size_t(K) * C, 0.0);
    ag.g_phase.assign(complex_gain ? std::size_t(K) * C : 0, 0.0);

    const HalfSpectrum gZ = irfft_adjoint(gz, op.axis);
    HalfSpectrum gX(op.axis, n, x_spec.other_len(), C);

    std::vector<Complex> y(C), gain(C), p(C), gp(C), gy(C);
    for (int k = 0; k < K; ++k) {
        const Matrix& Um = op.basis(k).u;
        const double* u = Um.values().data();
        double* gu = ag.g_u[op.bases.size() == 1 ? 0 : k].values().data();
        const double* lam = op.magnitude.row(k).data();
        for (int j = 0; j < C; ++j)
            gain[j] = complex_gain ? std::polar(lam[j], op.phase[std::size_t(k) * C + j]) : Complex(lam[j], 0.0);
        double* gmag = ag.g_mag.data() + std::size_t(k) * C;
        double* gph = complex_gain ? ag.g_phase.data() + std::size_t(k) * C : nullptr;

        for (int o = 0; o < x_spec.other_len(); ++o) {
            const Complex* X = x_spec.line(k, o).data();
            const Complex* GZ = gZ.line(k, o).data();
            Complex* GX = gX.line(k, o).data();
            // forward recompute: y = U^T X, p = gain .* y
            for (int j = 0; j < C; ++j) y[j] = {};
            for (int i = 0; i < C; ++i)
                for (int j = 0; j < C; ++j) y[j] += u[i * C + j] * X[i];
            for (int j = 0; j < C; ++j) p[j] = gain[j] * y[j];
            // gp = U^T gZ
            for (int j = 0; j < C; ++j) gp[j] = {};
            for (int i = 0; i < C; ++i)
                for (int j = 0; j < C; ++j) gp[j] += u[i * C + j] * GZ[i];
            // gain gradient: ga = gp .* conj(y)
            for (int j = 0; j < C; ++j) {
                const Complex ga = gp[j] * std::conj(y[j]);
                if (complex_gain) {
                    const Complex rot = ga * std::polar(1.0, -op.phase[std::size_t(k) * C + j]);
                    gmag[j] += rot.real();
                    gph[j] += lam[j] * rot.imag();
                } else {
                    gmag[j] += ga.real();
                }
                gy[j] = std::conj(gain[j]) * gp[j];
            }
            // gX = U gy
            for (int i = 0; i < C; ++i) {
                Complex s{};
                for (int j = 0; j < C; ++j) s += u[i * C + j] * gy[j];
                GX[i] = s;
            }
            if (!fixed_basis) {
                // gU += Re(gZ p^H) + Re(X gy^H)
                for (int i = 0; i < C; ++i)
                    for (int j = 0; j < C; ++j)
                        gu[i * C + j] += (GZ[i] * std::conj(p[j])).real() + (X[i] * std::conj(gy[j])).real();
            }
        }
    }
    return rfft_adjoint(gX, n);
}

// Scatter per-bin gradients (K x C) of interpolated rows back onto a B x C table.
void scatter_interp(std::span<const double> g_rows, int K, int C, GainTable& g_table)
{
    const auto taps = interpolation_taps(g_table.bins, K);
    for (int k = 0; k < K; ++k) {
        const auto& t = taps[k];
        for (int c = 0; c < C; ++c) {
            const double g = g_rows[std::size_t(k) * C + c];
            if (t.frac == 0.0) {
                g_table.at(t.lo, c) += g;
            } else {
                g_table.at(t.lo, c) += (1.0 - t.frac) * g;
                g_table.at(t.hi, c) += t.frac * g;
            }
        }
    }
}

void accumulate_axis(const AxisOperator& op, const AxisGrad& ag, AxisOperatorParams& g, FrechetMode mode)
{
    const int C = op.channels;
    const int K = op.bins;
    if (op.variant != Variant::IdentityBasis) {
        const std::size_t P = skew_size(C);
        for (std::size_t b = 0; b < op.bases.size(); ++b) {
            const std::vector<double> gt = skew_gradient(op.skews[b], ag.g_u[b], mode);
            double* dst = op.variant == Variant::UntiedBasis ? g.untied.theta.data() + b * P : g.skew.theta.data();
            for (std::size_t m = 0; m < P; ++m) dst[m] += gt[m];
        }
    }
    std::vector<double> g_pre(ag.g_mag.size());
    for (std::size_t i = 0; i < g_pre.size(); ++i)
        g_pre[i] = op.variant == Variant::SignedGain ? ag.g_mag[i] : ag.g_mag[i] * softplus_grad(op.pre.gamma[i]);
    scatter_interp(g_pre, K, C, g.gains);
    if (!ag.g_phase.empty()) {
        std::vector<double> gp = ag.g_phase;
        for (int c = 0; c < C; ++c) {
            gp[c] = 0.0;
            if (op.length % 2 == 0 && op.length > 1) gp[std::size_t(K - 1) * C + c] = 0.0;
        }
        scatter_interp(gp, K, C, g.phases);
    }
}

FeatureMap pass_backward(const FeatureMap& g, const AxisOperator& op, const HalfSpectrum& spec,
                         AxisOperatorParams& grads, const GradOptions& opt)
{
    AxisGrad ag;
    FeatureMap gx = axis_pass_backward(g, op, spec, ag);
    accumulate_axis(op, ag, grads, opt.frechet);
    if (opt.inject_cw_adjoint_fault && op.axis == Axis::Width) gx *= -1.0;
    return gx;
}

}  // namespace

std::vector<double> skew_gradient(const Matrix& a, const Matrix& g_u, FrechetMode mode)
{
    const int C = a.rows();
    std::vector<double> g(skew_size(C), 0.0);
    auto direction = [&](int i, int j) {
        Matrix e(C, C);
        e(i, j) = 1.0;
        e(j, i) = -1.0;
        return e;
    };
    switch (mode) {
    case FrechetMode::Adjoint: {
        const Matrix l = expm_frechet(a.transposed(), g_u);
        for (int i = 1; i < C; ++i)
            for (int j = 0; j < i; ++j) g[skew_index(i, j)] = l(i, j) - l(j, i);
        break;
    }
    case FrechetMode::PerComponent:
        for (int i = 1; i < C; ++i)
            for (int j = 0; j < i; ++j) g[skew_index(i, j)] = frobenius_inner(g_u, expm_frechet(a, direction(i, j)));
        break;
    case FrechetMode::FiniteDifference: {
        constexpr double h = 1e-6;
        for (int i = 1; i < C; ++i)
            for (int j = 0; j < i; ++j) {
                const Matrix e = direction(i, j);
                Matrix d = matrix_exp(a + h * e) - matrix_exp(a - h * e);
                g[skew_index(i, j)] = frobenius_inner(g_u, d) / (2 * h);
            }
        break;
    }
    }
    return g;
}

MixerParams zeros_like(const MixerParams& p)
{
    MixerParams z = p;
    for (auto& g : parameter_groups(z)) std::fill(g.values->begin(), g.values->end(), 0.0);
    return z;
}

FeatureMap mixer_forward_traced(const FeatureMap& x, const MixerParams& p, MixerTrace& t)
{
    p.validate();
    const bool need_ch = p.axis_mode != AxisMode::CwOnly;
    const bool need_cw = p.axis_mode != AxisMode::ChOnly;
    if (need_ch) t.ch_op = realize(p.ch, p.variant, x.height());
    if (need_cw) t.cw_op = realize(p.cw, p.variant, x.width());
    switch (p.axis_mode) {
    case AxisMode::ChOnly: t.core_out = axis_pass(x, t.ch_op, Transform::Fast, &t.ch_spectrum); break;
    case AxisMode::CwOnly: t.core_out = axis_pass(x, t.cw_op, Transform::Fast, &t.cw_spectrum); break;
    case AxisMode::ChThenCw: {
        FeatureMap mid = axis_pass(x, t.ch_op, Transform::Fast, &t.ch_spectrum);
        t.core_out = axis_pass(mid, t.cw_op, Transform::Fast, &t.cw_spectrum);
        break;
    }
    case AxisMode::CwThenCh: {
        FeatureMap mid = axis_pass(x, t.cw_op, Transform::Fast, &t.cw_spectrum);
        t.core_out = axis_pass(mid, t.ch_op, Transform::Fast, &t.ch_spectrum);
        break;
    }
    case AxisMode::ChPlusCw:
        t.core_out = axis_pass(x, t.ch_op, Transform::Fast, &t.ch_spectrum);
        t.core_out += axis_pass(x, t.cw_op, Transform::Fast, &t.cw_spectrum);
        break;
    }
    t.pre_act = depthwise_conv3x3(t.core_out, p.refine);
    t.act = t.pre_act;
    for (double& v : t.act.values()) v = gelu(v);
    FeatureMap y = fuse(t.act, p.fuse);
    y += x;
    return y;
}

FeatureMap core_backward(const MixerTrace& t, const MixerParams& p, const FeatureMap& g, MixerParams& grads,
                         const GradOptions& opt)
{
    switch (p.axis_mode) {
    case AxisMode::ChOnly: return pass_backward(g, t.ch_op, t.ch_spectrum, grads.ch, opt);
    case AxisMode::CwOnly: return pass_backward(g, t.cw_op, t.cw_spectrum, grads.cw, opt);
    case AxisMode::ChThenCw: {
        FeatureMap gmid = pass_backward(g, t.cw_op, t.cw_spectrum, grads.cw, opt);
        return pass_backward(gmid, t.ch_op, t.ch_spectrum, grads.ch, opt);
    }
    case AxisMode::CwThenCh: {
        FeatureMap gmid = pass_backward(g, t.ch_op, t.ch_spectrum, grads.ch, opt);
        return pass_backward(gmid, t.cw_op, t.cw_spectrum, grads.cw, opt);
    }
    case AxisMode::ChPlusCw: {
        FeatureMap gx = pass_backward(g, t.ch_op, t.ch_spectrum, grads.ch, opt);
        gx += pass_backward(g, t.cw_op, t.cw_spectrum, grads.cw, opt);
        return gx;
    }
    }
    throw std::logic_error("core_backward: unknown axis mode");
}

FeatureMap mixer_backward(const MixerTrace& t, const MixerParams& p, const FeatureMap& gy, MixerParams& grads,
                          const GradOptions& opt)
{
    const int H = gy.height(), W = gy.width(), C = gy.channels();
    // fuse
    FeatureMap g_act(H, W, C);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            auto go = gy.at(h, w);
            auto a = t.act.at(h, w);
            auto ga = g_act.at(h, w);
            for (int o = 0; o < C; ++o) {
                const double g = go[o];
                grads.fuse.bias[o] += g;
                double* gw = grads.fuse.weight.data() + std::size_t(o) * C;
                const double* wrow = p.fuse.weight.data() + std::size_t(o) * C;
                for (int i = 0; i < C; ++i) {
                    gw[i] += g * a[i];
                    ga[i] += wrow[i] * g;
                }
            }
        }
    // GELU
    FeatureMap g_pre = std::move(g_act);
    {
        auto gv = g_pre.values();
        auto pv = t.pre_act.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= gelu_grad(pv[i]);
    }
    // depthwise conv
    FeatureMap g_core(H, W, C);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            auto gr = g_pre.at(h, w);
            for (int c = 0; c < C; ++c) grads.refine.bias[c] += gr[c];
            for (int dy = 0; dy < 3; ++dy) {
                const int hh = h + dy - 1;
                if (hh < 0 || hh >= H) continue;
                for (int dx = 0; dx < 3; ++dx) {
                    const int ww = w + dx - 1;
                    if (ww < 0 || ww >= W) continue;
                    auto s = t.core_out.at(hh, ww);
                    auto gs = g_core.at(hh, ww);
                    const int tap = dy * 3 + dx;
                    for (int c = 0; c < C; ++c) {
                        grads.refine.kernel[std::size_t(c) * 9 + tap] += gr[c] * s[c];
                        gs[c] += p.refine.kernel[std::size_t(c) * 9 + tap] * gr[c];
                    }
                }
            }
        }
    FeatureMap gx = core_backward(t, p, g_core, grads, opt);
    gx += gy;
    return gx;
}

std::string to_string(LossKind k) { return k == LossKind::L1 ? "l1" : "l2"; }

double magnitude_loss(LossKind kind, const FeatureMap& out, const FeatureMap& target, FeatureMap* grad)
{
    if (out.channels() != 2 || target.channels() != 1 || out.height() != target.height() ||
        out.width() != target.width())
        throw std::invalid_argument("magnitude_loss: expected 2-channel output and 1-channel target of equal size");
    const int H = out.height(), W = out.width();
    const double inv = 1.0 / (double(H) * W);
    if (grad) *grad = FeatureMap(H, W, 2);
    double loss = 0.0;
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            const double re = out(h, w, 0), im = out(h, w, 1);
            const double mag = std::hypot(re, im);
            const double d = mag - target(h, w, 0);
            double dl_dmag = 0.0;
            if (kind == LossKind::L1) {
                loss += std::abs(d);
                dl_dmag = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            } else {
                loss += d * d;
                dl_dmag = 2.0 * d;
            }
            if (grad && mag > 0.0) {
                (*grad)(h, w, 0) = inv * dl_dmag * re / mag;
                (*grad)(h, w, 1) = inv * dl_dmag * im / mag;
            }
        }
    return loss * inv;
}

double GradCheckReport::max_rel_error() const noexcept
{
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
}

double grad_check_floor(double loss_value, double step, double tolerance)
{
    const double noise = kFdNoiseUlps * std::numeric_limits<double>::epsilon() * std::abs(loss_value) / step;
    return std::max(kGradCheckFloor, noise / tolerance);
}

GradCheckReport finite_difference_check(const std::vector<ParamGroupRef>& params,
                                        const std::vector<std::vector<double>>& analytic,
                                        const std::function<double()>& loss, double step, double tolerance)
{
    if (params.size() != analytic.size()) throw std::invalid_argument("finite_difference_check: group count mismatch");
    GradCheckReport rep;
    rep.tolerance = tolerance;
    rep.step = step;
    rep.floor = grad_check_floor(loss(), step, tolerance);
    for (std::size_t g = 0; g < params.size(); ++g) {
        auto& vals = *params[g].values;
        if (analytic[g].size() != vals.size())
            throw std::invalid_argument("finite_difference_check: gradient shape mismatch in " + params[g].name);
        GradCheckGroup grp{params[g].name, vals.size(), 0.0, 0.0};
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + step;
            const double lp = loss();
            vals[i] = orig - step;
            const double lm = loss();
            vals[i] = orig;
            const double num = (lp - lm) / (2 * step);
            const double a = analytic[g][i];
            if (!std::isfinite(a) || !std::isfinite(num)) {
                grp.max_rel_error = std::numeric_limits<double>::infinity();
                continue;
            }
            const double err = std::abs(a - num);
            const double scale = std::max(std::abs(a), std::abs(num));
            if (scale < rep.floor) ++grp.noise_limited;
            grp.max_abs_error = std::max(grp.max_abs_error, err);
            grp.max_rel_error = std::max(grp.max_rel_error, err / std::max(scale, rep.floor));
        }
        rep.groups.push_back(grp);
    }
    rep.passed = rep.max_rel_error() < tolerance;
    return rep;
}

OptimizerState make_optimizer(const std::vector<ParamGroupRef>& params, const AdamWConfig& cfg)
{
    OptimizerState s;
    s.config = cfg;
    for (const auto& p : params) {
        s.m.emplace_back(p.values->size(), 0.0);
        s.v.emplace_back(p.values->size(), 0.0);
    }
    return s;
}

void adamw_step(const std::vector<ParamGroupRef>& params, const std::vector<std::vector<double>>& grads,
                OptimizerState& st)
{
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw std::invalid_argument("adamw_step: group count mismatch");
    const AdamWConfig& c = st.config;
    ++st.step;
    const double bc1 = 1.0 - std::pow(c.beta1, double(st.step));
    const double bc2 = 1.0 - std::pow(c.beta2, double(st.step));
    for (std::size_t g = 0; g < params.size(); ++g) {
        auto& p = *params[g].values;
        const auto& gr = grads[g];
        if (gr.size() != p.size() || st.m[g].size() != p.size())
            throw std::invalid_argument("adamw_step: shape mismatch in " + params[g].name);
        auto& m = st.m[g];
        auto& v = st.v[g];
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] -= c.lr * c.weight_decay * p[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gr[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gr[i] * gr[i];
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            p[i] -= c.lr * mh / (std::sqrt(vh) + c.eps);
        }
    }
}

}  // namespace chasm
