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

#include "chasm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chasm {

Matrix dense_core_oracle(const MixerParams& p, int height, int width, int channels)
{
    const int n = height * width * channels;
    if (n > kDenseOracleMaxSize)
        throw std::invalid_argument("dense_core_oracle: " + std::to_string(n) + " unknowns exceeds cap " +
                                    std::to_string(kDenseOracleMaxSize));
    Matrix m(n, n);
    FeatureMap e(height, width, channels);
    for (int j = 0; j < n; ++j) {
        e.raw()[j] = 1.0;
        const FeatureMap col = spectral_core(e, p, Transform::Naive);
        for (int i = 0; i < n; ++i) m(i, j) = col.raw()[i];
        e.raw()[j] = 0.0;
    }
    return m;
}

std::vector<double> svd_small(const Matrix& in)
{
    Matrix a = in.rows() >= in.cols() ? in : in.transposed();
    const int m = a.rows(), n = a.cols();
    if (n == 0) return {};
    constexpr double eps = 1e-15;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0, beta = 0, gamma = 0;
                for (int i = 0; i < m; ++i) {
                    alpha += a(i, p) * a(i, p);
                    beta += a(i, q) * a(i, q);
                    gamma += a(i, p) * a(i, q);
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < m; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
            }
        if (!rotated) break;
    }
    std::vector<double> sv(n);
    for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int i = 0; i < m; ++i) s += a(i, j) * a(i, j);
        sv[j] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

namespace {

// Stacked upper triangle (with diagonal) of every M(k).
std::vector<double> operator_signature(const SkewParams& theta, const GainTable& g)
{
    const OrthoBasis b = basis_from_params(theta);
    const int C = theta.channels;
    std::vector<double> out;
    out.reserve(std::size_t(g.bins) * C * (C + 1) / 2);
    std::vector<double> lam(C);
    for (int k = 0; k < g.bins; ++k) {
        for (int c = 0; c < C; ++c) lam[c] = softplus(g.at(k, c));
        const Matrix m = dense_operator(b, lam);
        for (int i = 0; i < C; ++i)
            for (int j = i; j < C; ++j) out.push_back(m(i, j));
    }
    return out;
}

}  // namespace

DofReport dof_rank_check(const SkewParams& theta, const GainTable& gtab, double fd_step)
{
    theta.validate();
    if (gtab.channels != theta.channels) throw std::invalid_argument("dof_rank_check: channel mismatch");
    const int C = theta.channels;
    const int K = gtab.bins;
    DofReport r;
    r.channels = C;
    r.bins = K;
    r.expected_rank = skew_size(C) + K * C;
    r.tolerance = kRankTolerance;

    SkewParams t = theta;
    GainTable g = gtab;
    const int cols = skew_size(C) + K * C;
    const int rows = K * C * (C + 1) / 2;
    Matrix jac(rows, cols);
    auto fill_column = [&](int col, double& slot) {
        const double orig = slot;
        slot = orig + fd_step;
        const auto fp = operator_signature(t, g);
        slot = orig - fd_step;
        const auto fm = operator_signature(t, g);
        slot = orig;
        for (int i = 0; i < rows; ++i) {
            const double d = (fp[i] - fm[i]) / (2 * fd_step);
            if (!std::isfinite(d)) throw std::runtime_error("dof_rank_check: non-finite Jacobian entry");
            jac(i, col) = d;
        }
    };
    for (int m = 0; m < skew_size(C); ++m) fill_column(m, t.theta[m]);
    for (int i = 0; i < K * C; ++i) fill_column(skew_size(C) + i, g.gamma[i]);
    r.jacobian_rows = rows;
    r.jacobian_cols = cols;

    r.singular_values = svd_small(jac);
    const double smax = r.singular_values.empty() ? 0.0 : r.singular_values.front();
    r.measured_rank = int(std::count_if(r.singular_values.begin(), r.singular_values.end(),
                                        [&](double s) { return s > kRankTolerance * smax; }));

    r.generic = true;
    for (int i = 0; i < C && r.generic; ++i)
        for (int j = i + 1; j < C; ++j) {
            double d = 0.0;
            for (int k = 0; k < K; ++k) d = std::max(d, std::abs(softplus(g.at(k, i)) - softplus(g.at(k, j))));
            if (d <= kSignatureSeparation) {
                r.generic = false;
                break;
            }
        }
    return r;
}

double psnr(const FeatureMap& ref, const FeatureMap& test, double data_range)
{
    if (!ref.same_shape(test)) throw std::invalid_argument("psnr: shape mismatch");
    double se = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = ref.raw()[i] - test.raw()[i];
        se += d * d;
    }
    const double mse = se / double(ref.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double psnr(const FeatureMap& ref, const FeatureMap& test)
{
    const double range = *std::max_element(ref.raw().begin(), ref.raw().end());
    return psnr(ref, test, range);
}

std::vector<double> gaussian_window(int size, double sigma)
{
    std::vector<double> g(size);
    const double c = (size - 1) / 2.0;
    double s = 0.0;
    for (int i = 0; i < size; ++i) {
        g[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        s += g[i];
    }
    for (double& v : g) v /= s;
    return g;
}

double ssim(const FeatureMap& ref, const FeatureMap& test, double data_range, const SsimParams& sp)
{
    if (!ref.same_shape(test) || ref.channels() != 1) throw std::invalid_argument("ssim: expected equal 1-channel maps");
    const int H = ref.height(), W = ref.width(), n = sp.window;
    if (H < n || W < n) throw std::invalid_argument("ssim: image smaller than the window");
    const auto g = gaussian_window(n, sp.sigma);
    const int oh = H - n + 1, ow = W - n + 1;
    const double c1 = (sp.k1 * data_range) * (sp.k1 * data_range);
    const double c2 = (sp.k2 * data_range) * (sp.k2 * data_range);

    // separable filtering: rows then columns, for x, y, xx, yy, xy
    auto filter = [&](auto pixel) {
        std::vector<double> tmp(std::size_t(H) * ow), out(std::size_t(oh) * ow);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < ow; ++w) {
                double s = 0.0;
                for (int t = 0; t < n; ++t) s += g[t] * pixel(h, w + t);
                tmp[std::size_t(h) * ow + w] = s;
            }
        for (int h = 0; h < oh; ++h)
            for (int w = 0; w < ow; ++w) {
                double s = 0.0;
                for (int t = 0; t < n; ++t) s += g[t] * tmp[std::size_t(h + t) * ow + w];
                out[std::size_t(h) * ow + w] = s;
            }
        return out;
    };
    const auto mx = filter([&](int h, int w) { return ref(h, w, 0); });
    const auto my = filter([&](int h, int w) { return test(h, w, 0); });
    const auto mxx = filter([&](int h, int w) { return ref(h, w, 0) * ref(h, w, 0); });
    const auto myy = filter([&](int h, int w) { return test(h, w, 0) * test(h, w, 0); });
    const auto mxy = filter([&](int h, int w) { return ref(h, w, 0) * test(h, w, 0); });

    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return acc / double(mx.size());
}

double ssim(const FeatureMap& ref, const FeatureMap& test)
{
    const double range = *std::max_element(ref.raw().begin(), ref.raw().end());
    return ssim(ref, test, range);
}

MeanStd mean_std(const std::vector<double>& v)
{
    if (v.empty()) return {};
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(s / double(v.size() - 1)) : 0.0};
}

void MetricReport::finalize()
{
    const auto p = mean_std(psnr);
    const auto s = mean_std(ssim);
    psnr_mean = p.mean;
    psnr_std = p.std;
    ssim_mean = s.mean;
    ssim_std = s.std;
}

}  // namespace chasm
