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

#include "chasm/experiment.hpp"
#include "chasm/fft.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace chasm {

namespace {

FeatureMap noise_map(int h, int w, int c, Rng& rng)
{
    FeatureMap x(h, w, c);
    for (double& v : x.values()) v = rng.normal();
    return x;
}

ComplexImage noise_image(int h, int w, Rng& rng)
{
    ComplexImage x(h, w);
    for (auto& v : x.values()) v = {rng.normal(), rng.normal()};
    return x;
}

double spectrum_max_diff(const HalfSpectrum& a, const HalfSpectrum& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
    return d;
}

double spectrum_max_abs(const HalfSpectrum& a)
{
    double d = 0.0;
    for (auto v : a.values()) d = std::max(d, std::abs(v));
    return d;
}

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

MixerParams random_params(int h, int w, int c, Variant v, AxisMode m, Rng& rng)
{
    MixerParams p = make_mixer_params({h, w, c, 3, 2}, v, m);
    randomize(p, rng, 0.6);
    return p;
}

// The realized per-axis bases of a parameter set, for the orthogonality check.
void collect_bases(const MixerParams& p, int h, int w, std::vector<OrthoBasis>& out)
{
    for (const auto& op : {realize(p.ch, p.variant, h), realize(p.cw, p.variant, w)})
        out.insert(out.end(), op.bases.begin(), op.bases.end());
}

CheckResult check_fft_vs_naive()
{
    Rng rng(101);
    double worst = 0.0, worst_rt = 0.0;
    for (int n = 1; n <= 32; ++n)
        for (Axis axis : {Axis::Height, Axis::Width}) {
            const FeatureMap x = axis == Axis::Height ? noise_map(n, 3, 2, rng) : noise_map(3, n, 2, rng);
            const HalfSpectrum f = rfft_axis(x, axis);
            const HalfSpectrum g = naive_dft_axis(x, axis);
            worst = std::max(worst, spectrum_max_diff(f, g) / std::max(spectrum_max_abs(g), 1e-300));
            worst_rt = std::max(worst_rt, max_abs_diff(irfft_axis(f, n), x) / std::max(max_abs(x), 1e-300));
        }
    const bool ok = worst <= 1e-12 && worst_rt <= 1e-12;
    return {"fft_vs_naive_dft_1_to_32", ok, "max rel diff " + sci(worst) + ", roundtrip " + sci(worst_rt) + " (<= 1e-12)"};
}

CheckResult check_bases()
{
    Rng rng(202);
    double orth = 0.0, det = 0.0;
    int count = 0;
    for (int c = 2; c <= 8; ++c)
        for (int t = 0; t < 100; ++t) {
            SkewParams p = SkewParams::zeros(c);
            const double scale = 0.1 + 2.0 * rng.uniform();
            for (double& v : p.theta) v = scale * rng.normal();
            const OrthoBasis b = basis_from_params(p);
            orth = std::max(orth, b.orthogonality_error());
            det = std::max(det, std::abs(determinant(b.u) - 1.0));
            ++count;
        }
    std::vector<OrthoBasis> extra;
    for (Variant v : kAllVariants) collect_bases(random_params(6, 5, 4, v, AxisMode::ChThenCw, rng), 6, 5, extra);
    for (const auto& b : extra) {
        orth = std::max(orth, b.orthogonality_error());
        det = std::max(det, std::abs(determinant(b.u) - 1.0));
        ++count;
    }
    return {"basis_orthogonality_det", orth <= 1e-10 && det <= 1e-10,
            std::to_string(count) + " bases, max |U^T U - I| " + sci(orth) + ", max |det - 1| " + sci(det) +
                " (<= 1e-10)"};
}

CheckResult check_identity_init()
{
    Rng rng(303);
    double worst = 0.0;
    bool block_exact = true;
    for (Variant v : kAllVariants)
        for (AxisMode m : kAllAxisModes) {
            const MixerParams p = make_mixer_params({6, 5, 4, 3, 2}, v, m);
            const FeatureMap x = noise_map(6, 5, 4, rng);
            FeatureMap expect = x;
            if (m == AxisMode::ChPlusCw) expect *= 2.0;
            worst = std::max(worst, max_abs_diff(spectral_core(x, p), expect));
            block_exact = block_exact && max_abs_diff(mixer_forward(x, p), x) == 0.0;
        }
    return {"spectral_core_identity_at_init", worst <= 1e-10 && block_exact,
            "max |core(x) - x| " + sci(worst) + " (<= 1e-10; ChPlusCw compared to 2x), block exact: " +
                (block_exact ? "yes" : "no")};
}

CheckResult check_linearity()
{
    Rng rng(404);
    double worst = 0.0;
    for (Variant v : kAllVariants)
        for (AxisMode m : kAllAxisModes) {
            const MixerParams p = random_params(6, 5, 4, v, m, rng);
            const FeatureMap x = noise_map(6, 5, 4, rng), y = noise_map(6, 5, 4, rng);
            const double a = rng.normal(), b = rng.normal();
            FeatureMap ax = x, by = y;
            ax *= a;
            by *= b;
            FeatureMap mix = ax;
            mix += by;
            FeatureMap lhs = spectral_core(mix, p);
            FeatureMap r1 = spectral_core(x, p), r2 = spectral_core(y, p);
            r1 *= a;
            r2 *= b;
            r1 += r2;
            worst = std::max(worst, max_abs_diff(lhs, r1) / std::max(1.0, max_abs(r1)));
        }
    return {"spectral_core_linearity", worst <= 1e-10, "max rel deviation " + sci(worst) + " (<= 1e-10)"};
}

CheckResult check_realness()
{
    Rng rng(505);
    const bool was = verify_fft_enabled();
    set_verify_fft(true);
    take_max_fft_residue();
    bool threw = false;
    std::string msg;
    try {
        for (Variant v : kAllVariants)
            for (AxisMode m : kAllAxisModes)
                for (auto [h, w] : {std::pair{6, 5}, std::pair{7, 8}, std::pair{1, 4}}) {
                    const MixerParams p = random_params(h, w, 3, v, m, rng);
                    (void)mixer_forward(noise_map(h, w, 3, rng), p);
                }
    } catch (const FftResidueError& e) {
        threw = true;
        msg = e.what();
    }
    const double residue = take_max_fft_residue();
    set_verify_fft(was);
    return {"output_realness_residue", !threw && residue < kResidueTolerance,
            threw ? msg : "max imaginary residue " + sci(residue) + " (< 1e-9), all variants incl. ComplexGain"};
}

CheckResult check_reindexing()
{
    Rng rng(606);
    bool exact = true;
    int trials = 0;
    for (int c : {2, 3, 4, 6})
        for (int t = 0; t < 10; ++t) {
            const int K = 5;
            SkewParams sp = SkewParams::zeros(c);
            for (double& v : sp.theta) v = rng.normal();
            const OrthoBasis u = basis_from_params(sp);
            GainVectors lam{K, c, std::vector<double>(std::size_t(K) * c)};
            for (double& v : lam.lambda) v = softplus(rng.normal());
            std::vector<int> sigma(K);
            std::iota(sigma.begin(), sigma.end(), 0);
            for (int i = K - 1; i > 0; --i) std::swap(sigma[i], sigma[rng.below(std::uint64_t(i) + 1)]);
            const GainVectors re = reindex_gains(lam, sigma);
            std::vector<int> inv(K);
            for (int i = 0; i < K; ++i) inv[sigma[i]] = i;
            for (int k = 0; k < K; ++k) exact = exact && dense_operator(u, re.row(k)) == dense_operator(u, lam.row(inv[k]));
            ++trials;
        }
    return {"frequency_reindexing_identity", exact, std::to_string(trials) + " permutations, bitwise equality"};
}

CheckResult check_normal_operators()
{
    Rng rng(707);
    double herm = 0.0, rayleigh = std::numeric_limits<double>::infinity();
    const int H = 16, W = 12;
    const CoilSet coils = make_coils(H, W, 4);
    int masks = 0;
    for (double R : {1.0, 4.0, 8.0})
        for (int kind = 0; kind < 3; ++kind) {
            const SamplingMask m = kind == 0   ? make_structured_mask(H, R, 0.32 / R, 0)
                                   : kind == 1 ? make_random_mask(H, R, 900 + masks)
                                               : make_random_mask(H, R, 900 + masks, true, 0.32 / R);
            ++masks;
            for (int t = 0; t < 10; ++t) {
                ComplexImage x = noise_image(H, W, rng), y = noise_image(H, W, rng);
                const double nx = std::sqrt(inner(x, x).real()), ny = std::sqrt(inner(y, y).real());
                for (auto& v : x.values()) v /= nx;
                for (auto& v : y.values()) v /= ny;
                for (int multi = 0; multi < 2; ++multi) {
                    auto N = [&](const ComplexImage& z) { return multi ? normal_multi(z, m, coils) : normal_single(z, m); };
                    const Complex a = inner(N(x), y), b = std::conj(inner(N(y), x));
                    herm = std::max(herm, std::abs(a - b));
                    rayleigh = std::min(rayleigh, inner(N(x), x).real());
                }
            }
        }
    return {"normal_operator_hermitian_psd", herm <= 1e-10 && rayleigh >= -1e-12,
            std::to_string(masks) + " masks x 10 draws, single+multi coil: max Hermitian defect " + sci(herm) +
                " (<= 1e-10), min Rayleigh " + sci(rayleigh) + " (>= -1e-12)"};
}

CheckResult check_gradients()
{
    double worst = 0.0;
    int failures = 0, runs = 0;
    std::string first_fail;
    for (Variant v : kAllVariants)
        for (AxisMode m : kAllAxisModes)
            for (std::uint64_t inst = 0; inst < 3; ++inst) {
                const std::uint64_t seed = 5000 + 100 * std::uint64_t(v) + 10 * std::uint64_t(m) + inst;
                const int h = 6, w = 5 + int(inst % 2);
                ToyModel model = build_toy_model({h, w, 4, 3, 2, 1, v, m}, seed);
                Rng rng(derive_seed(seed, 1));
                randomize(model, rng, 0.4);
                const FeatureMap x = noise_map(h, w, 2, rng);
                FeatureMap t(h, w, 1);
                for (double& e : t.values()) e = 0.5 + rng.uniform();
                const GradCheckReport r = grad_check(model, x, t, LossKind::L2);
                worst = std::max(worst, r.max_rel_error());
                ++runs;
                if (!r.passed && failures++ == 0) first_fail = to_string(v) + "/" + to_string(m);
            }
    // negative control: a sign-flipped width adjoint must be caught
    ToyModel model = build_toy_model({6, 6, 4, 3, 3, 1, Variant::Chasm, AxisMode::ChThenCw}, 77);
    Rng rng(78);
    randomize(model, rng, 0.4);
    const FeatureMap x = noise_map(6, 6, 2, rng);
    FeatureMap t(6, 6, 1);
    for (double& e : t.values()) e = 0.5 + rng.uniform();
    GradOptions bad;
    bad.inject_cw_adjoint_fault = true;
    const bool caught = !grad_check(model, x, t, LossKind::L2, kGradCheckTolerance, bad).passed;
    return {"grad_check_all_variants_modes", failures == 0 && caught,
            std::to_string(runs) + " instances, max rel error " + sci(worst) + " (< 1e-5), failures " +
                std::to_string(failures) + (first_fail.empty() ? "" : " first " + first_fail) +
                ", injected fault caught: " + (caught ? "yes" : "no")};
}

CheckResult check_dense_oracle()
{
    Rng rng(808);
    double worst = 0.0;
    for (Variant v : kAllVariants)
        for (AxisMode m : kAllAxisModes) {
            const MixerParams p = random_params(4, 4, 3, v, m, rng);
            const Matrix d = dense_core_oracle(p, 4, 4, 3);
            for (int t = 0; t < 3; ++t) {
                const FeatureMap x = noise_map(4, 4, 3, rng);
                const FeatureMap y = spectral_core(x, p);
                for (int i = 0; i < d.rows(); ++i) {
                    double s = 0.0;
                    for (int j = 0; j < d.cols(); ++j) s += d(i, j) * x.raw()[j];
                    worst = std::max(worst, std::abs(s - y.raw()[i]));
                }
            }
        }
    return {"dense_core_oracle_4x4x3", worst <= 1e-9, "max |D x - core(x)| " + sci(worst) + " (<= 1e-9)"};
}

CheckResult check_dof()
{
    Rng rng(909);
    int generic_ok = 0, generic_total = 0, degenerate_ok = 0, degenerate_total = 0;
    for (int c : {2, 3, 4})
        for (int K : {1, 2, 4}) {
            for (int t = 0; t < 20; ++t) {
                SkewParams sp = SkewParams::zeros(c);
                for (double& v : sp.theta) v = rng.normal();
                GainTable g(K, c, 0.0);
                for (double& v : g.gamma) v = rng.normal();
                const DofReport r = dof_rank_check(sp, g);
                ++generic_total;
                if (r.generic && r.measured_rank == r.expected_rank) ++generic_ok;
            }
            for (int t = 0; t < 3; ++t) {
                SkewParams sp = SkewParams::zeros(c);
                for (double& v : sp.theta) v = rng.normal();
                GainTable g(K, c, 0.0);
                for (double& v : g.gamma) v = rng.normal();
                for (int k = 0; k < K; ++k) g.at(k, 1) = g.at(k, 0);
                const DofReport r = dof_rank_check(sp, g);
                ++degenerate_total;
                if (!r.generic && r.measured_rank == r.expected_rank - 1) ++degenerate_ok;
            }
        }
    return {"dof_rank_proposition", generic_ok == generic_total && degenerate_ok == degenerate_total,
            "generic " + std::to_string(generic_ok) + "/" + std::to_string(generic_total) + " at full rank, degenerate " +
                std::to_string(degenerate_ok) + "/" + std::to_string(degenerate_total) + " at rank - 1"};
}

}  // namespace

bool VerifyReport::passed() const noexcept
{
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string VerifyReport::render() const
{
    std::ostringstream o;
    for (const auto& c : checks) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%5.2fs", c.seconds);
        o << (c.passed ? "PASS " : "FAIL ") << c.name << " [" << buf << "] " << c.detail << "\n";
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: %zu checks in %.2f s\n", passed() ? "ALL PASS" : "FAILED", checks.size(),
                  seconds);
    o << buf;
    return o.str();
}

VerifyReport run_verify()
{
    using clock = std::chrono::steady_clock;
    VerifyReport rep;
    const auto t0 = clock::now();
    for (auto* fn : {check_fft_vs_naive, check_bases, check_identity_init, check_linearity, check_realness,
                     check_reindexing, check_normal_operators, check_gradients, check_dense_oracle, check_dof}) {
        const auto t = clock::now();
        CheckResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(clock::now() - t).count();
        rep.checks.push_back(r);
    }
    rep.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return rep;
}

}  // namespace chasm
