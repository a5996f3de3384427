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
#include "chasm/model.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace chasm;
using chasm::testing::random_map;
using chasm::testing::random_target;

namespace {

ToyModel random_model(int h, int w, int c, Variant v, AxisMode m, std::uint64_t seed, int blocks = 1)
{
    ToyModelShape s{h, w, c, 3, 2, blocks, v, m};
    ToyModel model = build_toy_model(s, seed);
    Rng rng(derive_seed(seed, 7));
    randomize(model, rng, 0.4);
    return model;
}

}  // namespace

class GradGate : public ::testing::TestWithParam<std::tuple<Variant, AxisMode>> {};

TEST_P(GradGate, ThreeRandomInstances)
{
    const auto [variant, mode] = GetParam();
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
        const std::uint64_t seed = 1000 + inst * 31 + int(variant) * 7 + int(mode);
        ToyModel m = random_model(6, 5 + int(inst % 2), 4, variant, mode, seed);
        Rng rng(derive_seed(seed, 99));
        const FeatureMap x = random_map(6, 5 + int(inst % 2), 2, rng);
        const FeatureMap target = random_target(6, 5 + int(inst % 2), rng);
        const GradCheckReport r = grad_check(m, x, target, LossKind::L2);
        EXPECT_TRUE(r.passed) << to_string(variant) << "/" << to_string(mode) << " instance " << inst
                              << " max rel " << r.max_rel_error();
        for (const auto& g : r.groups) EXPECT_LT(g.max_rel_error, 1e-5) << g.name;
    }
}

INSTANTIATE_TEST_SUITE_P(AllVariantsAndModes, GradGate,
                         ::testing::Combine(::testing::ValuesIn(kAllVariants), ::testing::ValuesIn(kAllAxisModes)),
                         [](const auto& info) {
                             return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
                         });

TEST(GradCheck, IdentityInitPasses)
{
    ToyModel m = build_toy_model({6, 6, 4, 3, 3, 2}, 5);
    Rng rng(3);
    const FeatureMap x = random_map(6, 6, 2, rng);
    const FeatureMap t = random_target(6, 6, rng);
    EXPECT_TRUE(grad_check(m, x, t, LossKind::L2).passed);
}

TEST(GradCheck, CorruptedWidthAdjointFails)
{
    ToyModel m = random_model(6, 6, 4, Variant::Chasm, AxisMode::ChThenCw, 17);
    Rng rng(4);
    const FeatureMap x = random_map(6, 6, 2, rng);
    const FeatureMap t = random_target(6, 6, rng);
    GradOptions bad;
    bad.inject_cw_adjoint_fault = true;
    EXPECT_FALSE(grad_check(m, x, t, LossKind::L2, 1e-5, bad).passed);
}

TEST(GradCheck, L1LossAwayFromKinks)
{
    ToyModel m = random_model(6, 6, 4, Variant::Chasm, AxisMode::ChThenCw, 23, 2);
    Rng rng(5);
    const FeatureMap x = random_map(6, 6, 2, rng);
    const FeatureMap t = random_target(6, 6, rng);
    EXPECT_TRUE(grad_check(m, x, t, LossKind::L1).passed);
}

TEST(GradCheck, FrechetModesAgree)
{
    Rng rng(8);
    for (int c : {2, 3, 5}) {
        Matrix a(c, c), g(c, c);
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < i; ++j) {
                a(i, j) = rng.normal();
                a(j, i) = -a(i, j);
            }
        for (double& v : g.values()) v = rng.normal();
        const auto adj = skew_gradient(a, g, FrechetMode::Adjoint);
        const auto per = skew_gradient(a, g, FrechetMode::PerComponent);
        const auto fd = skew_gradient(a, g, FrechetMode::FiniteDifference);
        for (std::size_t m = 0; m < adj.size(); ++m) {
            EXPECT_NEAR(adj[m], per[m], 1e-12 * std::max(1.0, std::abs(per[m])));
            EXPECT_NEAR(adj[m], fd[m], 1e-7 * std::max(1.0, std::abs(per[m])));
        }
    }
}

TEST(GradCheck, PerComponentModeMatchesFiniteDifferences)
{
    ToyModel m = random_model(5, 6, 3, Variant::UntiedBasis, AxisMode::ChThenCw, 41);
    Rng rng(6);
    const FeatureMap x = random_map(5, 6, 2, rng);
    const FeatureMap t = random_target(5, 6, rng);
    GradOptions opt;
    opt.frechet = FrechetMode::PerComponent;
    EXPECT_TRUE(grad_check(m, x, t, LossKind::L2, 1e-5, opt).passed);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients)
{
    ToyModel m = random_model(6, 6, 4, Variant::ComplexGain, AxisMode::ChPlusCw, 9);
    Rng rng(1);
    const FeatureMap x = random_map(6, 6, 2, rng);
    ModelTrace t;
    const FeatureMap y = model_forward_traced(m, x, t);
    ToyModel g = zeros_like(m);
    const FeatureMap gx = model_backward(t, m, FeatureMap(y.height(), y.width(), y.channels()), g);
    for (auto& grp : model_parameters(g))
        for (double v : *grp.values) EXPECT_EQ(v, 0.0) << grp.name;
    EXPECT_EQ(max_abs(gx), 0.0);
}

TEST(Backward, FuseBiasByHandOnScalarInstance)
{
    // 1x1x1 block at identity init with zero fuse: y = x + b, L = y^2 / 2,
    // so dL/db = y = x + b and dL/dw = y * gelu(x).
    MixerParams p = make_mixer_params({1, 1, 1, 1, 1});
    p.fuse.bias[0] = 0.25;
    FeatureMap x(1, 1, 1);
    x(0, 0, 0) = 0.7;
    MixerTrace t;
    const FeatureMap y = mixer_forward_traced(x, p, t);
    ASSERT_DOUBLE_EQ(y(0, 0, 0), 0.95);
    MixerParams g = zeros_like(p);
    mixer_backward(t, p, y, g);
    EXPECT_DOUBLE_EQ(g.fuse.bias[0], 0.95);
    EXPECT_DOUBLE_EQ(g.fuse.weight[0], 0.95 * gelu(0.7));
}

TEST(Backward, Deterministic)
{
    ToyModel m = random_model(6, 6, 4, Variant::Chasm, AxisMode::CwThenCh, 12);
    Rng rng(2);
    const FeatureMap x = random_map(6, 6, 2, rng);
    const FeatureMap tg = random_target(6, 6, rng);
    auto run = [&] {
        ModelTrace t;
        FeatureMap gy;
        magnitude_loss(LossKind::L1, model_forward_traced(m, x, t), tg, &gy);
        ToyModel g = zeros_like(m);
        model_backward(t, m, gy, g);
        std::vector<double> flat;
        for (auto& grp : model_parameters(g)) flat.insert(flat.end(), grp.values->begin(), grp.values->end());
        return flat;
    };
    EXPECT_EQ(run(), run());
}

TEST(AdamW, ZeroGradientNoDecayLeavesParams)
{
    std::vector<double> p{1.0, -2.0, 3.5};
    const auto before = p;
    std::vector<ParamGroupRef> refs{{"p", &p}};
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    OptimizerState st = make_optimizer(refs, cfg);
    for (int i = 0; i < 5; ++i) adamw_step(refs, {{0.0, 0.0, 0.0}}, st);
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.step, 5);
}

TEST(AdamW, FirstStepClosedForm)
{
    // at t = 1 the bias-corrected moments are g and g^2
    std::vector<double> p{0.3};
    std::vector<ParamGroupRef> refs{{"p", &p}};
    AdamWConfig cfg;
    OptimizerState st = make_optimizer(refs, cfg);
    const double g = -0.02;
    adamw_step(refs, {{g}}, st);
    const double decayed = 0.3 * (1.0 - cfg.lr * cfg.weight_decay);
    EXPECT_NEAR(p[0], decayed - cfg.lr * g / (std::abs(g) + cfg.eps), 1e-16);
}

TEST(AdamW, ConvergesOnConvexQuadraticIn100Steps)
{
    // f(p) = sum_i a_i (p_i - c_i)^2 / 2. The default beta1 = 0.9 overshoots on
    // this scale; beta1 = 0.5 settles within the budget.
    const std::vector<double> a{1.0, 3.0, 0.5, 2.0}, c{0.4, -1.0, 2.0, 0.0};
    std::vector<double> p(4, 0.0);
    std::vector<ParamGroupRef> refs{{"p", &p}};
    AdamWConfig cfg;
    cfg.lr = 0.2;
    cfg.beta1 = 0.5;
    cfg.beta2 = 0.99;
    cfg.weight_decay = 0.0;
    OptimizerState st = make_optimizer(refs, cfg);
    std::vector<std::vector<double>> g(1, std::vector<double>(4));
    auto gradient_norm = [&] {
        double n = 0.0;
        for (int i = 0; i < 4; ++i) {
            g[0][i] = a[i] * (p[i] - c[i]);
            n += g[0][i] * g[0][i];
        }
        return std::sqrt(n);
    };
    for (int it = 0; it < 100; ++it) {
        gradient_norm();
        adamw_step(refs, g, st);
    }
    EXPECT_LT(gradient_norm(), 1e-6);
}
