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

// Toy reconstruction network: 1x1 lift (2 -> C), N mixer blocks, 1x1 head
// (C -> 2). Input and output are (re, im) channel pairs.

#pragma once

#include "chasm/grad.hpp"
#include "chasm/mixer.hpp"
#include "chasm/rng.hpp"
#include "chasm/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace chasm {

/// Per-position affine map, weight[out * in + i].
struct PointwiseMap {
    int in = 0;
    int out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    PointwiseMap() = default;
    PointwiseMap(int in_channels, int out_channels);

    FeatureMap apply(const FeatureMap& x) const;
    /// Accumulates weight/bias gradients into g and returns dL/dx.
    FeatureMap backward(const FeatureMap& x, const FeatureMap& gy, PointwiseMap& g) const;
};

struct ToyModelShape {
    int height = 64;
    int width = 64;
    int channels = 8;
    int bins_h = 9;
    int bins_w = 9;
    int blocks = 2;
    Variant variant = Variant::Chasm;
    AxisMode axis_mode = AxisMode::ChThenCw;
};

struct ToyModel {
    PointwiseMap lift;
    std::vector<MixerParams> blocks;
    PointwiseMap head;

    int channels() const noexcept { return lift.out; }
};

/// Canonical init: lift embeds (re, im) into channels 0 and 1, head reads them
/// back, every block is at its identity init. Lift rows of channels 2.. get
/// seeded N(0, lift_noise^2) weights; the head ignores those channels, so the
/// model is still the identity, but the extra channels are not dead at step 0.
/// The init depends on (shape without variant, seed) only through the lift.
inline constexpr double kLiftNoise = 0.5;
ToyModel build_toy_model(const ToyModelShape& shape, std::uint64_t seed, double lift_noise = kLiftNoise);

/// Parameter groups: lift.weight, lift.bias, block<i>.<group>..., head.weight, head.bias.
std::vector<ParamGroupRef> model_parameters(ToyModel& m);
std::size_t parameter_count(const ToyModel& m);

/// Closed-form count: (C(C-1) + (B_H + B_W) C per block core for the shared
/// variants) + 10C + C^2 + C per block wrapper + 3C lift + 2C + 2 head.
std::size_t expected_parameter_count(const ToyModelShape& s);

ToyModel zeros_like(const ToyModel& m);

struct ModelTrace {
    FeatureMap input;
    std::vector<FeatureMap> block_inputs;
    std::vector<MixerTrace> blocks;
    FeatureMap features;  // last block output, head input
};

FeatureMap model_forward(const ToyModel& m, const FeatureMap& x);
FeatureMap model_forward_traced(const ToyModel& m, const FeatureMap& x, ModelTrace& trace);
/// Accumulates into grads and returns dL/dx.
FeatureMap model_backward(const ModelTrace& t, const ToyModel& m, const FeatureMap& gy, ToyModel& grads,
                          const GradOptions& opt = {});

/// Random perturbation of every group, for gradient and oracle tests.
void randomize(MixerParams& p, Rng& rng, double scale = 0.5);
void randomize(ToyModel& m, Rng& rng, double scale = 0.5);

inline constexpr double kGradCheckStep = 1e-6;
inline constexpr double kGradCheckTolerance = 1e-5;

/// Exhaustive finite-difference check of model_backward on one instance.
GradCheckReport grad_check(ToyModel& m, const FeatureMap& x, const FeatureMap& target, LossKind loss,
                           double tolerance = kGradCheckTolerance, const GradOptions& opt = {},
                           double step = kGradCheckStep);

/// FNV-1a over the raw bytes of every parameter, for init-equality checks.
std::uint64_t parameter_hash(const std::vector<ParamGroupRef>& groups);

}  // namespace chasm
