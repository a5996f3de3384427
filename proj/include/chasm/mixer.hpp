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

// Axis-separable spectral core and the full mixer block
//
//     Y = X + P_fuse(GELU(dwconv3x3(core(X))))
//
// plus the ablation cores (identity basis, untied basis, signed gains,
// complex gains) and the five axis compositions.

#pragma once

#include "chasm/operator.hpp"
#include "chasm/tensor.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chasm {

enum class Variant { Chasm, IdentityBasis, UntiedBasis, SignedGain, ComplexGain };
enum class AxisMode { ChOnly, CwOnly, ChThenCw, CwThenCh, ChPlusCw };

/// Which transform implementation the spectral passes use. Naive is the O(n^2)
/// direct DFT, for oracles only.
enum class Transform { Fast, Naive };

inline constexpr Variant kAllVariants[] = {Variant::Chasm, Variant::IdentityBasis, Variant::UntiedBasis,
                                           Variant::SignedGain, Variant::ComplexGain};
inline constexpr AxisMode kAllAxisModes[] = {AxisMode::ChOnly, AxisMode::CwOnly, AxisMode::ChThenCw,
                                             AxisMode::CwThenCh, AxisMode::ChPlusCw};

std::string to_string(Variant v);
std::string to_string(AxisMode m);
std::optional<Variant> parse_variant(std::string_view s);
std::optional<AxisMode> parse_axis_mode(std::string_view s);

GainMode gain_mode(Variant v) noexcept;

/// Depthwise 3x3 kernel per channel, kernel[c * 9 + dy * 3 + dx], plus bias.
struct RefineWeights {
    int channels = 0;
    std::vector<double> kernel;
    std::vector<double> bias;

    /// Center-one kernel, zero bias: the identity convolution.
    static RefineWeights identity(int channels);
};

/// Pointwise C -> C map, weight[out * C + in], plus bias.
struct FuseWeights {
    int channels = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    static FuseWeights zeros(int channels);
    static FuseWeights identity(int channels);
};

struct MixerParams {
    Variant variant = Variant::Chasm;
    AxisMode axis_mode = AxisMode::ChThenCw;
    AxisOperatorParams ch;
    AxisOperatorParams cw;
    RefineWeights refine;
    FuseWeights fuse;

    int channels() const noexcept { return refine.channels; }
    std::size_t core_parameter_count() const noexcept { return ch.parameter_count() + cw.parameter_count(); }
    std::size_t wrapper_parameter_count() const noexcept
    {
        return refine.kernel.size() + refine.bias.size() + fuse.weight.size() + fuse.bias.size();
    }
    std::size_t parameter_count() const noexcept { return core_parameter_count() + wrapper_parameter_count(); }

    /// Throws std::invalid_argument if the populated groups do not match the
    /// variant or the channel counts disagree.
    void validate() const;
};

struct MixerShape {
    int height = 0;
    int width = 0;
    int channels = 0;
    int bins_h = 0;  // B_H
    int bins_w = 0;  // B_W
};

/// Identity-at-init parameters: theta = 0, raw gains = identity_gain_raw()
/// (1 for signed gains), zero phases, center-one refine kernel, zero fuse.
/// Height/width in the shape only matter for the untied variant, whose gain
/// and basis tables are per retained bin.
MixerParams make_mixer_params(const MixerShape& shape, Variant variant = Variant::Chasm,
                              AxisMode mode = AxisMode::ChThenCw);

/// Canonical parameter groups in serialization order: ch core, cw core, then
/// refine kernel/bias and fuse weight/bias. Empty groups are skipped.
struct ParamGroupRef {
    std::string name;
    std::vector<double>* values;
};
std::vector<ParamGroupRef> parameter_groups(MixerParams& p, const std::string& prefix = "");

/// Operator of one axis realized for a concrete transform length.
struct AxisOperator {
    Axis axis = Axis::Height;
    Variant variant = Variant::Chasm;
    int length = 0;  // n along the axis
    int bins = 0;    // K
    int channels = 0;
    std::vector<OrthoBasis> bases;  // 1 shared basis, or K for the untied variant
    std::vector<Matrix> skews;      // A matrices matching bases (empty for IdentityBasis)
    GainTable pre;                  // interpolated raw gains, K x C
    GainVectors magnitude;          // activated gains, K x C
    std::vector<double> phase;      // K x C, complex variant only (pinned at DC/Nyquist)

    const OrthoBasis& basis(int k) const noexcept { return bases.size() == 1 ? bases[0] : bases[k]; }
};

AxisOperator realize(const AxisOperatorParams& p, Variant variant, int length);

/// Interpolated phases with the DC bin and, for even n, the Nyquist bin forced to zero.
std::vector<double> interpolate_phases(const GainTable& phases, int K, int n);

/// rfft along the operator's axis, per-bin operator, inverse rfft. When
/// spectrum_out is non-null the input spectrum is stored there.
FeatureMap axis_pass(const FeatureMap& x, const AxisOperator& op, Transform t = Transform::Fast,
                     HalfSpectrum* spectrum_out = nullptr);

FeatureMap ch_plane_pass(const FeatureMap& x, const AxisOperatorParams& p, Variant variant = Variant::Chasm,
                         Transform t = Transform::Fast);
FeatureMap cw_plane_pass(const FeatureMap& x, const AxisOperatorParams& p, Variant variant = Variant::Chasm,
                         Transform t = Transform::Fast);

/// Dispatch on axis mode; ChPlusCw sums the two pass outputs.
FeatureMap spectral_core(const FeatureMap& x, const MixerParams& p, Transform t = Transform::Fast);
/// Spectral core evaluated with an explicit variant; throws if the parameter
/// groups do not fit that variant.
FeatureMap variant_core(const FeatureMap& x, const MixerParams& p, Variant variant, Transform t = Transform::Fast);

double gelu(double x) noexcept;
double gelu_grad(double x) noexcept;

/// Depthwise 3x3 convolution, zero padding 1, stride 1, plus bias (no activation).
FeatureMap depthwise_conv3x3(const FeatureMap& x, const RefineWeights& w);
/// GELU(depthwise_conv3x3(x))
FeatureMap local_refine(const FeatureMap& x, const RefineWeights& w);
FeatureMap fuse(const FeatureMap& x, const FuseWeights& w);

FeatureMap mixer_forward(const FeatureMap& x, const MixerParams& p, Transform t = Transform::Fast);

}  // namespace chasm
