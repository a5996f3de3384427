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

// Reverse-mode gradients for the mixer block.
//
// The forward pass records a trace (spectra, intermediate maps, realized
// operators); backward walks it in reverse. Complex gradients are carried as
// dL/dRe + i dL/dIm. The theta gradient goes through the Frechet derivative of
// the matrix exponential computed from the augmented block exponential.

#pragma once

#include "chasm/mixer.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace chasm {

enum class FrechetMode {
    /// One block exponential per basis: dL/dtheta = <L(A^T, dL/dU), dA/dtheta>.
    Adjoint,
    /// One block exponential per theta component: <dL/dU, L(A, E_m)>.
    PerComponent,
    /// Central differences of exp(A + t E_m), for cross-checking only.
    FiniteDifference,
};

struct GradOptions {
    FrechetMode frechet = FrechetMode::Adjoint;
    /// Negative control: flip the sign of the width-pass input adjoint.
    bool inject_cw_adjoint_fault = false;
};

/// Zero-filled parameter set with the same populated groups and shapes.
MixerParams zeros_like(const MixerParams& p);

struct MixerTrace {
    AxisOperator ch_op;
    AxisOperator cw_op;
    HalfSpectrum ch_spectrum;  // input spectrum of the height pass
    HalfSpectrum cw_spectrum;  // input spectrum of the width pass
    FeatureMap core_out;       // spectral core output
    FeatureMap pre_act;        // depthwise conv output
    FeatureMap act;            // GELU output
};

FeatureMap mixer_forward_traced(const FeatureMap& x, const MixerParams& p, MixerTrace& trace);

/// Accumulates parameter gradients into grads (same layout as p) and returns
/// dL/dx for upstream gradient gy = dL/dy.
FeatureMap mixer_backward(const MixerTrace& trace, const MixerParams& p, const FeatureMap& gy, MixerParams& grads,
                          const GradOptions& opt = {});

/// Gradient of the spectral core alone (no wrapper); used by the adjoint tests.
FeatureMap core_backward(const MixerTrace& trace, const MixerParams& p, const FeatureMap& g_core, MixerParams& grads,
                         const GradOptions& opt = {});

/// dL/dtheta for U = exp(A(theta)) given dL/dU.
std::vector<double> skew_gradient(const Matrix& a, const Matrix& g_u, FrechetMode mode);

enum class LossKind { L1, L2 };

std::string to_string(LossKind k);

/// Loss between the magnitude of a 2-channel output (re, im) and a 1-channel
/// target magnitude, averaged over pixels. Writes dL/d(output) into grad when
/// non-null.
double magnitude_loss(LossKind kind, const FeatureMap& out, const FeatureMap& target_mag, FeatureMap* grad);

struct GradCheckGroup {
    std::string name;
    std::size_t size = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t noise_limited = 0;  // entries below the floor, compared in absolute terms
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double tolerance = 0.0;
    double step = 0.0;
    double floor = 0.0;  // denominator floor actually used
    bool passed = false;

    double max_rel_error() const noexcept;
};

/// Relative error |a - n| / max(|a|, |n|, floor). A central difference of a
/// double-precision loss carries roundoff of about ulps * eps * |L| / step, so
/// the floor is that noise divided by the tolerance (and at least
/// kGradCheckFloor): entries too small to resolve are held to the noise level
/// in absolute terms, everything else to the tolerance in relative terms.
inline constexpr double kGradCheckFloor = 1e-6;
inline constexpr double kFdNoiseUlps = 8.0;

double grad_check_floor(double loss_value, double step, double tolerance);

/// Exhaustive central differences over every scalar in `params`; `analytic`
/// holds one gradient vector per group; `loss` re-evaluates the objective
/// from the current parameter storage.
GradCheckReport finite_difference_check(const std::vector<ParamGroupRef>& params,
                                        const std::vector<std::vector<double>>& analytic,
                                        const std::function<double()>& loss, double step, double tolerance);

struct AdamWConfig {
    double lr = 4e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct OptimizerState {
    AdamWConfig config;
    long step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

OptimizerState make_optimizer(const std::vector<ParamGroupRef>& params, const AdamWConfig& cfg = {});

/// Decoupled weight decay Adam update, in place.
void adamw_step(const std::vector<ParamGroupRef>& params, const std::vector<std::vector<double>>& grads,
                OptimizerState& state);

}  // namespace chasm
