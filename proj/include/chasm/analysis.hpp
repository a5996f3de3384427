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

#pragma once

#include "chasm/linalg.hpp"
#include "chasm/mixer.hpp"
#include "chasm/operator.hpp"
#include "chasm/tensor.hpp"

#include <limits>
#include <vector>

namespace chasm {

inline constexpr int kDenseOracleMaxSize = 512;

/// The spectral core is linear in x, so it has a matrix. Column j is
/// spectral_core(e_j) evaluated through the naive-DFT path; vec() order is the
/// FeatureMap storage order (channel fastest).
Matrix dense_core_oracle(const MixerParams& p, int height, int width, int channels);

/// Singular values in descending order (one-sided Jacobi).
std::vector<double> svd_small(const Matrix& m);

struct DofReport {
    int channels = 0;
    int bins = 0;
    int expected_rank = 0;
    int measured_rank = 0;
    std::vector<double> singular_values;
    double tolerance = 0.0;  // relative threshold tau; rank counts sigma > tau * sigma_max
    bool generic = false;    // all joint spectral signatures pairwise distinct
    int jacobian_rows = 0;
    int jacobian_cols = 0;
};

inline constexpr double kRankTolerance = 1e-8;
inline constexpr double kSignatureSeparation = 1e-6;

/// Numerical rank of (theta, raw direct gain table) -> stacked upper triangles
/// (with diagonal) of M(0..K-1), by central differences.
DofReport dof_rank_check(const SkewParams& theta, const GainTable& gain_table_direct, double fd_step = 1e-5);

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(const FeatureMap& ref, const FeatureMap& test, double data_range);
/// PSNR with data range = max of the reference.
double psnr(const FeatureMap& ref, const FeatureMap& test);

struct SsimParams {
    int window = 7;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM over all fully contained Gaussian windows, on 1-channel maps.
double ssim(const FeatureMap& ref, const FeatureMap& test, double data_range, const SsimParams& sp = {});
double ssim(const FeatureMap& ref, const FeatureMap& test);

/// Normalized 1D Gaussian taps used by ssim().
std::vector<double> gaussian_window(int size, double sigma);

struct MetricReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;

    void add(double p, double s)
    {
        psnr.push_back(p);
        ssim.push_back(s);
    }
    void finalize();
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& v);

}  // namespace chasm
