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

// Cartesian MRI simulation: phantoms, coil maps, line masks, and the
// single/multi-coil measurement operators. k-space uses the centered unitary
// 2D DFT (1/sqrt(HW) both ways), so F^* F = I. Phase-encode lines are rows
// (the height index).

#pragma once

#include "chasm/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace chasm {

enum class MaskKind { Structured, Random };

std::string to_string(MaskKind k);

struct SamplingMask {
    std::vector<std::uint8_t> selected;  // one flag per phase-encode line
    MaskKind kind = MaskKind::Structured;
    double acceleration = 1.0;
    double center_fraction = 0.0;

    int lines() const noexcept { return int(selected.size()); }
    int count() const noexcept;
    bool operator==(const SamplingMask&) const = default;
};

/// round(lines / R), at least 1.
int line_budget(int lines, double acceleration);
/// ceil(center_fraction * lines), capped at the line budget.
int center_block_size(int lines, double acceleration, double center_fraction);
/// First index of the center block of `size` lines around the DC row lines/2.
int center_block_start(int lines, int size);

/// Fully sampled center block plus equispaced outer lines up to the budget.
/// Deterministic; the seed does not affect the pattern.
SamplingMask make_structured_mask(int lines, double acceleration, double center_fraction, std::uint64_t seed);

/// Same budget, lines drawn uniformly without replacement. With keep_center the
/// structured center block is kept and only the remainder is random.
SamplingMask make_random_mask(int lines, double acceleration, std::uint64_t seed, bool keep_center = false,
                              double center_fraction = 0.0);

struct Ellipse {
    double cx, cy;      // center in normalized [-1, 1] coordinates
    double ax, ay;      // semi-axes
    double angle;       // radians
    double intensity;   // additive
};

struct Phantom {
    ComplexImage image;
    std::uint64_t seed = 0;
    std::vector<Ellipse> ellipses;
};

Phantom make_phantom(int height, int width, std::uint64_t seed, int n_ellipses);

struct CoilSet {
    std::vector<ComplexImage> maps;
    int count() const noexcept { return int(maps.size()); }
};

/// Smooth complex Gaussian sensitivities around the field of view, normalized
/// so that sum_c |S_c|^2 = 1 at every pixel.
CoilSet make_coils(int height, int width, int n_coils);

/// Unitary centered 2D DFT (and its inverse).
ComplexImage centered_fft2(const ComplexImage& x);
ComplexImage centered_ifft2(const ComplexImage& k);

/// Zeroes the unselected rows of k-space.
void apply_mask(ComplexImage& kspace, const SamplingMask& mask);

ComplexImage forward_single(const ComplexImage& x, const SamplingMask& mask);
ComplexImage adjoint_single(const ComplexImage& y, const SamplingMask& mask);
ComplexImage normal_single(const ComplexImage& x, const SamplingMask& mask);

std::vector<ComplexImage> forward_multi(const ComplexImage& x, const SamplingMask& mask, const CoilSet& coils);
ComplexImage adjoint_multi(std::span<const ComplexImage> y, const SamplingMask& mask, const CoilSet& coils);
ComplexImage normal_multi(const ComplexImage& x, const SamplingMask& mask, const CoilSet& coils);

ComplexImage zero_filled_recon(const ComplexImage& kspace, const SamplingMask& mask);

/// |x| as a 1-channel map.
FeatureMap magnitude(const ComplexImage& x);

/// Flat dump: ASCII header lines ("key value"), terminated by "end\n",
/// followed by little-endian IEEE-754 float64 payload.
struct DumpHeader {
    std::string kind;
    std::string dtype;  // "float64" or "complex128" (interleaved re, im)
    std::vector<int> dims;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> extra;
};

void write_dump(const std::filesystem::path& path, const DumpHeader& header, std::span<const double> payload);
std::vector<double> read_dump(const std::filesystem::path& path, DumpHeader& header);

void dump_phantom(const std::filesystem::path& path, const Phantom& p);
void dump_mask(const std::filesystem::path& path, const SamplingMask& m, std::uint64_t seed);

}  // namespace chasm
