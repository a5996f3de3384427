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

// Experiment runners for the toy reconstruction task: configuration,
// training, seed sweeps, ablation tables, mask falsification and the
// verification suite.

#pragma once

#include "chasm/analysis.hpp"
#include "chasm/grad.hpp"
#include "chasm/model.hpp"
#include "chasm/mri.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace chasm {

enum class LrSchedule { Constant, Cosine };

struct ExperimentConfig {
    int height = 64;
    int width = 64;
    int channels = 8;
    int bins_h = 9;
    int bins_w = 9;
    int blocks = 2;
    Variant variant = Variant::Chasm;
    AxisMode axis_mode = AxisMode::ChThenCw;
    MaskKind mask = MaskKind::Structured;
    double accel = 4.0;
    double center_fraction = -1.0;  // < 0: 0.08 at R=4, 0.04 at R=8 (0.32 / R)
    bool random_keep_center = false;
    LossKind loss = LossKind::L1;
    AdamWConfig adamw;
    LrSchedule lr_schedule = LrSchedule::Constant;
    int steps = 2000;
    int batch = 4;
    int eval_every = 100;
    int train_phantoms = 200;
    int val_phantoms = 32;
    int test_phantoms = 32;
    int ellipses = 12;
    std::uint64_t data_seed = 20240501;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::filesystem::path out_dir = "runs";

    double effective_center_fraction() const noexcept;
    ToyModelShape model_shape() const noexcept;
    /// Throws std::invalid_argument on any non-positive size or empty seed list.
    void validate() const;

    /// Canonical "key=value" lines, sorted by key. Excludes seeds and out_dir.
    std::string canonical() const;
    /// FNV-1a of canonical(), as 16 hex digits.
    std::string hash() const;
};

/// Applies one key=value setting; throws on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Documented keys with their current values, one per line.
std::string describe_keys(const ExperimentConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(const std::string& s);

/// Input/target pair: zero-filled image as 2 channels, ground-truth magnitude.
struct Sample {
    FeatureMap input;
    FeatureMap target;
};

struct Dataset {
    std::vector<Sample> train, val, test;
    SamplingMask mask;
};

/// Train/val/test phantoms come from disjoint seed streams of data_seed, so
/// every variant sees identical data. Structured masks are fixed; random masks
/// are drawn per run seed (identical across variants for that seed).
Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Mean PSNR/SSIM of |model(x)| against the target magnitude.
MetricReport evaluate(const ToyModel& m, const std::vector<Sample>& set);
MetricReport evaluate_zero_filled(const std::vector<Sample>& set);

struct EvalPoint {
    int step = 0;
    double train_loss = 0.0;  // mean over the steps since the last eval
    double val_psnr = 0.0;
    double val_ssim = 0.0;
};

struct RunRecord {
    std::string config_hash;
    std::uint64_t seed = 0;
    Variant variant = Variant::Chasm;
    AxisMode axis_mode = AxisMode::ChThenCw;
    MaskKind mask = MaskKind::Structured;
    double accel = 0.0;
    int mask_lines = 0;
    std::vector<EvalPoint> trajectory;
    int best_step = 0;
    MetricReport test;         // best-val checkpoint on the test phantoms
    MetricReport zero_filled;  // model input on the test phantoms
    std::vector<std::pair<std::string, std::size_t>> parameter_counts;
    std::size_t total_parameters = 0;
    std::string wrapper_init_hash;  // non-core parameters at init
    bool diverged = false;
    std::string diagnostic;
    double wall_seconds = 0.0;  // not part of the reproducible record
};

/// Deterministic text form of everything except wall time.
std::string serialize(const RunRecord& r);
/// Writes trajectory.csv, final.csv, params.csv and wall_time.txt into dir.
void write_run_record(const RunRecord& r, const std::filesystem::path& dir);
std::optional<RunRecord> read_final_record(const std::filesystem::path& dir);

/// Directory name for one (config, seed) run under cfg.out_dir.
std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed);

using ProgressFn = std::function<void(const std::string&)>;

RunRecord run_train(const ExperimentConfig& cfg, std::uint64_t seed, const ProgressFn& progress = {});

/// Runs (or, with reuse, reads back) the record for cfg/seed.
RunRecord run_or_load(const ExperimentConfig& cfg, std::uint64_t seed, bool reuse, const ProgressFn& progress = {});

struct AblationRow {
    Variant variant = Variant::Chasm;
    AxisMode axis_mode = AxisMode::ChThenCw;
    MaskKind mask = MaskKind::Structured;
    std::vector<RunRecord> runs;
    MeanStd psnr, ssim, zf_psnr;
    std::size_t parameters = 0;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    bool wrapper_init_identical = true;  // per seed, across all rows
    std::string render() const;
    void write_csv(const std::filesystem::path& path) const;
    const AblationRow* find(Variant v, AxisMode m) const;
};

struct AblationEntry {
    Variant variant;
    AxisMode axis_mode;
};

AblationTable run_ablation(const ExperimentConfig& cfg, const std::vector<AblationEntry>& entries, bool reuse = false,
                           const ProgressFn& progress = {});

struct FalsificationReport {
    AblationTable structured;
    AblationTable random;
    Variant best_structured_baseline = Variant::IdentityBasis;
    Variant best_random_baseline = Variant::IdentityBasis;
    double delta_structured = 0.0;
    double delta_random = 0.0;
    double drop = 0.0;
    std::string render() const;
};

/// Drop = 1 - delta_random / delta_structured.
double mask_drop(double delta_structured, double delta_random);

/// CHASM versus the best non-CHASM core variant, under structured and random
/// masks with the same budget and seeds.
FalsificationReport run_mask_falsification(const ExperimentConfig& cfg, bool reuse = false,
                                           const ProgressFn& progress = {});

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    double seconds = 0.0;
    bool passed() const noexcept;
    std::string render() const;
};

/// The property suite: transforms, bases, identity-at-init, linearity,
/// realness, reindexing, normal operators, gradients, dense oracle, rank.
VerifyReport run_verify();

}  // namespace chasm
