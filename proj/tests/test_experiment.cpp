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

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace chasm;
using chasm::testing::random_map;

namespace {

ExperimentConfig tiny_config(const std::string& dir)
{
    ExperimentConfig c;
    c.height = c.width = 16;
    c.channels = 4;
    c.bins_h = c.bins_w = 3;
    c.blocks = 1;
    c.steps = 12;
    c.batch = 2;
    c.eval_every = 4;
    c.train_phantoms = 6;
    c.val_phantoms = 2;
    c.test_phantoms = 3;
    c.ellipses = 4;
    c.adamw.lr = 5e-3;
    c.seeds = {1, 2};
    c.out_dir = std::filesystem::temp_directory_path() / dir;
    return c;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const ExperimentConfig& c) : path(c.out_dir) { std::filesystem::remove_all(path); }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(ToyModel, IdentityAtInit)
{
    Rng rng(1);
    for (Variant v : kAllVariants) {
        const ToyModel m = build_toy_model({8, 6, 5, 3, 3, 2, v, AxisMode::ChThenCw}, 3);
        const FeatureMap x = random_map(8, 6, 2, rng);
        EXPECT_EQ(model_forward(m, x).raw(), x.raw()) << to_string(v);
    }
}

TEST(ToyModel, ParameterCountsMatchFormula)
{
    for (Variant v : kAllVariants)
        for (int c : {2, 4, 8})
            for (int blocks : {1, 2}) {
                const ToyModelShape s{12, 10, c, 4, 3, blocks, v, AxisMode::ChThenCw};
                EXPECT_EQ(parameter_count(build_toy_model(s, 0)), expected_parameter_count(s)) << to_string(v);
            }
    // default toy shape, CHASM: two blocks of (2 * 28 + 18 * 8) core + 152 wrapper, plus 42
    EXPECT_EQ(expected_parameter_count({64, 64, 8, 9, 9, 2, Variant::Chasm, AxisMode::ChThenCw}),
              2u * (200 + 152) + 42);
}

TEST(ToyModel, CanonicalGroupOrder)
{
    ToyModel m = build_toy_model({6, 6, 3, 2, 2, 1, Variant::ComplexGain, AxisMode::ChThenCw}, 0);
    std::vector<std::string> names;
    for (const auto& g : model_parameters(m)) names.push_back(g.name);
    ASSERT_GE(names.size(), 4u);
    EXPECT_EQ(names.front(), "lift.weight");
    EXPECT_EQ(names[1], "lift.bias");
    EXPECT_EQ(names.back(), "head.bias");
    EXPECT_EQ(names[2].rfind("block0.ch.", 0), 0u);
}

TEST(ToyModel, ParameterHashTracksValues)
{
    ToyModel a = build_toy_model({6, 6, 3, 2, 2, 1}, 4), b = build_toy_model({6, 6, 3, 2, 2, 1}, 4);
    EXPECT_EQ(parameter_hash(model_parameters(a)), parameter_hash(model_parameters(b)));
    b.head.bias[0] = 1e-300;
    EXPECT_NE(parameter_hash(model_parameters(a)), parameter_hash(model_parameters(b)));
    ToyModel c = build_toy_model({6, 6, 3, 2, 2, 1}, 5);
    EXPECT_NE(parameter_hash(model_parameters(a)), parameter_hash(model_parameters(c)));
}

TEST(Config, CanonicalSortedAndHashStable)
{
    ExperimentConfig c;
    const std::string s = c.canonical();
    EXPECT_EQ(s.rfind("accel=4\n", 0), 0u);
    EXPECT_NE(s.find("center_fraction=0.08"), std::string::npos);
    EXPECT_EQ(s.find("seeds"), std::string::npos);
    EXPECT_EQ(c.hash().size(), 16u);
    ExperimentConfig d = c;
    d.seeds = {9};
    d.out_dir = "elsewhere";
    EXPECT_EQ(c.hash(), d.hash());
    d.adamw.lr *= 2;
    EXPECT_NE(c.hash(), d.hash());
}

TEST(Config, SettingsAndErrors)
{
    ExperimentConfig c;
    apply_setting(c, " size ", " 32 ");
    apply_setting(c, "variant", "UntiedBasis");
    apply_setting(c, "axis_mode", "ChPlusCw");
    apply_setting(c, "mask", "random");
    apply_setting(c, "random_keep_center", "true");
    apply_setting(c, "seeds", "4, 5,6");
    EXPECT_EQ(c.height, 32);
    EXPECT_EQ(c.width, 32);
    EXPECT_EQ(c.variant, Variant::UntiedBasis);
    EXPECT_EQ(c.axis_mode, AxisMode::ChPlusCw);
    EXPECT_EQ(c.mask, MaskKind::Random);
    EXPECT_TRUE(c.random_keep_center);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5, 6}));
    EXPECT_THROW(apply_setting(c, "colour", "red"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "steps", "ten"), std::invalid_argument);
    EXPECT_THROW(apply_setting(c, "variant", "Chasmish"), std::invalid_argument);
    EXPECT_THROW(parse_seed_list("1,x"), std::invalid_argument);
    c.channels = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, LoadFileWithComments)
{
    const auto p = std::filesystem::temp_directory_path() / "chasm_test_config.txt";
    std::ofstream(p) << "# toy\nsteps = 50   # short\n\naccel=8\n";
    const ExperimentConfig c = load_config(p);
    EXPECT_EQ(c.steps, 50);
    EXPECT_EQ(c.accel, 8.0);
    EXPECT_NEAR(c.effective_center_fraction(), 0.04, 1e-15);
    std::ofstream(p) << "steps\n";
    EXPECT_THROW(load_config(p), std::invalid_argument);
    std::filesystem::remove(p);
}

TEST(Dataset, SharedAcrossVariantsAndMaskSeeding)
{
    ExperimentConfig c = tiny_config("chasm_test_dataset");
    const Dataset a = make_dataset(c, 1);
    c.variant = Variant::IdentityBasis;
    const Dataset b = make_dataset(c, 1);
    EXPECT_EQ(a.train[3].input.raw(), b.train[3].input.raw());
    EXPECT_EQ(a.test[0].target.raw(), b.test[0].target.raw());
    EXPECT_EQ(a.mask, make_dataset(c, 2).mask);  // structured: fixed
    c.mask = MaskKind::Random;
    const Dataset r1 = make_dataset(c, 1);
    c.variant = Variant::Chasm;
    EXPECT_EQ(r1.mask, make_dataset(c, 1).mask);
    EXPECT_NE(r1.mask, make_dataset(c, 2).mask);
    EXPECT_EQ(r1.mask.count(), a.mask.count());
    EXPECT_NE(a.train[0].target.raw(), a.val[0].target.raw());
}

TEST(Training, ZeroStepsEqualsZeroFilled)
{
    ExperimentConfig c = tiny_config("chasm_test_zero");
    c.steps = 0;
    const RunRecord r = run_train(c, 1);
    ASSERT_EQ(r.test.psnr.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(r.test.psnr[i], r.zero_filled.psnr[i]);
        EXPECT_EQ(r.test.ssim[i], r.zero_filled.ssim[i]);
    }
    EXPECT_EQ(r.best_step, 0);
}

TEST(Training, DeterministicPerSeed)
{
    ExperimentConfig c = tiny_config("chasm_test_det");
    const RunRecord a = run_train(c, 1), b = run_train(c, 1);
    EXPECT_EQ(serialize(a), serialize(b));
    EXPECT_FALSE(a.diverged);
    EXPECT_EQ(a.trajectory.size(), 4u);
    EXPECT_EQ(a.total_parameters, expected_parameter_count(c.model_shape()));
    EXPECT_NE(serialize(a), serialize(run_train(c, 2)));
}

TEST(Training, WrapperInitSharedAcrossVariants)
{
    ExperimentConfig c = tiny_config("chasm_test_init");
    c.steps = 0;
    const std::string h = run_train(c, 1).wrapper_init_hash;
    for (Variant v : kAllVariants)
        for (AxisMode m : {AxisMode::ChOnly, AxisMode::ChPlusCw}) {
            c.variant = v;
            c.axis_mode = m;
            EXPECT_EQ(run_train(c, 1).wrapper_init_hash, h) << to_string(v);
        }
    EXPECT_NE(run_train(c, 2).wrapper_init_hash, h);
}

TEST(Records, RoundTripAndReuse)
{
    ExperimentConfig c = tiny_config("chasm_test_records");
    TempDir guard(c);
    const RunRecord r = run_or_load(c, 1, false);
    const auto dir = run_directory(c, 1);
    for (const char* f : {"trajectory.csv", "cases.csv", "params.csv", "final.csv", "record.txt", "wall_time.txt"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto back = read_final_record(dir);
    ASSERT_TRUE(back);
    EXPECT_EQ(serialize(*back), serialize(r));
    EXPECT_EQ(serialize(run_or_load(c, 1, true)), serialize(r));
    ExperimentConfig other = c;
    other.steps = 4;
    EXPECT_NE(run_directory(other, 1), dir);
}

TEST(Ablation, TableAndFalsificationArithmetic)
{
    ExperimentConfig c = tiny_config("chasm_test_ablation");
    TempDir guard(c);
    c.steps = 4;
    c.seeds = {1};
    const AblationTable t = run_ablation(c, {{Variant::Chasm, AxisMode::ChThenCw}, {Variant::IdentityBasis, AxisMode::ChThenCw}});
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(t.wrapper_init_identical);
    ASSERT_NE(t.find(Variant::IdentityBasis, AxisMode::ChThenCw), nullptr);
    EXPECT_EQ(t.find(Variant::UntiedBasis, AxisMode::ChThenCw), nullptr);
    EXPECT_NE(t.render().find("IdentityBasis"), std::string::npos);
    EXPECT_NEAR(mask_drop(0.5, 0.1), 0.8, 1e-15);
    EXPECT_NEAR(mask_drop(0.5, -0.1), 1.2, 1e-15);
    EXPECT_TRUE(std::isnan(mask_drop(0.0, 0.1)));
}
