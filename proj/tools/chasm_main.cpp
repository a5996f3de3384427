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

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace chasm;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string seeds;
    std::string variant;
    std::string axis_mode;
    std::string mask;
    std::optional<double> accel;
    bool random_keep_center = false;
    std::string out;
    std::vector<std::string> sets;
    bool reuse = false;
};

void add_common(CLI::App* app, CommonOptions& o)
{
    app->add_option("--config", o.config, "key=value config file");
    app->add_option("--seed", o.seed, "single run seed (overrides --seeds)");
    app->add_option("--seeds", o.seeds, "comma-separated run seeds");
    app->add_option("--variant", o.variant, "Chasm, IdentityBasis, UntiedBasis, SignedGain or ComplexGain");
    app->add_option("--axis-mode", o.axis_mode, "ChOnly, CwOnly, ChThenCw, CwThenCh or ChPlusCw");
    app->add_option("--mask", o.mask, "structured or random")->check(CLI::IsMember({"structured", "random"}));
    app->add_option("--accel", o.accel, "acceleration factor R");
    app->add_flag("--random-keep-center", o.random_keep_center, "random masks keep the structured center block");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--set", o.sets, "extra config override key=value (repeatable)");
    app->add_flag("--reuse", o.reuse, "reuse finished runs with a matching config hash");
}

ExperimentConfig build_config(const CommonOptions& o)
{
    ExperimentConfig c;
    if (!o.config.empty()) c = load_config(o.config, c);
    if (!o.seeds.empty()) c.seeds = parse_seed_list(o.seeds);
    if (o.seed) c.seeds = {*o.seed};
    if (!o.variant.empty()) apply_setting(c, "variant", o.variant);
    if (!o.axis_mode.empty()) apply_setting(c, "axis_mode", o.axis_mode);
    if (!o.mask.empty()) apply_setting(c, "mask", o.mask);
    if (o.accel) c.accel = *o.accel;
    if (o.random_keep_center) c.random_keep_center = true;
    if (!o.out.empty()) c.out_dir = o.out;
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    c.validate();
    return c;
}

void log_line(const std::string& m) { std::cerr << m << std::endl; }

std::optional<FrechetMode> parse_frechet(const std::string& s)
{
    if (s == "adjoint") return FrechetMode::Adjoint;
    if (s == "per-component") return FrechetMode::PerComponent;
    if (s == "fd") return FrechetMode::FiniteDifference;
    return std::nullopt;
}

int cmd_grad_check(const std::string& variant, const std::string& mode, int instances, int h, int w, int c,
                   const std::string& loss, const std::string& frechet, bool fault, const std::string& csv_path)
{
    std::vector<Variant> variants(std::begin(kAllVariants), std::end(kAllVariants));
    std::vector<AxisMode> modes(std::begin(kAllAxisModes), std::end(kAllAxisModes));
    if (!variant.empty()) variants = {parse_variant(variant).value()};
    if (!mode.empty()) modes = {parse_axis_mode(mode).value()};
    GradOptions opt;
    opt.frechet = parse_frechet(frechet).value();
    opt.inject_cw_adjoint_fault = fault;
    const LossKind lk = loss == "l1" ? LossKind::L1 : LossKind::L2;

    std::ostringstream csv;
    csv << "variant,axis_mode,instance,group,size,max_rel_error,max_abs_error,noise_limited,floor,passed\n";
    std::printf("%-14s %-9s %4s  %-28s %6s  %12s  %12s\n", "variant", "mode", "inst", "group", "size", "max_rel",
                "max_abs");
    bool all = true;
    double worst = 0.0;
    for (Variant v : variants)
        for (AxisMode m : modes)
            for (int inst = 0; inst < instances; ++inst) {
                const std::uint64_t seed = 9000 + 100 * std::uint64_t(v) + 10 * std::uint64_t(m) + inst;
                ToyModel model = build_toy_model({h, w, c, 3, 2, 1, v, m}, seed);
                Rng rng(derive_seed(seed, 1));
                randomize(model, rng, 0.4);
                FeatureMap x(h, w, 2), t(h, w, 1);
                for (double& e : x.values()) e = rng.normal();
                for (double& e : t.values()) e = 0.5 + rng.uniform();
                const GradCheckReport r = grad_check(model, x, t, lk, kGradCheckTolerance, opt);
                all = all && r.passed;
                worst = std::max(worst, r.max_rel_error());
                for (const auto& g : r.groups) {
                    std::printf("%-14s %-9s %4d  %-28s %6zu  %12.3e  %12.3e%s\n", to_string(v).c_str(),
                                to_string(m).c_str(), inst, g.name.c_str(), g.size, g.max_rel_error, g.max_abs_error,
                                g.max_rel_error < r.tolerance ? "" : "  FAIL");
                    csv << to_string(v) << "," << to_string(m) << "," << inst << "," << g.name << "," << g.size << ","
                        << g.max_rel_error << "," << g.max_abs_error << "," << g.noise_limited << "," << r.floor << ","
                        << (g.max_rel_error < r.tolerance) << "\n";
                }
            }
    if (csv_path.empty()) {
        std::cout << "\n# csv\n" << csv.str();
    } else {
        std::ofstream f(csv_path);
        f << csv.str();
    }
    std::printf("%s: max relative error %.3e (tolerance %.0e, step %.0e)\n", all ? "PASS" : "FAIL", worst,
                kGradCheckTolerance, kGradCheckStep);
    return all ? 0 : 1;
}

int cmd_dof_check(int channels, int bins, int trials, bool degenerate, std::uint64_t seed)
{
    Rng rng(seed);
    std::printf("%5s %3s %3s %9s %9s %8s %12s %12s\n", "trial", "C", "K", "expected", "measured", "generic",
                "sigma_max", "sigma_min");
    int bad = 0;
    for (int t = 0; t < trials; ++t) {
        SkewParams sp = SkewParams::zeros(channels);
        for (double& v : sp.theta) v = rng.normal();
        GainTable g(bins, channels, 0.0);
        for (double& v : g.gamma) v = rng.normal();
        if (degenerate && channels >= 2)
            for (int k = 0; k < bins; ++k) g.at(k, 1) = g.at(k, 0);
        const DofReport r = dof_rank_check(sp, g);
        const int want = degenerate ? r.expected_rank - 1 : r.expected_rank;
        if (r.measured_rank != want) ++bad;
        std::printf("%5d %3d %3d %9d %9d %8s %12.4e %12.4e%s\n", t, r.channels, r.bins, r.expected_rank,
                    r.measured_rank, r.generic ? "yes" : "no", r.singular_values.front(), r.singular_values.back(),
                    r.measured_rank == want ? "" : "  MISMATCH");
    }
    std::printf("tolerance tau = %.0e (rank counts sigma > tau * sigma_max); %d mismatches\n", kRankTolerance, bad);
    return bad == 0 ? 0 : 1;
}

void print_record(const RunRecord& r)
{
    std::printf("%s %s %s R=%g seed=%llu: test PSNR %.3f +- %.3f  SSIM %.4f  (zero-filled %.3f / %.4f)  best step %d  "
                "params %zu  %.1fs%s\n",
                to_string(r.variant).c_str(), to_string(r.axis_mode).c_str(), to_string(r.mask).c_str(), r.accel,
                static_cast<unsigned long long>(r.seed), r.test.psnr_mean, r.test.psnr_std, r.test.ssim_mean,
                r.zero_filled.psnr_mean, r.zero_filled.ssim_mean, r.best_step, r.total_parameters, r.wall_seconds,
                r.diverged ? ("  DIVERGED: " + r.diagnostic).c_str() : "");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"chasm: harmonized axis-separable spectral mixer toolkit"};
    app.require_subcommand(1);
    bool verify_fft = false;
    app.add_flag("--verify-fft", verify_fft, "check the imaginary residue of every inverse real FFT");

    auto* verify = app.add_subcommand("verify", "run the property verification suite");

    auto* gc = app.add_subcommand("grad-check", "exhaustive finite-difference gradient check");
    std::string gc_variant, gc_mode, gc_loss = "l2", gc_frechet = "adjoint", gc_csv;
    int gc_inst = 3, gc_h = 6, gc_w = 6, gc_c = 4;
    bool gc_fault = false;
    gc->add_option("--variant", gc_variant, "restrict to one variant (default: all)");
    gc->add_option("--axis-mode", gc_mode, "restrict to one axis mode (default: all)");
    gc->add_option("--instances", gc_inst, "random instances per combination");
    gc->add_option("--height", gc_h);
    gc->add_option("--width", gc_w);
    gc->add_option("--channels", gc_c);
    gc->add_option("--loss", gc_loss)->check(CLI::IsMember({"l1", "l2"}));
    gc->add_option("--frechet", gc_frechet, "adjoint, per-component or fd")
        ->check(CLI::IsMember({"adjoint", "per-component", "fd"}));
    gc->add_flag("--inject-fault", gc_fault, "negate the width-pass input adjoint (negative control)");
    gc->add_option("--csv", gc_csv, "write the CSV here instead of stdout");

    auto* dof = app.add_subcommand("dof-check", "Jacobian rank of the harmonized parameterization");
    int dof_c = 3, dof_k = 4, dof_trials = 20;
    bool dof_degenerate = false;
    std::uint64_t dof_seed = 1;
    dof->add_option("--channels", dof_c);
    dof->add_option("--bins", dof_k);
    dof->add_option("--trials", dof_trials);
    dof->add_option("--seed", dof_seed);
    dof->add_flag("--degenerate", dof_degenerate, "make gain columns 0 and 1 coincide (expects rank - 1)");

    CommonOptions train_o, abl_o, fal_o;
    auto* train = app.add_subcommand("train", "train the toy reconstruction model");
    add_common(train, train_o);
    train->add_flag("--print-config", "print the effective configuration and exit");

    auto* abl = app.add_subcommand("ablate", "core-variant and axis-mode ablation tables");
    add_common(abl, abl_o);
    std::string study = "all";
    abl->add_option("--study", study, "variants, axes or all")->check(CLI::IsMember({"variants", "axes", "all"}));

    auto* fal = app.add_subcommand("falsify-mask", "structured versus random mask falsification");
    add_common(fal, fal_o);

    auto* dump = app.add_subcommand("dump-phantom", "write a phantom and its sampling mask as flat dumps");
    int dp_h = 64, dp_w = 64, dp_ell = 12;
    std::uint64_t dp_seed = 0;
    std::string dp_out = ".", dp_mask = "structured";
    double dp_accel = 4.0;
    bool dp_keep = false;
    dump->add_option("--seed", dp_seed);
    dump->add_option("--height", dp_h);
    dump->add_option("--width", dp_w);
    dump->add_option("--ellipses", dp_ell);
    dump->add_option("--mask", dp_mask)->check(CLI::IsMember({"structured", "random"}));
    dump->add_option("--accel", dp_accel);
    dump->add_flag("--random-keep-center", dp_keep);
    dump->add_option("--out", dp_out, "output directory");

    CLI11_PARSE(app, argc, argv);
    set_verify_fft(verify_fft);

    try {
        if (*verify) {
            const VerifyReport r = run_verify();
            std::cout << r.render();
            return r.passed() ? 0 : 1;
        }
        if (*gc) return cmd_grad_check(gc_variant, gc_mode, gc_inst, gc_h, gc_w, gc_c, gc_loss, gc_frechet, gc_fault, gc_csv);
        if (*dof) return cmd_dof_check(dof_c, dof_k, dof_trials, dof_degenerate, dof_seed);
        if (*train) {
            const ExperimentConfig cfg = build_config(train_o);
            if (train->count("--print-config")) {
                std::cout << describe_keys(cfg) << "config_hash=" << cfg.hash() << "\n";
                return 0;
            }
            bool ok = true;
            for (std::uint64_t s : cfg.seeds) {
                const RunRecord r = run_or_load(cfg, s, train_o.reuse, log_line);
                print_record(r);
                std::printf("  record: %s\n", run_directory(cfg, s).string().c_str());
                ok = ok && !r.diverged;
            }
            return ok ? 0 : 2;
        }
        if (*abl) {
            const ExperimentConfig cfg = build_config(abl_o);
            std::vector<AblationEntry> entries;
            if (!abl_o.variant.empty() || !abl_o.axis_mode.empty()) {
                entries.push_back({cfg.variant, cfg.axis_mode});
            } else {
                if (study != "axes")
                    for (Variant v : kAllVariants) entries.push_back({v, AxisMode::ChThenCw});
                if (study != "variants")
                    for (AxisMode m : kAllAxisModes)
                        if (study == "axes" || m != AxisMode::ChThenCw) entries.push_back({Variant::Chasm, m});
            }
            const AblationTable t = run_ablation(cfg, entries, abl_o.reuse, log_line);
            std::cout << t.render();
            t.write_csv(cfg.out_dir / "ablation.csv");
            return t.wrapper_init_identical ? 0 : 3;
        }
        if (*fal) {
            const ExperimentConfig cfg = build_config(fal_o);
            const FalsificationReport r = run_mask_falsification(cfg, fal_o.reuse, log_line);
            std::cout << r.render();
            std::filesystem::create_directories(cfg.out_dir);
            std::ofstream(cfg.out_dir / "falsification.txt") << r.render();
            r.structured.write_csv(cfg.out_dir / "falsification_structured.csv");
            r.random.write_csv(cfg.out_dir / "falsification_random.csv");
            return 0;
        }
        if (*dump) {
            std::filesystem::create_directories(dp_out);
            const Phantom p = make_phantom(dp_h, dp_w, dp_seed, dp_ell);
            const SamplingMask m = dp_mask == "structured"
                                       ? make_structured_mask(dp_h, dp_accel, std::min(1.0, 0.32 / dp_accel), dp_seed)
                                       : make_random_mask(dp_h, dp_accel, dp_seed, dp_keep, std::min(1.0, 0.32 / dp_accel));
            const auto pp = std::filesystem::path(dp_out) / ("phantom_s" + std::to_string(dp_seed) + ".bin");
            const auto mp = std::filesystem::path(dp_out) / ("mask_" + dp_mask + "_s" + std::to_string(dp_seed) + ".bin");
            dump_phantom(pp, p);
            dump_mask(mp, m, dp_seed);
            std::printf("wrote %s (%dx%d complex128) and %s (%d lines, %d selected)\n", pp.string().c_str(), dp_h, dp_w,
                        mp.string().c_str(), m.lines(), m.count());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
