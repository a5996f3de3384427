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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace chasm {

namespace {

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    int r = 0;
    try {
        r = std::stoi(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
    return r;
}

double to_double(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    double r = 0;
    try {
        r = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
    return r;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

std::string hex64(std::uint64_t h)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

bool is_core_group(const std::string& name)
{
    return name.find(".ch.") != std::string::npos || name.find(".cw.") != std::string::npos;
}

Sample make_sample(const ExperimentConfig& cfg, std::uint64_t phantom_seed, const SamplingMask& mask)
{
    const Phantom p = make_phantom(cfg.height, cfg.width, phantom_seed, cfg.ellipses);
    const ComplexImage k = forward_single(p.image, mask);
    return {to_channels(zero_filled_recon(k, mask)), magnitude(p.image)};
}

FeatureMap output_magnitude(const FeatureMap& y) { return magnitude(from_channels(y)); }

}  // namespace

double ExperimentConfig::effective_center_fraction() const noexcept
{
    return center_fraction >= 0.0 ? center_fraction : std::min(1.0, 0.32 / accel);
}

ToyModelShape ExperimentConfig::model_shape() const noexcept
{
    return {height, width, channels, bins_h, bins_w, blocks, variant, axis_mode};
}

void ExperimentConfig::validate() const
{
    auto positive = [](const char* k, double v) {
        if (!(v > 0)) throw std::invalid_argument(std::string("config: ") + k + " must be positive");
    };
    positive("height", height);
    positive("width", width);
    positive("channels", channels);
    positive("bins_h", bins_h);
    positive("bins_w", bins_w);
    positive("blocks", blocks);
    positive("accel", accel);
    positive("batch", batch);
    positive("eval_every", eval_every);
    positive("train_phantoms", train_phantoms);
    positive("val_phantoms", val_phantoms);
    positive("test_phantoms", test_phantoms);
    positive("lr", adamw.lr);
    if (channels < 2) throw std::invalid_argument("config: channels must be >= 2");
    if (steps < 0) throw std::invalid_argument("config: steps must be >= 0");
    if (ellipses < 0) throw std::invalid_argument("config: ellipses must be >= 0");
    if (center_fraction > 1.0) throw std::invalid_argument("config: center_fraction must be <= 1");
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
}

std::string ExperimentConfig::canonical() const
{
    std::map<std::string, std::string> kv{
        {"accel", fmt(accel)},
        {"axis_mode", to_string(axis_mode)},
        {"batch", std::to_string(batch)},
        {"beta1", fmt(adamw.beta1)},
        {"beta2", fmt(adamw.beta2)},
        {"bins_h", std::to_string(bins_h)},
        {"bins_w", std::to_string(bins_w)},
        {"blocks", std::to_string(blocks)},
        {"center_fraction", fmt(effective_center_fraction())},
        {"channels", std::to_string(channels)},
        {"data_seed", std::to_string(data_seed)},
        {"ellipses", std::to_string(ellipses)},
        {"eps", fmt(adamw.eps)},
        {"eval_every", std::to_string(eval_every)},
        {"height", std::to_string(height)},
        {"loss", to_string(loss)},
        {"lr", fmt(adamw.lr)},
        {"lr_schedule", lr_schedule == LrSchedule::Cosine ? "cosine" : "constant"},
        {"mask", mask == MaskKind::Structured ? "structured" : "random"},
        {"random_keep_center", random_keep_center ? "true" : "false"},
        {"steps", std::to_string(steps)},
        {"test_phantoms", std::to_string(test_phantoms)},
        {"train_phantoms", std::to_string(train_phantoms)},
        {"val_phantoms", std::to_string(val_phantoms)},
        {"variant", to_string(variant)},
        {"weight_decay", fmt(adamw.weight_decay)},
        {"width", std::to_string(width)},
    };
    std::string s;
    for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
    return s;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(canonical())); }

std::vector<std::uint64_t> parse_seed_list(const std::string& s)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != item.size()) throw std::invalid_argument("seeds: bad entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("seeds: empty list");
    return out;
}

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& value_in)
{
    const std::string key = trim(key_in), v = trim(value_in);
    if (key == "height") c.height = to_int(key, v);
    else if (key == "width") c.width = to_int(key, v);
    else if (key == "size") c.height = c.width = to_int(key, v);
    else if (key == "channels") c.channels = to_int(key, v);
    else if (key == "bins_h") c.bins_h = to_int(key, v);
    else if (key == "bins_w") c.bins_w = to_int(key, v);
    else if (key == "blocks") c.blocks = to_int(key, v);
    else if (key == "variant") {
        auto p = parse_variant(v);
        if (!p) throw std::invalid_argument("config: unknown variant '" + v + "'");
        c.variant = *p;
    } else if (key == "axis_mode") {
        auto p = parse_axis_mode(v);
        if (!p) throw std::invalid_argument("config: unknown axis_mode '" + v + "'");
        c.axis_mode = *p;
    } else if (key == "mask") {
        if (v == "structured") c.mask = MaskKind::Structured;
        else if (v == "random") c.mask = MaskKind::Random;
        else throw std::invalid_argument("config: mask must be structured or random");
    } else if (key == "accel") c.accel = to_double(key, v);
    else if (key == "center_fraction") c.center_fraction = to_double(key, v);
    else if (key == "random_keep_center") c.random_keep_center = to_bool(key, v);
    else if (key == "loss") {
        if (v == "l1") c.loss = LossKind::L1;
        else if (v == "l2") c.loss = LossKind::L2;
        else throw std::invalid_argument("config: loss must be l1 or l2");
    } else if (key == "lr") c.adamw.lr = to_double(key, v);
    else if (key == "beta1") c.adamw.beta1 = to_double(key, v);
    else if (key == "beta2") c.adamw.beta2 = to_double(key, v);
    else if (key == "eps") c.adamw.eps = to_double(key, v);
    else if (key == "weight_decay") c.adamw.weight_decay = to_double(key, v);
    else if (key == "lr_schedule") {
        if (v == "constant") c.lr_schedule = LrSchedule::Constant;
        else if (v == "cosine") c.lr_schedule = LrSchedule::Cosine;
        else throw std::invalid_argument("config: lr_schedule must be constant or cosine");
    } else if (key == "steps") c.steps = to_int(key, v);
    else if (key == "batch") c.batch = to_int(key, v);
    else if (key == "eval_every") c.eval_every = to_int(key, v);
    else if (key == "train_phantoms") c.train_phantoms = to_int(key, v);
    else if (key == "val_phantoms") c.val_phantoms = to_int(key, v);
    else if (key == "test_phantoms") c.test_phantoms = to_int(key, v);
    else if (key == "ellipses") c.ellipses = to_int(key, v);
    else if (key == "data_seed") c.data_seed = std::stoull(v);
    else if (key == "seeds") c.seeds = parse_seed_list(v);
    else if (key == "out_dir") c.out_dir = v;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig cfg)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

std::string describe_keys(const ExperimentConfig& cfg)
{
    std::string seeds;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
    return cfg.canonical() + "seeds=" + seeds + "\nout_dir=" + cfg.out_dir.string() + "\n";
}

Dataset make_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed)
{
    Dataset d;
    const double cf = cfg.effective_center_fraction();
    if (cfg.mask == MaskKind::Structured)
        d.mask = make_structured_mask(cfg.height, cfg.accel, cf, cfg.data_seed);
    else
        d.mask = make_random_mask(cfg.height, cfg.accel, derive_seed(derive_seed(cfg.data_seed, 0x3a5c), run_seed),
                                  cfg.random_keep_center, cf);
    auto fill = [&](std::vector<Sample>& v, int n, std::uint64_t stream) {
        const std::uint64_t base = derive_seed(cfg.data_seed, stream);
        v.reserve(n);
        for (int i = 0; i < n; ++i) v.push_back(make_sample(cfg, derive_seed(base, std::uint64_t(i)), d.mask));
    };
    fill(d.train, cfg.train_phantoms, 1);
    fill(d.val, cfg.val_phantoms, 2);
    fill(d.test, cfg.test_phantoms, 3);
    return d;
}

MetricReport evaluate(const ToyModel& m, const std::vector<Sample>& set)
{
    MetricReport r;
    for (const auto& s : set) {
        const FeatureMap mag = output_magnitude(model_forward(m, s.input));
        r.add(psnr(s.target, mag), ssim(s.target, mag));
    }
    r.finalize();
    return r;
}

MetricReport evaluate_zero_filled(const std::vector<Sample>& set)
{
    MetricReport r;
    for (const auto& s : set) {
        const FeatureMap mag = output_magnitude(s.input);
        r.add(psnr(s.target, mag), ssim(s.target, mag));
    }
    r.finalize();
    return r;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg, std::uint64_t seed)
{
    std::string name = to_string(cfg.variant) + "_" + to_string(cfg.axis_mode) + "_" +
                       (cfg.mask == MaskKind::Structured ? "structured" : "random") + "_R" + fmt(cfg.accel) + "_" +
                       cfg.hash().substr(0, 8) + "_s" + std::to_string(seed);
    return cfg.out_dir / name;
}

RunRecord run_train(const ExperimentConfig& cfg, std::uint64_t seed, const ProgressFn& progress)
{
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.config_hash = cfg.hash();
    rec.seed = seed;
    rec.variant = cfg.variant;
    rec.axis_mode = cfg.axis_mode;
    rec.mask = cfg.mask;
    rec.accel = cfg.accel;

    const Dataset data = make_dataset(cfg, seed);
    rec.mask_lines = data.mask.count();
    ToyModel model = build_toy_model(cfg.model_shape(), seed);
    auto params = model_parameters(model);
    for (const auto& g : params) rec.parameter_counts.emplace_back(g.name, g.values->size());
    rec.total_parameters = parameter_count(model);
    {
        std::vector<ParamGroupRef> wrapper;
        for (const auto& g : params)
            if (!is_core_group(g.name)) wrapper.push_back(g);
        rec.wrapper_init_hash = hex64(parameter_hash(wrapper));
    }

    OptimizerState opt = make_optimizer(params, cfg.adamw);
    ToyModel grads = zeros_like(model);
    auto grad_groups = model_parameters(grads);
    std::vector<std::vector<double>> gvec(grad_groups.size());
    Rng batch_rng(derive_seed(seed, 0xba7c));

    ToyModel best = model;
    {
        const MetricReport v0 = evaluate(model, data.val);
        rec.trajectory.push_back({0, 0.0, v0.psnr_mean, v0.ssim_mean});
    }
    double best_val = rec.trajectory.back().val_psnr;
    rec.best_step = 0;

    double loss_acc = 0.0;
    int loss_n = 0;
    const double inv_batch = 1.0 / cfg.batch;
    for (int step = 1; step <= cfg.steps; ++step) {
        if (cfg.lr_schedule == LrSchedule::Cosine)
            opt.config.lr =
                cfg.adamw.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * double(step - 1) / double(cfg.steps)));
        for (auto& g : grad_groups) std::fill(g.values->begin(), g.values->end(), 0.0);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const Sample& s = data.train[batch_rng.below(data.train.size())];
            ModelTrace trace;
            FeatureMap gy;
            batch_loss += magnitude_loss(cfg.loss, model_forward_traced(model, s.input, trace), s.target, &gy);
            gy *= inv_batch;
            model_backward(trace, model, gy, grads);
        }
        batch_loss *= inv_batch;
        bool finite = std::isfinite(batch_loss);
        for (std::size_t i = 0; i < grad_groups.size() && finite; ++i) {
            gvec[i] = *grad_groups[i].values;
            for (double v : gvec[i]) finite = finite && std::isfinite(v);
        }
        if (!finite) {
            rec.diverged = true;
            rec.diagnostic = "non-finite loss or gradient at step " + std::to_string(step) + " (loss " +
                             fmt(batch_loss) + ")";
            break;
        }
        adamw_step(params, gvec, opt);
        loss_acc += batch_loss;
        ++loss_n;
        if (step % cfg.eval_every == 0 || step == cfg.steps) {
            const MetricReport v = evaluate(model, data.val);
            rec.trajectory.push_back({step, loss_acc / loss_n, v.psnr_mean, v.ssim_mean});
            loss_acc = 0.0;
            loss_n = 0;
            if (!std::isfinite(v.psnr_mean)) {
                rec.diverged = true;
                rec.diagnostic = "non-finite validation PSNR at step " + std::to_string(step);
                break;
            }
            if (v.psnr_mean > best_val) {
                best_val = v.psnr_mean;
                best = model;
                rec.best_step = step;
            }
            if (progress)
                progress("step " + std::to_string(step) + "/" + std::to_string(cfg.steps) + " loss " +
                         fmt_fixed(rec.trajectory.back().train_loss, 5) + " val_psnr " + fmt_fixed(v.psnr_mean, 3));
        }
    }
    rec.test = evaluate(best, data.test);
    rec.zero_filled = evaluate_zero_filled(data.test);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

std::string serialize(const RunRecord& r)
{
    std::ostringstream o;
    o << "config_hash=" << r.config_hash << "\nseed=" << r.seed << "\nvariant=" << to_string(r.variant)
      << "\naxis_mode=" << to_string(r.axis_mode) << "\nmask=" << to_string(r.mask) << "\naccel=" << fmt(r.accel)
      << "\nmask_lines=" << r.mask_lines << "\nbest_step=" << r.best_step << "\ndiverged=" << r.diverged
      << "\ndiagnostic=" << r.diagnostic << "\nwrapper_init_hash=" << r.wrapper_init_hash
      << "\ntotal_parameters=" << r.total_parameters << "\n";
    for (const auto& [n, c] : r.parameter_counts) o << "param " << n << " " << c << "\n";
    for (const auto& e : r.trajectory)
        o << "eval " << e.step << " " << fmt(e.train_loss) << " " << fmt(e.val_psnr) << " " << fmt(e.val_ssim) << "\n";
    for (std::size_t i = 0; i < r.test.psnr.size(); ++i)
        o << "case " << i << " " << fmt(r.test.psnr[i]) << " " << fmt(r.test.ssim[i]) << " "
          << fmt(r.zero_filled.psnr[i]) << " " << fmt(r.zero_filled.ssim[i]) << "\n";
    return o.str();
}

void write_run_record(const RunRecord& r, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "trajectory.csv");
        f << "config_hash,seed,step,train_loss,val_psnr,val_ssim\n";
        for (const auto& e : r.trajectory)
            f << r.config_hash << "," << r.seed << "," << e.step << "," << fmt(e.train_loss) << "," << fmt(e.val_psnr)
              << "," << fmt(e.val_ssim) << "\n";
    }
    {
        std::ofstream f(dir / "cases.csv");
        f << "config_hash,seed,case,psnr,ssim,zf_psnr,zf_ssim\n";
        for (std::size_t i = 0; i < r.test.psnr.size(); ++i)
            f << r.config_hash << "," << r.seed << "," << i << "," << fmt(r.test.psnr[i]) << "," << fmt(r.test.ssim[i])
              << "," << fmt(r.zero_filled.psnr[i]) << "," << fmt(r.zero_filled.ssim[i]) << "\n";
    }
    {
        std::ofstream f(dir / "params.csv");
        f << "config_hash,seed,group,count\n";
        for (const auto& [n, c] : r.parameter_counts)
            f << r.config_hash << "," << r.seed << "," << n << "," << c << "\n";
    }
    {
        std::ofstream f(dir / "final.csv");
        f << "config_hash,seed,variant,axis_mode,mask,accel,mask_lines,best_step,test_psnr_mean,test_psnr_std,"
             "test_ssim_mean,test_ssim_std,zf_psnr_mean,zf_ssim_mean,total_parameters,wrapper_init_hash,status\n";
        f << r.config_hash << "," << r.seed << "," << to_string(r.variant) << "," << to_string(r.axis_mode) << ","
          << to_string(r.mask) << "," << fmt(r.accel) << "," << r.mask_lines << "," << r.best_step << ","
          << fmt(r.test.psnr_mean) << "," << fmt(r.test.psnr_std) << "," << fmt(r.test.ssim_mean) << ","
          << fmt(r.test.ssim_std) << "," << fmt(r.zero_filled.psnr_mean) << "," << fmt(r.zero_filled.ssim_mean) << ","
          << r.total_parameters << "," << r.wrapper_init_hash << "," << (r.diverged ? "diverged" : "ok") << "\n";
    }
    {
        std::ofstream f(dir / "record.txt");
        f << serialize(r);
    }
    {
        std::ofstream f(dir / "wall_time.txt");
        f << fmt_fixed(r.wall_seconds, 3) << "\n";
    }
}

std::optional<RunRecord> read_final_record(const std::filesystem::path& dir)
{
    std::ifstream f(dir / "record.txt");
    if (!f) return std::nullopt;
    RunRecord r;
    std::string line;
    try {
        while (std::getline(f, line)) {
            std::istringstream ls(line);
            if (line.rfind("param ", 0) == 0) {
                std::string tag, name;
                std::size_t c;
                ls >> tag >> name >> c;
                r.parameter_counts.emplace_back(name, c);
            } else if (line.rfind("eval ", 0) == 0) {
                std::string tag;
                EvalPoint e;
                ls >> tag >> e.step >> e.train_loss >> e.val_psnr >> e.val_ssim;
                r.trajectory.push_back(e);
            } else if (line.rfind("case ", 0) == 0) {
                std::string tag;
                int i;
                double p, s, zp, zs;
                ls >> tag >> i >> p >> s >> zp >> zs;
                r.test.add(p, s);
                r.zero_filled.add(zp, zs);
            } else {
                const auto eq = line.find('=');
                if (eq == std::string::npos) continue;
                const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
                if (k == "config_hash") r.config_hash = v;
                else if (k == "seed") r.seed = std::stoull(v);
                else if (k == "variant") r.variant = parse_variant(v).value();
                else if (k == "axis_mode") r.axis_mode = parse_axis_mode(v).value();
                else if (k == "mask") r.mask = v == "structured" ? MaskKind::Structured : MaskKind::Random;
                else if (k == "accel") r.accel = std::stod(v);
                else if (k == "mask_lines") r.mask_lines = std::stoi(v);
                else if (k == "best_step") r.best_step = std::stoi(v);
                else if (k == "diverged") r.diverged = v == "1";
                else if (k == "diagnostic") r.diagnostic = v;
                else if (k == "wrapper_init_hash") r.wrapper_init_hash = v;
                else if (k == "total_parameters") r.total_parameters = std::stoull(v);
            }
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    r.test.finalize();
    r.zero_filled.finalize();
    std::ifstream wt(dir / "wall_time.txt");
    if (wt) wt >> r.wall_seconds;
    return r;
}

RunRecord run_or_load(const ExperimentConfig& cfg, std::uint64_t seed, bool reuse, const ProgressFn& progress)
{
    const auto dir = run_directory(cfg, seed);
    if (reuse) {
        if (auto r = read_final_record(dir); r && r->config_hash == cfg.hash() && r->seed == seed && !r->diverged) {
            if (progress) progress("reusing " + dir.string());
            return *r;
        }
    }
    RunRecord r = run_train(cfg, seed, progress);
    write_run_record(r, dir);
    return r;
}

std::string AblationTable::render() const
{
    std::ostringstream o;
    o << "variant        axis_mode  mask        seeds  psnr_mean  psnr_std  ssim_mean  ssim_std  zf_psnr  params\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-14s %-10s %-11s %5zu  %9.4f  %8.4f  %9.5f  %8.5f  %7.3f  %6zu\n",
                      to_string(r.variant).c_str(), to_string(r.axis_mode).c_str(), to_string(r.mask).c_str(),
                      r.runs.size(), r.psnr.mean, r.psnr.std, r.ssim.mean, r.ssim.std, r.zf_psnr.mean, r.parameters);
        o << buf;
    }
    o << "wrapper init identical across rows: " << (wrapper_init_identical ? "yes" : "NO") << "\n";
    return o.str();
}

void AblationTable::write_csv(const std::filesystem::path& path) const
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    f << "config_hash,variant,axis_mode,mask,seeds,psnr_mean,psnr_std,ssim_mean,ssim_std,zf_psnr_mean,parameters\n";
    for (const auto& r : rows) {
        f << (r.runs.empty() ? "" : r.runs.front().config_hash) << "," << to_string(r.variant) << ","
          << to_string(r.axis_mode) << "," << to_string(r.mask) << "," << r.runs.size() << "," << fmt(r.psnr.mean)
          << "," << fmt(r.psnr.std) << "," << fmt(r.ssim.mean) << "," << fmt(r.ssim.std) << "," << fmt(r.zf_psnr.mean)
          << "," << r.parameters << "\n";
    }
}

const AblationRow* AblationTable::find(Variant v, AxisMode m) const
{
    for (const auto& r : rows)
        if (r.variant == v && r.axis_mode == m) return &r;
    return nullptr;
}

AblationTable run_ablation(const ExperimentConfig& base, const std::vector<AblationEntry>& entries, bool reuse,
                           const ProgressFn& progress)
{
    AblationTable t;
    std::map<std::uint64_t, std::string> init_hash;
    for (const auto& e : entries) {
        ExperimentConfig cfg = base;
        cfg.variant = e.variant;
        cfg.axis_mode = e.axis_mode;
        AblationRow row;
        row.variant = e.variant;
        row.axis_mode = e.axis_mode;
        row.mask = cfg.mask;
        std::vector<double> p, s, z;
        for (std::uint64_t seed : cfg.seeds) {
            const std::string tag = to_string(e.variant) + "/" + to_string(e.axis_mode) + "/" + to_string(cfg.mask) +
                                    " seed " + std::to_string(seed);
            RunRecord r = run_or_load(cfg, seed, reuse, progress ? ProgressFn([&](const std::string& m) {
                progress(tag + ": " + m);
            })
                                                                 : ProgressFn{});
            if (r.diverged) throw std::runtime_error(tag + " diverged: " + r.diagnostic);
            auto [it, fresh] = init_hash.emplace(seed, r.wrapper_init_hash);
            if (!fresh && it->second != r.wrapper_init_hash) t.wrapper_init_identical = false;
            p.push_back(r.test.psnr_mean);
            s.push_back(r.test.ssim_mean);
            z.push_back(r.zero_filled.psnr_mean);
            row.parameters = r.total_parameters;
            row.runs.push_back(std::move(r));
        }
        row.psnr = mean_std(p);
        row.ssim = mean_std(s);
        row.zf_psnr = mean_std(z);
        t.rows.push_back(std::move(row));
    }
    return t;
}

double mask_drop(double delta_structured, double delta_random)
{
    if (delta_structured == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return 1.0 - delta_random / delta_structured;
}

std::string FalsificationReport::render() const
{
    std::ostringstream o;
    o << "# best baseline = best-performing non-CHASM core variant at desk scale (by 3-seed mean PSNR)\n";
    o << "structured masks:\n" << structured.render() << "random masks:\n" << random.render();
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "delta_structured = %.4f dB (vs %s)\ndelta_random     = %.4f dB (vs %s)\ndrop = 1 - "
                  "delta_random/delta_structured = %.2f%%\n",
                  delta_structured, to_string(best_structured_baseline).c_str(), delta_random,
                  to_string(best_random_baseline).c_str(), 100.0 * drop);
    o << buf;
    return o.str();
}

FalsificationReport run_mask_falsification(const ExperimentConfig& cfg, bool reuse, const ProgressFn& progress)
{
    std::vector<AblationEntry> entries;
    for (Variant v : kAllVariants) entries.push_back({v, cfg.axis_mode});
    FalsificationReport rep;
    auto delta = [&](const AblationTable& t, Variant& best) {
        const double chasm = t.find(Variant::Chasm, cfg.axis_mode)->psnr.mean;
        double best_other = -std::numeric_limits<double>::infinity();
        for (const auto& r : t.rows)
            if (r.variant != Variant::Chasm && r.psnr.mean > best_other) {
                best_other = r.psnr.mean;
                best = r.variant;
            }
        return chasm - best_other;
    };
    ExperimentConfig s = cfg;
    s.mask = MaskKind::Structured;
    rep.structured = run_ablation(s, entries, reuse, progress);
    ExperimentConfig r = cfg;
    r.mask = MaskKind::Random;
    rep.random = run_ablation(r, entries, reuse, progress);
    rep.delta_structured = delta(rep.structured, rep.best_structured_baseline);
    rep.delta_random = delta(rep.random, rep.best_random_baseline);
    rep.drop = mask_drop(rep.delta_structured, rep.delta_random);
    return rep;
}

}  // namespace chasm
