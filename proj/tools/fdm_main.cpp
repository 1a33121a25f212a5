// Experiment harness: dataset generation, training, scheme-driven video
// completion, offline scheme optimization, metric evaluation, and scheme /
// task-distribution inspection. Every command takes a seed and writes a
// resolved-config snapshot next to its outputs so reruns are reproducible.
//
// Exit codes: 0 success, 1 usage, 2 validation failure, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdm/diffusion.hpp"
#include "fdm/evalbench.hpp"
#include "fdm/parallel.hpp"
#include "fdm/scheme_opt.hpp"
#include "fdm/schemes.hpp"
#include "fdm/svg.hpp"
#include "fdm/taskdist.hpp"

namespace fs = std::filesystem;
using namespace fdm;

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + path);
    os << content;
}

// snapshot of the resolved configuration, sorted keys, no timestamps
void write_snapshot(const std::string& path, const std::string& command,
                    std::map<std::string, std::string> kv) {
    kv["command"] = command;
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    write_text(path, out);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

struct ModelBundle {
    DenoiserConfig config;
    ParamSet<float> params;
    FrameNorm norm;
};

FrameNorm norm_from_params(const ParamSet<float>& params, int frame_dim) {
    FrameNorm norm;
    norm.mean.assign(std::size_t(frame_dim), 0.0f);
    norm.stdev.assign(std::size_t(frame_dim), 1.0f);
    if (params.contains("norm.mean")) norm.mean = params.get("norm.mean").values;
    if (params.contains("norm.std")) norm.stdev = params.get("norm.std").values;
    return norm;
}

ModelBundle load_model(const std::string& dir) {
    ModelBundle m;
    m.config = config_from_kv(load_metadata(dir + "/config.txt"));
    m.params = load_checkpoint<float>(dir + "/checkpoint.fdmp");
    m.norm = norm_from_params(m.params, m.config.frame_dim);
    return m;
}

SamplingScheme build_named_scheme(const std::string& name, int n, int n_obs, int k, int skip,
                                  const VideoTensor* adapt_video) {
    if (name == "autoreg") return make_autoreg(n, n_obs, k);
    if (name == "long-range") return make_long_range(n, n_obs, k);
    if (name == "hierarchy2") return make_hierarchy(n, n_obs, k, 2);
    if (name == "hierarchy3") return make_hierarchy(n, n_obs, k, 3);
    if (name == "two-res") return make_two_res(n, n_obs, k, skip);
    if (name == "ad-hierarchy2") {
        if (!adapt_video)
            throw ValidationError("ad-hierarchy2 resolves per video; no video supplied");
        return resolve_adaptive_hierarchy2(
            n, n_obs, k, [adapt_video](int i) { return adapt_video->frame(i); },
            adapt_video->frame_dim);
    }
    // otherwise a scheme JSON file
    std::ifstream is(name);
    if (!is) throw ValidationError("unknown scheme name or missing file: " + name);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("scheme file parse error: " + std::string(e.what()));
    }
    return scheme_from_json(j);
}

TaskSampler make_task_sampler(const std::string& dist, int k,
                              bool uniform_literal_window = false) {
    if (dist == "structured")
        return [k](int n, Rng& rng) {
            auto t = sample_task_structured(n, k, rng);
            return std::make_pair(t.latents, t.observed);
        };
    if (dist == "uniform")
        return [k, uniform_literal_window](int n, Rng& rng) {
            auto t = sample_task_uniform(n, k, rng, uniform_literal_window);
            return std::make_pair(t.latents, t.observed);
        };
    if (dist == "single")
        return [](int n, Rng& rng) {
            auto t = sample_task_single(n, rng);
            return std::make_pair(t.latents, t.observed);
        };
    throw ValidationError("unknown task distribution: " + dist);
}

std::string loss_csv(const TrainLog& log) {
    std::string out = "step,loss\n";
    for (const auto& [step, loss] : log.losses)
        out += std::to_string(step) + "," + fmt_double(loss) + "\n";
    return out;
}

// ---- gen-data ----

struct GenDataArgs {
    std::string generator;
    int count = 100;
    int n = 100;
    std::uint64_t seed = 0;
    std::string out;
    int grid_size = 8;
    double v_max = 3.0;
    double light_density = 0.2;
    int rooms = 4;
    int palette = 6;
};

int cmd_gen_data(const GenDataArgs& a) {
    Rng rng(a.seed);
    Dataset ds;
    if (a.generator == "town-drive") {
        ds = gen_town_drive(a.count, a.n, TownDriveParams{a.grid_size, a.v_max, a.light_density},
                            rng);
    } else if (a.generator == "colored-rooms") {
        ds = gen_colored_rooms(a.count, a.n, ColoredRoomsParams{a.rooms, a.palette}, rng);
    } else {
        throw ValidationError("unknown generator: " + a.generator);
    }
    ds.meta["seed"] = std::to_string(a.seed);
    ds.meta["count"] = std::to_string(a.count);
    ds.meta["n"] = std::to_string(a.n);
    save_dataset(a.out, ds);
    write_snapshot(a.out + ".config", "gen-data",
                   {{"generator", a.generator},
                    {"count", std::to_string(a.count)},
                    {"n", std::to_string(a.n)},
                    {"seed", std::to_string(a.seed)},
                    {"out", a.out},
                    {"grid_size", std::to_string(a.grid_size)},
                    {"v_max", fmt_double(a.v_max)},
                    {"light_density", fmt_double(a.light_density)},
                    {"rooms", std::to_string(a.rooms)},
                    {"palette", std::to_string(a.palette)}});
    std::cout << "wrote " << a.out << " (" << ds.videos.size() << " videos, N=" << ds.n_frames()
              << ", frame_dim=" << ds.frame_dim() << ")\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string data;
    std::string out;
    std::string taskdist = "structured";
    std::string resume;
    std::uint64_t seed = 0;
    int k = 20;
    int t = 250;
    long steps = 1000;
    double lr = 1e-4;
    int batch = 8;
    int channels = 48;
    int blocks = 2;
    int heads = 4;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    long log_every = 10;
    bool uniform_literal_window = false;
};

void save_model(const std::string& dir, const DenoiserConfig& cfg, const ParamSet<float>& params,
                const AdamState<float>& adam) {
    save_checkpoint(dir + "/checkpoint.fdmp", params);
    auto cfg_kv = config_to_kv(cfg);
    save_metadata(dir + "/config.txt", Metadata(cfg_kv.begin(), cfg_kv.end()));
    ParamSet<float> opt_state;
    for (const auto& [name, t] : adam.m) opt_state.set("m." + name, t);
    for (const auto& [name, t] : adam.v) opt_state.set("v." + name, t);
    opt_state.set("step", Tensor<float>::scalar(float(adam.step)));
    save_checkpoint(dir + "/optstate.fdmp", opt_state);
}

int cmd_train(const TrainArgs& a) {
    Dataset ds = load_dataset(a.data);
    if (ds.videos.empty()) throw ValidationError("train: dataset is empty");

    DenoiserConfig cfg;
    cfg.frame_dim = ds.frame_dim();
    cfg.channels = a.channels;
    cfg.blocks = a.blocks;
    cfg.heads = a.heads;
    cfg.max_frames = a.k;
    cfg.diffusion_steps = a.t;
    cfg.max_video_len = ds.n_frames();
    cfg.validate();

    FrameNorm norm = compute_frame_norm(ds.videos);
    for (auto& v : ds.videos) normalize_video(v, norm);

    Rng init_rng(a.seed);
    ParamSet<float> params;
    AdamState<float> adam;
    if (!a.resume.empty()) {
        params = load_checkpoint<float>(a.resume);
        fs::path opt_path = fs::path(a.resume).parent_path() / "optstate.fdmp";
        if (fs::exists(opt_path)) {
            auto opt_state = load_checkpoint<float>(opt_path.string());
            for (const auto& [name, t] : opt_state) {
                if (name.rfind("m.", 0) == 0) adam.m.set(name.substr(2), t);
                if (name.rfind("v.", 0) == 0) adam.v.set(name.substr(2), t);
                if (name == "step") adam.step = long(t.values[0]);
            }
        }
    } else {
        params = init_denoiser_params<float>(cfg, init_rng);
        params.set("norm.mean", Tensor<float>({norm.mean.size()}, norm.mean));
        params.set("norm.std", Tensor<float>({norm.stdev.size()}, norm.stdev));
    }

    auto schedule = make_schedule(cfg.diffusion_steps, a.beta_start, a.beta_end);
    TrainOptions opt;
    opt.steps = a.steps;
    opt.lr = a.lr;
    opt.batch = a.batch;
    opt.log_every = a.log_every;
    Rng train_rng(a.seed, 1);
    auto log = train(cfg, params, schedule, ds.videos, make_task_sampler(a.taskdist, a.k, a.uniform_literal_window), opt,
                     train_rng, &adam);

    fs::create_directories(a.out);
    save_model(a.out, cfg, params, adam);
    write_text(a.out + "/loss.csv", loss_csv(log));
    write_snapshot(a.out + "/run_config.txt", "train",
                   {{"data", a.data},
                    {"out", a.out},
                    {"taskdist", a.taskdist},
                    {"resume", a.resume},
                    {"seed", std::to_string(a.seed)},
                    {"k", std::to_string(a.k)},
                    {"t", std::to_string(a.t)},
                    {"steps", std::to_string(a.steps)},
                    {"lr", fmt_double(a.lr)},
                    {"batch", std::to_string(a.batch)},
                    {"channels", std::to_string(a.channels)},
                    {"blocks", std::to_string(a.blocks)},
                    {"heads", std::to_string(a.heads)},
                    {"beta_start", fmt_double(a.beta_start)},
                    {"beta_end", fmt_double(a.beta_end)},
                    {"log_every", std::to_string(a.log_every)},
                    {"uniform_literal_window", a.uniform_literal_window ? "1" : "0"}});
    if (!log.losses.empty())
        std::cout << "final loss " << fmt_double(log.losses.back().second) << "\n";
    std::cout << "wrote " << a.out << "/checkpoint.fdmp\n";
    return 0;
}

// ---- sample ----

struct SampleArgs {
    std::string model;
    std::string data;
    std::string scheme = "autoreg";
    std::string out;
    std::uint64_t seed = 0;
    int n_obs = 36;
    int count = 10;
    int skip = 2;
};

int cmd_sample(const SampleArgs& a) {
    ModelBundle m = load_model(a.model);
    Dataset ds = load_dataset(a.data);
    if (int(ds.videos.size()) < a.count)
        throw ValidationError("sample: dataset has fewer videos than --count");
    const int n = ds.n_frames();
    auto schedule = make_schedule(m.config.diffusion_steps);

    bool adaptive = a.scheme == "ad-hierarchy2";
    SamplingScheme scheme;
    if (!adaptive) {
        scheme = build_named_scheme(a.scheme, n, a.n_obs, m.config.max_frames, a.skip, nullptr);
        if (scheme.budget > m.config.max_frames)
            throw ValidationError("sample: scheme budget K=" + std::to_string(scheme.budget) +
                                  " exceeds model K=" + std::to_string(m.config.max_frames));
        require_valid(scheme);
        if (scheme.n_frames != n)
            throw ValidationError("sample: scheme length does not match dataset");
    }

    Dataset completions;
    completions.meta = ds.meta;
    completions.meta["completed_with"] = a.scheme;
    completions.meta["n_obs"] = std::to_string(a.n_obs);
    completions.meta["model"] = a.model;
    completions.videos.resize(std::size_t(a.count));

    Rng master(a.seed);
    parallel_for(std::size_t(a.count), [&](std::size_t i) {
        Rng video_rng = master.split(i);
        VideoTensor original = ds.videos[i];
        VideoTensor work = original;
        normalize_video(work, m.norm);
        for (int f = a.n_obs; f < n; ++f)
            for (int c = 0; c < work.frame_dim; ++c) work.frame(f)[c] = 0.0f;
        work.mark_observed_prefix(a.n_obs);

        StageSampler sampler = [&m, &schedule](const Tensor<float>& y,
                                               const std::vector<int>& latents,
                                               const std::vector<int>& observed, Rng& rng) {
            return ddpm_sample(m.config, m.params, schedule, y, latents, observed, rng);
        };
        VideoTensor completed =
            adaptive ? sample_video_adaptive(sampler, work, a.n_obs, m.config.max_frames,
                                             video_rng)
                     : sample_video(sampler, work, scheme, video_rng);
        denormalize_video(completed, m.norm);
        // observed prefix keeps its original bytes
        for (int f = 0; f < a.n_obs; ++f)
            for (int c = 0; c < completed.frame_dim; ++c)
                completed.frame(f)[c] = original.frame(f)[c];
        completed.mark_observed_prefix(a.n_obs);
        completions.videos[i] = std::move(completed);
    });

    fs::create_directories(a.out);
    save_dataset(a.out + "/completions.fdmv", completions);
    std::string csv = "video,outlier_pct,mean_speed,displacement\n";
    for (int i = 0; i < a.count; ++i) {
        auto feats = video_features(completions.videos[std::size_t(i)]);
        auto speeds = estimate_speeds(completions.videos[std::size_t(i)]);
        csv += std::to_string(i) + "," + fmt_double(outlier_pct(speeds)) + "," +
               fmt_double(feats[0]) + "," + fmt_double(feats[2]) + "\n";
    }
    write_text(a.out + "/per_video_metrics.csv", csv);
    write_snapshot(a.out + "/run_config.txt", "sample",
                   {{"model", a.model},
                    {"data", a.data},
                    {"scheme", a.scheme},
                    {"out", a.out},
                    {"seed", std::to_string(a.seed)},
                    {"n_obs", std::to_string(a.n_obs)},
                    {"count", std::to_string(a.count)},
                    {"skip", std::to_string(a.skip)}});
    std::cout << "wrote " << a.out << "/completions.fdmv\n";
    return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string data;
    std::string ref;
    std::string out;
    std::uint64_t seed = 0;
    double threshold = 10.0;
    int lag = 10;
    int bins = 50;
};

int cmd_evaluate(const EvaluateArgs& a) {
    Dataset ds = load_dataset(a.data);
    Dataset ref = load_dataset(a.ref);
    if (ds.videos.empty() || ref.videos.empty()) throw ValidationError("evaluate: empty dataset");

    std::vector<double> speeds, ref_speeds;
    for (const auto& v : ds.videos) {
        auto s = estimate_speeds(v, a.lag);
        speeds.insert(speeds.end(), s.begin(), s.end());
    }
    for (const auto& v : ref.videos) {
        auto s = estimate_speeds(v, a.lag);
        ref_speeds.insert(ref_speeds.end(), s.begin(), s.end());
    }
    double op = outlier_pct(speeds, a.threshold);
    double wd = wasserstein1d(filter_outliers(speeds, a.threshold),
                              filter_outliers(ref_speeds, a.threshold));
    std::vector<std::vector<double>> feats, ref_feats;
    for (const auto& v : ds.videos) feats.push_back(video_features(v, a.lag));
    for (const auto& v : ref.videos) ref_feats.push_back(video_features(v, a.lag));
    double fd = frechet_gaussian(feats, ref_feats);

    std::string csv = "metric,value\n";
    csv += "outlier_pct," + fmt_double(op) + "\n";
    csv += "wasserstein," + fmt_double(wd) + "\n";
    csv += "frechet," + fmt_double(fd) + "\n";
    auto it = ds.meta.find("generator");
    if (it != ds.meta.end() && it->second == "colored-rooms") {
        int rooms = std::stoi(ds.meta.at("n_rooms"));
        double acc = 0;
        for (const auto& v : ds.videos) acc += color_accuracy(v, rooms);
        csv += "color_accuracy," + fmt_double(acc / double(ds.videos.size())) + "\n";
    }

    fs::create_directories(a.out);
    write_text(a.out + "/metrics.csv", csv);

    auto hist = make_histogram(filter_outliers(speeds, a.threshold), 0.0, a.threshold, a.bins);
    auto ref_hist = make_histogram(filter_outliers(ref_speeds, a.threshold), 0.0, a.threshold,
                                   a.bins);
    std::string hist_csv = "bin_lo,bin_hi,sampled,reference\n";
    std::vector<double> bars;
    for (int b = 0; b < a.bins; ++b) {
        double lo = a.threshold * b / a.bins, hi = a.threshold * (b + 1) / a.bins;
        hist_csv += fmt_double(lo) + "," + fmt_double(hi) + "," +
                    std::to_string(hist.counts[std::size_t(b)]) + "," +
                    std::to_string(ref_hist.counts[std::size_t(b)]) + "\n";
        bars.push_back(double(hist.counts[std::size_t(b)]));
    }
    write_text(a.out + "/speed_hist.csv", hist_csv);
    write_text(a.out + "/speed_hist.svg", render_histogram_svg(bars));
    write_snapshot(a.out + "/run_config.txt", "evaluate",
                   {{"data", a.data},
                    {"ref", a.ref},
                    {"out", a.out},
                    {"seed", std::to_string(a.seed)},
                    {"threshold", fmt_double(a.threshold)},
                    {"lag", std::to_string(a.lag)},
                    {"bins", std::to_string(a.bins)}});
    std::cout << csv;
    return 0;
}

// ---- optimize-scheme ----

struct OptimizeArgs {
    std::string model;
    std::string data;
    std::string latents = "autoreg";  // which catalog scheme fixes X_s
    std::string out;
    std::uint64_t seed = 0;
    int n_obs = 36;
    int target = -1;  // default K - max |X_s|
    int t_grid_size = 10;
    int videos = 10;
};

int cmd_optimize_scheme(const OptimizeArgs& a) {
    ModelBundle m = load_model(a.model);
    Dataset ds = load_dataset(a.data);
    if (int(ds.videos.size()) < a.videos)
        throw ValidationError("optimize-scheme: dataset smaller than --videos");
    for (auto& v : ds.videos) normalize_video(v, m.norm);
    const int n = ds.n_frames();
    const int k = m.config.max_frames;

    SamplingScheme base = build_named_scheme(a.latents, n, a.n_obs, k, 2, nullptr);
    std::vector<std::vector<int>> latent_stages;
    std::size_t max_x = 0;
    for (const auto& st : base.stages) {
        latent_stages.push_back(st.latents);
        max_x = std::max(max_x, st.latents.size());
    }
    int target = a.target >= 0 ? a.target : k - int(max_x);

    auto schedule = make_schedule(m.config.diffusion_steps);
    OptimizerConfig opt;
    opt.t_grid = even_t_grid(m.config.diffusion_steps, a.t_grid_size);
    opt.videos_per_eval = a.videos;
    opt.target_obs_count = target;
    opt.validate(m.config.diffusion_steps);

    std::vector<VideoTensor> eval_videos(ds.videos.begin(), ds.videos.begin() + a.videos);
    Rng master(a.seed);
    auto loss = make_stage_loss(m.config, m.params, schedule, eval_videos, opt, master);
    auto result = optimize_observed(latent_stages, n, a.n_obs, k, target, loss);

    fs::create_directories(a.out);
    write_text(a.out + "/scheme.json", scheme_to_json(result.scheme).dump(2) + "\n");
    write_text(a.out + "/trace.csv", trace_to_csv(result.trace));
    write_snapshot(a.out + "/run_config.txt", "optimize-scheme",
                   {{"model", a.model},
                    {"data", a.data},
                    {"latents", a.latents},
                    {"out", a.out},
                    {"seed", std::to_string(a.seed)},
                    {"n_obs", std::to_string(a.n_obs)},
                    {"target", std::to_string(target)},
                    {"t_grid_size", std::to_string(a.t_grid_size)},
                    {"videos", std::to_string(a.videos)}});
    std::cout << "wrote " << a.out << "/scheme.json (" << result.scheme.stages.size()
              << " stages)\n";
    return 0;
}

// ---- inspect-scheme ----

struct InspectSchemeArgs {
    std::string scheme = "autoreg";
    std::string out;
    int n = 300;
    int n_obs = 36;
    int k = 20;
    int skip = 2;
    int levels = 2;
};

int cmd_inspect_scheme(const InspectSchemeArgs& a) {
    SamplingScheme scheme;
    if (a.scheme == "ad-hierarchy2") {
        // structure only: resolve against an all-zero video
        VideoTensor zeros = VideoTensor::zeros(a.n, 2);
        scheme = resolve_adaptive_hierarchy2(
            a.n, a.n_obs, a.k, [&zeros](int i) { return zeros.frame(i); }, 2);
    } else {
        scheme = build_named_scheme(a.scheme, a.n, a.n_obs, a.k, a.skip, nullptr);
    }

    auto violations = validate(scheme);
    std::string report = "scheme=" + a.scheme +
                         "\nstages=" + std::to_string(scheme.stages.size()) +
                         "\nviolations=" + std::to_string(violations.size()) + "\n";
    for (const auto& v : violations)
        report += "stage " + std::to_string(v.stage) + ": " + v.message + "\n";

    fs::create_directories(a.out);
    write_text(a.out + "/scheme.svg", render_scheme_svg(scheme));
    write_text(a.out + "/validation.txt", report);
    write_snapshot(a.out + "/run_config.txt", "inspect-scheme",
                   {{"scheme", a.scheme},
                    {"out", a.out},
                    {"n", std::to_string(a.n)},
                    {"n_obs", std::to_string(a.n_obs)},
                    {"k", std::to_string(a.k)},
                    {"skip", std::to_string(a.skip)},
                    {"levels", std::to_string(a.levels)}});
    std::cout << report;
    if (!violations.empty()) return 2;
    return 0;
}

// ---- inspect-taskdist ----

struct InspectTaskdistArgs {
    std::string dist = "structured";
    std::string out;
    std::uint64_t seed = 0;
    int n = 30;
    int k = 10;
    int samples = 40;
    int hist_draws = 10000;
    bool uniform_literal_window = false;
};

int cmd_inspect_taskdist(const InspectTaskdistArgs& a) {
    Rng rng(a.seed);
    auto draw = [&](Rng& r) {
        if (a.dist == "structured") return sample_task_structured(a.n, a.k, r);
        if (a.dist == "uniform") return sample_task_uniform(a.n, a.k, r, a.uniform_literal_window);
        if (a.dist == "single") return sample_task_single(a.n, r);
        throw ValidationError("unknown task distribution: " + a.dist);
    };
    std::vector<TaskSample> rows;
    for (int i = 0; i < a.samples; ++i) rows.push_back(draw(rng));

    std::map<std::pair<int, int>, long> hist;
    for (int i = 0; i < a.hist_draws; ++i) {
        auto t = draw(rng);
        hist[{int(t.latents.size()), int(t.observed.size())}]++;
    }
    std::string csv = "n_latent,n_observed,count\n";
    for (const auto& [key, count] : hist)
        csv += std::to_string(key.first) + "," + std::to_string(key.second) + "," +
               std::to_string(count) + "\n";

    fs::create_directories(a.out);
    write_text(a.out + "/tasks.svg", render_tasks_svg(rows));
    write_text(a.out + "/task_hist.csv", csv);
    write_snapshot(a.out + "/run_config.txt", "inspect-taskdist",
                   {{"dist", a.dist},
                    {"out", a.out},
                    {"seed", std::to_string(a.seed)},
                    {"n", std::to_string(a.n)},
                    {"k", std::to_string(a.k)},
                    {"samples", std::to_string(a.samples)},
                    {"hist_draws", std::to_string(a.hist_draws)},
                    {"uniform_literal_window", a.uniform_literal_window ? "1" : "0"}});
    std::cout << "wrote " << a.out << "/tasks.svg\n";
    return 0;
}

// Expands `--config FILE` inside a subcommand into `--key value` pairs placed
// ahead of the user's flags; explicit flags win through TakeLast.
std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    for (std::size_t i = 1; i < args.size(); ++i) {
        std::string file;
        std::size_t span = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            span = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            span = 1;
        }
        if (span == 0) continue;
        auto kv = load_metadata(file);
        std::vector<std::string> injected;
        for (const auto& [k, v] : kv) {
            injected.push_back("--" + k);
            injected.push_back(v);
        }
        args.erase(args.begin() + std::ptrdiff_t(i), args.begin() + std::ptrdiff_t(i + span));
        args.insert(args.begin() + std::ptrdiff_t(i), injected.begin(), injected.end());
        break;
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flexible conditional diffusion over frame sequences"};
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen->add_option("generator", gd.generator, "town-drive or colored-rooms")->required();
    gen->add_option("--count", gd.count, "number of videos")->check(CLI::PositiveNumber);
    gen->add_option("--n", gd.n, "frames per video")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gd.seed, "rng seed")->required();
    gen->add_option("--out", gd.out, "output .fdmv path")->required();
    gen->add_option("--grid-size", gd.grid_size, "town grid nodes per side");
    gen->add_option("--v-max", gd.v_max, "agent speed cap, units/s");
    gen->add_option("--light-density", gd.light_density, "traffic light probability per node");
    gen->add_option("--rooms", gd.rooms, "room count");
    gen->add_option("--palette", gd.palette, "palette size");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the denoiser");
    train_cmd->add_option("--data", tr.data)->required();
    train_cmd->add_option("--out", tr.out)->required();
    train_cmd->add_option("--seed", tr.seed)->required();
    train_cmd->add_option("--taskdist", tr.taskdist, "structured|uniform|single");
    train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
    train_cmd->add_option("--k", tr.k, "max jointly represented frames");
    train_cmd->add_option("--t", tr.t, "diffusion steps");
    train_cmd->add_option("--steps", tr.steps)->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", tr.lr);
    train_cmd->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--channels", tr.channels);
    train_cmd->add_option("--blocks", tr.blocks);
    train_cmd->add_option("--heads", tr.heads);
    train_cmd->add_option("--beta-start", tr.beta_start);
    train_cmd->add_option("--beta-end", tr.beta_end);
    train_cmd->add_option("--log-every", tr.log_every);
    train_cmd->add_flag("--uniform-literal-window", tr.uniform_literal_window,
                        "uniform taskdist draws positions from the first K frames as printed");

    SampleArgs sa;
    auto* sample_cmd = app.add_subcommand("sample", "Complete videos under a sampling scheme");
    sample_cmd->add_option("--model", sa.model, "training output directory")->required();
    sample_cmd->add_option("--data", sa.data, "videos supplying observed frames")->required();
    sample_cmd->add_option(
        "--scheme", sa.scheme,
        "autoreg|long-range|hierarchy2|hierarchy3|two-res|ad-hierarchy2|file.json");
    sample_cmd->add_option("--out", sa.out)->required();
    sample_cmd->add_option("--seed", sa.seed)->required();
    sample_cmd->add_option("--n-obs", sa.n_obs, "observed prefix length");
    sample_cmd->add_option("--count", sa.count, "videos to complete")->check(CLI::PositiveNumber);
    sample_cmd->add_option("--skip", sa.skip, "two-res stride");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Metrics against a reference dataset");
    eval_cmd->add_option("--data", ev.data, "completions .fdmv")->required();
    eval_cmd->add_option("--ref", ev.ref, "reference .fdmv")->required();
    eval_cmd->add_option("--out", ev.out)->required();
    eval_cmd->add_option("--seed", ev.seed);
    eval_cmd->add_option("--threshold", ev.threshold, "outlier speed threshold");
    eval_cmd->add_option("--lag", ev.lag, "speed estimation lag, frames");
    eval_cmd->add_option("--bins", ev.bins, "histogram bins");

    OptimizeArgs op;
    auto* opt_cmd = app.add_subcommand("optimize-scheme", "Greedy conditioning optimization");
    opt_cmd->add_option("--model", op.model)->required();
    opt_cmd->add_option("--data", op.data)->required();
    opt_cmd->add_option("--latents", op.latents, "autoreg|hierarchy2 (fixes X per stage)");
    opt_cmd->add_option("--out", op.out)->required();
    opt_cmd->add_option("--seed", op.seed)->required();
    opt_cmd->add_option("--n-obs", op.n_obs);
    opt_cmd->add_option("--target", op.target, "observed indices per stage");
    opt_cmd->add_option("--t-grid-size", op.t_grid_size);
    opt_cmd->add_option("--videos", op.videos, "training videos per loss estimate");

    InspectSchemeArgs is;
    auto* ins_cmd = app.add_subcommand("inspect-scheme", "Render and validate a scheme");
    ins_cmd->add_option("scheme", is.scheme, "catalog name or scheme.json")->required();
    ins_cmd->add_option("--out", is.out)->required();
    ins_cmd->add_option("--n", is.n);
    ins_cmd->add_option("--n-obs", is.n_obs);
    ins_cmd->add_option("--k", is.k);
    ins_cmd->add_option("--skip", is.skip);
    ins_cmd->add_option("--levels", is.levels);

    InspectTaskdistArgs it;
    auto* itd_cmd = app.add_subcommand("inspect-taskdist", "Visualize a task distribution");
    itd_cmd->add_option("--dist", it.dist, "structured|uniform|single");
    itd_cmd->add_option("--out", it.out)->required();
    itd_cmd->add_option("--seed", it.seed)->required();
    itd_cmd->add_option("--n", it.n);
    itd_cmd->add_option("--k", it.k);
    itd_cmd->add_option("--samples", it.samples);
    itd_cmd->add_option("--hist-draws", it.hist_draws);
    itd_cmd->add_flag("--uniform-literal-window", it.uniform_literal_window,
                      "uniform taskdist draws positions from the first K frames as printed");

    for (auto* sub : app.get_subcommands({}))
        for (auto* opt : sub->get_options())
            if (opt->get_positional() == false && opt->get_expected_min() > 0)
                opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    try {
        auto args = expand_config_args(argc, argv);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        reversed.pop_back();  // program name
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gd);
        if (train_cmd->parsed()) return cmd_train(tr);
        if (sample_cmd->parsed()) return cmd_sample(sa);
        if (eval_cmd->parsed()) return cmd_evaluate(ev);
        if (opt_cmd->parsed()) return cmd_optimize_scheme(op);
        if (ins_cmd->parsed()) return cmd_inspect_scheme(is);
        if (itd_cmd->parsed()) return cmd_inspect_taskdist(it);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
