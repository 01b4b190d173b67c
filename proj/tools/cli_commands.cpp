#include "cli_commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli_config.hpp"
#include "vcx/archive.hpp"
#include "vcx/image_io.hpp"
#include "vcx/metrics.hpp"
#include "vcx/parallel.hpp"
#include "vcx/run_store.hpp"

namespace vcx::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string video_dir_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return buf;
}

void require_dataset_dir(const std::string& dir) {
    if (!fs::exists(fs::path(dir) / "dataset.json"))
        throw ConfigError("dataset path '" + dir + "' does not exist or is not a dataset");
}

struct Components {
    ConvCodec codec;
    ToyDenoiser denoiser;
    ToyTarget target;
    NoiseSchedule schedule;
};

Components load_components(const RunConfig& config) {
    Components c;
    const auto check = [](const std::string& what, const std::string& path,
                          const std::optional<std::string>& expected) {
        if (!fs::exists(path))
            throw ConfigError(what + " checkpoint '" + path + "' does not exist");
        const std::string actual = file_content_hash(path);
        if (expected && *expected != actual)
            throw CompatError(what + " checkpoint hash mismatch: expected " + *expected +
                              ", file has " + actual);
        return actual;
    };
    const std::string codec_hash =
        check("codec", config.checkpoints.codec, config.checkpoints.codec_hash);
    check("denoiser", config.checkpoints.denoiser, config.checkpoints.denoiser_hash);
    check("target", config.checkpoints.target, config.checkpoints.target_hash);

    c.codec = load_codec(config.checkpoints.codec);
    std::string trained_codec_hash, trained_sched_hash;
    c.denoiser = load_denoiser(config.checkpoints.denoiser, &trained_codec_hash,
                               &trained_sched_hash);
    c.target = load_target(config.checkpoints.target);
    c.schedule =
        make_schedule(config.schedule.t_train, config.schedule.beta_min, config.schedule.beta_max);

    if (trained_codec_hash != codec_hash)
        throw CompatError("denoiser was trained against codec " + trained_codec_hash +
                          " but the configured codec hashes to " + codec_hash);
    if (trained_sched_hash != schedule_hash(c.schedule))
        throw CompatError("denoiser was trained on a different noise schedule");
    if (c.target.task() != config.task)
        throw CompatError("target checkpoint task does not match the configured task");
    return c;
}

struct GenerateOutcome {
    std::vector<CounterfactualResult> results;
    std::vector<double> seconds; // per video
};

GenerateOutcome run_generation(const RunConfig& config, const Components& c,
                               std::size_t workers, const std::string& out_dir,
                               bool quiet = false) {
    auto split = load_split(config.dataset_dir, config.split);
    if (split.empty() || config.eval_count == 0)
        throw ConfigError("empty evaluation set (split '" + config.split + "', count " +
                          std::to_string(config.eval_count) + ")");
    const std::size_t count = std::min(config.eval_count, split.size());

    GenerateOutcome outcome;
    outcome.results.resize(count);
    outcome.seconds.assign(count, 0.0);
    std::vector<std::string> errors(count);

    parallel_for(count, workers, [&](std::size_t i) {
        try {
            const LabeledVideo& sample = split[i];
            const SeedSpec video_seed{config.seed, "video/" + std::to_string(i)};
            const auto started = std::chrono::steady_clock::now();

            const std::vector<float> pred = c.target.predict(sample.video);
            const Conditioning y_prime =
                select_target(pred, config.task, config.target_select, video_seed);

            GuidanceConfig gc = config.guidance;
            gc.task = config.task;
            gc.seed = video_seed;
            CounterfactualResult run = generate_counterfactual(
                sample.video, y_prime, gc, c.codec, c.schedule, c.denoiser, c.target);

            std::optional<RefineOutput> refinement;
            if (config.guidance.variant == GuidanceVariant::SGA) {
                refinement = refine(run, config.refine, c.codec, c.schedule, c.denoiser);
                run.pred_mask_cf = c.target.predict(*run.x_mask_cf);
            }
            outcome.seconds[i] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                    .count();

            if (!out_dir.empty() && (config.keep_runs == 0 || i < config.keep_runs)) {
                const fs::path run_dir = fs::path(out_dir) / "videos" / video_dir_name(i);
                store_run(run_dir.string(), run, refinement ? &*refinement : nullptr,
                          outcome.seconds[i]);
            }
            outcome.results[i] = std::move(run);
            if (!quiet)
                std::printf("video %zu/%zu done in %.2fs\n", i + 1, count, outcome.seconds[i]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < count; ++i)
        if (!errors[i].empty())
            throw Error("video " + std::to_string(i) + " failed: " + errors[i]);
    return outcome;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

json metrics_to_json(const MetricsReport& report) {
    auto variant = [&](const VariantMetrics& m) {
        json j{{"present", m.present}};
        if (!m.present) return j;
        j["ssim"] = m.ssim;
        j["lpips_a"] = m.perceptual;
        j["l1"] = m.l1;
        if (report.task == Task::Classification) {
            j["fr"] = m.fr;
            j["fid_a"] = m.fid;
            j["fvd_a"] = m.fvd;
        } else {
            j["r2"] = m.r2;
            j["mae"] = m.mae_v;
            j["rmse"] = m.rmse_v;
        }
        return j;
    };
    return json{{"task", task_name(report.task)},
                {"runs", report.runs},
                {"cf", variant(report.cf)},
                {"masked", variant(report.masked)},
                {"mask_density", report.mask_density},
                {"feature_dim_advisory", report.feature_dim_advisory}};
}

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols{
        "variant", "T",       "lambda_c", "t_sup",  "status",       "runs",
        "fr",      "r2",      "mae",      "rmse",   "ssim",         "lpips_a",
        "l1",      "fid_a",   "fvd_a",    "m_fr",   "m_r2",         "m_mae",
        "m_rmse",  "m_ssim",  "m_lpips_a", "m_l1",  "m_fid_a",      "m_fvd_a",
        "mask_density", "median_seconds"};
    return cols;
}

std::map<std::string, std::string> row_from_metrics(const MetricsReport& report,
                                                    double median_seconds) {
    std::map<std::string, std::string> row;
    row["status"] = "ok";
    row["runs"] = std::to_string(report.runs);
    row["ssim"] = fmt(report.cf.ssim);
    row["lpips_a"] = fmt(report.cf.perceptual);
    row["l1"] = fmt(report.cf.l1);
    if (report.task == Task::Classification) {
        row["fr"] = fmt(report.cf.fr);
        row["fid_a"] = fmt(report.cf.fid);
        row["fvd_a"] = fmt(report.cf.fvd);
    } else {
        row["r2"] = fmt(report.cf.r2);
        row["mae"] = fmt(report.cf.mae_v);
        row["rmse"] = fmt(report.cf.rmse_v);
    }
    if (report.masked.present) {
        row["m_ssim"] = fmt(report.masked.ssim);
        row["m_lpips_a"] = fmt(report.masked.perceptual);
        row["m_l1"] = fmt(report.masked.l1);
        if (report.task == Task::Classification) {
            row["m_fr"] = fmt(report.masked.fr);
            row["m_fid_a"] = fmt(report.masked.fid);
            row["m_fvd_a"] = fmt(report.masked.fvd);
        } else {
            row["m_r2"] = fmt(report.masked.r2);
            row["m_mae"] = fmt(report.masked.mae_v);
            row["m_rmse"] = fmt(report.masked.rmse_v);
        }
        row["mask_density"] = fmt(report.mask_density);
    }
    row["median_seconds"] = fmt(median_seconds);
    return row;
}

void write_csv(const std::string& path, const std::vector<std::map<std::string, std::string>>& rows) {
    std::ofstream out(path);
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            auto it = row.find(cols[i]);
            out << (i ? "," : "") << (it == row.end() ? "" : it->second);
        }
        out << "\n";
    }
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StateError("cannot open CSV '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw StateError("empty CSV '" + path + "'");
    std::vector<std::string> cols;
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) cols.push_back(cell);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(cols.size());
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < cols.size(); ++i) row[cols[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

// columns where lower is better; everything else numeric is higher-better
bool lower_is_better(const std::string& col) {
    return col == "mae" || col == "rmse" || col == "lpips_a" || col == "l1" || col == "fid_a" ||
           col == "fvd_a" || col == "m_mae" || col == "m_rmse" || col == "m_lpips_a" ||
           col == "m_l1" || col == "m_fid_a" || col == "m_fvd_a" || col == "median_seconds";
}

void write_markdown_table(const std::string& path,
                          const std::vector<std::map<std::string, std::string>>& rows) {
    // mark the best value per metric column in bold
    std::map<std::string, std::string> best;
    for (const std::string& col : csv_columns()) {
        if (col == "variant" || col == "T" || col == "lambda_c" || col == "t_sup" ||
            col == "status" || col == "runs")
            continue;
        double best_v = 0.0;
        bool seen = false;
        for (const auto& row : rows) {
            auto it = row.find(col);
            if (it == row.end() || it->second.empty()) continue;
            const double v = std::stod(it->second);
            if (!seen || (lower_is_better(col) ? v < best_v : v > best_v)) {
                best_v = v;
                seen = true;
            }
        }
        if (seen) best[col] = fmt(best_v);
    }
    std::ofstream out(path);
    const auto& cols = csv_columns();
    out << "|";
    for (const auto& c : cols) out << " " << c << " |";
    out << "\n|";
    for (std::size_t i = 0; i < cols.size(); ++i) out << " --- |";
    out << "\n";
    for (const auto& row : rows) {
        out << "|";
        for (const auto& c : cols) {
            auto it = row.find(c);
            std::string cell = it == row.end() ? "" : it->second;
            auto b = best.find(c);
            if (b != best.end() && !cell.empty() && cell == b->second) cell = "**" + cell + "**";
            out << " " << cell << " |";
        }
        out << "\n";
    }
}

void write_pivot_tables(const std::string& dir,
                        const std::vector<std::map<std::string, std::string>>& rows,
                        const std::string& metric) {
    const std::vector<std::string> axes{"variant", "T", "lambda_c", "t_sup"};
    for (std::size_t a = 0; a < axes.size(); ++a) {
        for (std::size_t b = a + 1; b < axes.size(); ++b) {
            std::vector<std::string> va, vb;
            for (const auto& row : rows) {
                const std::string& xa = row.at(axes[a]);
                const std::string& xb = row.at(axes[b]);
                if (std::find(va.begin(), va.end(), xa) == va.end()) va.push_back(xa);
                if (std::find(vb.begin(), vb.end(), xb) == vb.end()) vb.push_back(xb);
            }
            if (va.size() < 2 || vb.size() < 2) continue;
            std::ofstream out(fs::path(dir) / (axes[a] + "_by_" + axes[b] + ".md"));
            out << "Metric: " << metric << "\n\n| " << axes[a] << " \\ " << axes[b] << " |";
            for (const auto& x : vb) out << " " << x << " |";
            out << "\n|";
            for (std::size_t i = 0; i <= vb.size(); ++i) out << " --- |";
            out << "\n";
            for (const auto& xa : va) {
                out << "| " << xa << " |";
                for (const auto& xb : vb) {
                    // mean of the metric over matching rows
                    double acc = 0.0;
                    std::size_t n = 0;
                    for (const auto& row : rows) {
                        if (row.at(axes[a]) != xa || row.at(axes[b]) != xb) continue;
                        auto it = row.find(metric);
                        if (it == row.end() || it->second.empty()) continue;
                        acc += std::stod(it->second);
                        ++n;
                    }
                    out << " " << (n ? fmt(acc / static_cast<double>(n)) : "-") << " |";
                }
                out << "\n";
            }
        }
    }
}

} // namespace

int cmd_dataset(const std::string& config_path, const std::string& out_dir) {
    json j = load_config(config_path);
    DatasetConfig config = dataset_config_from_json(j);
    make_splits(config, out_dir);
    std::printf("dataset written to %s (train %zu, val %zu, test %zu)\n", out_dir.c_str(),
                config.train_count, config.val_count, config.test_count);
    return 0;
}

int cmd_train(const std::string& component, const std::string& config_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed) {
    json j = load_config(config_path);
    if (!j.contains("dataset_dir")) throw ConfigError("train config: missing 'dataset_dir'");
    const std::string dataset_dir = j.at("dataset_dir").get<std::string>();
    require_dataset_dir(dataset_dir);
    const DatasetConfig ds = load_dataset_config(dataset_dir);
    auto train = load_split(dataset_dir, "train");
    auto val = load_split(dataset_dir, "val");
    const std::uint64_t master_seed = seed.value_or(j.value("seed", std::uint64_t{7}));
    fs::create_directories(out_dir);

    const json tj = j.value("train", json::object());
    const std::size_t steps = tj.value("steps", std::size_t{0}); // 0 = per-component default
    const std::size_t batch = tj.value("batch", std::size_t{8});
    const double lr = tj.value("lr", 2e-3);
    const std::size_t threads = tj.value("threads", std::size_t{2});

    if (component == "codec") {
        ConvCodecConfig cc;
        cc.channels = static_cast<int>(ds.channels());
        const json cj = j.value("codec", json::object());
        cc.hidden = cj.value("hidden", cc.hidden);
        cc.latent_channels = cj.value("latent_channels", cc.latent_channels);
        ConvCodec codec(cc, SeedSpec{master_seed, "codec-init"});
        CodecTrainConfig tc;
        tc.steps = steps ? steps : tc.steps;
        tc.batch = batch;
        tc.lr = lr;
        tc.threads = threads;
        tc.seed = SeedSpec{master_seed, "codec-train"};
        TrainStats stats = train_codec(codec, train, val, tc);
        const std::string path = (fs::path(out_dir) / "codec.ldvt").string();
        save_codec(codec, path, stats.val_metric);
        std::printf("codec: final loss %.6f, val PSNR %.2f dB\ncheckpoint %s hash %s\n",
                    stats.final_loss, stats.val_metric, path.c_str(),
                    file_content_hash(path).c_str());
        return 0;
    }
    if (component == "target") {
        ToyTargetConfig tc_cfg;
        tc_cfg.task = ds.kind == DatasetKind::MovingShape ? Task::Classification : Task::Regression;
        tc_cfg.classes = ds.classes;
        tc_cfg.channels = static_cast<int>(ds.channels());
        const json gj = j.value("target", json::object());
        tc_cfg.conv1_c = gj.value("conv1_c", tc_cfg.conv1_c);
        tc_cfg.conv2_c = gj.value("conv2_c", tc_cfg.conv2_c);
        tc_cfg.hidden = gj.value("hidden", tc_cfg.hidden);
        ToyTarget target(tc_cfg, SeedSpec{master_seed, "target-init"});
        TargetTrainConfig tc;
        tc.steps = steps ? steps : tc.steps;
        tc.batch = batch;
        tc.lr = lr;
        tc.threads = threads;
        tc.seed = SeedSpec{master_seed, "target-train"};
        TrainStats stats = train_target(target, train, val, tc);
        const std::string path = (fs::path(out_dir) / "target.ldvt").string();
        save_target(target, path, stats.val_metric);
        const char* metric =
            tc_cfg.task == Task::Classification ? "val accuracy" : "val R^2";
        std::printf("target: %s %.4f\ncheckpoint %s hash %s\n", metric, stats.val_metric,
                    path.c_str(), file_content_hash(path).c_str());
        if (tc_cfg.task == Task::Classification && stats.val_metric < 0.95)
            std::printf("WARNING: val accuracy %.4f below the 0.95 gate\n", stats.val_metric);
        return 0;
    }
    if (component == "denoiser") {
        if (!j.contains("codec_checkpoint"))
            throw ConfigError("train config: denoiser needs 'codec_checkpoint'");
        const std::string codec_path = j.at("codec_checkpoint").get<std::string>();
        if (!fs::exists(codec_path))
            throw ConfigError("codec checkpoint '" + codec_path + "' does not exist");
        ConvCodec codec = load_codec(codec_path);
        const ScheduleSpec ss = schedule_spec_from_json(j.value("schedule", json::object()));
        NoiseSchedule schedule = make_schedule(ss.t_train, ss.beta_min, ss.beta_max);

        DenoiserConfig dc;
        dc.latent_channels = codec.config().latent_channels;
        dc.classes = ds.kind == DatasetKind::MovingShape ? ds.classes : 0;
        const json dj = j.value("denoiser", json::object());
        dc.width = dj.value("width", dc.width);
        ToyDenoiser denoiser(dc, SeedSpec{master_seed, "denoiser-init"});
        DenoiserTrainConfig tc;
        tc.steps = steps ? steps : tc.steps;
        tc.batch = batch;
        tc.lr = lr;
        tc.threads = threads;
        tc.seed = SeedSpec{master_seed, "denoiser-train"};
        TrainStats stats = train_denoiser(denoiser, train, val, codec, schedule, tc);
        const std::string path = (fs::path(out_dir) / "denoiser.ldvt").string();
        save_denoiser(denoiser, path, file_content_hash(codec_path), schedule_hash(schedule),
                      stats.val_metric);
        std::printf("denoiser: final loss %.6f, val noise MSE %.4f\ncheckpoint %s hash %s\n",
                    stats.final_loss, stats.val_metric, path.c_str(),
                    file_content_hash(path).c_str());
        return 0;
    }
    throw ConfigError("unknown component '" + component + "' (codec|denoiser|target)");
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::size_t workers) {
    json j = load_config(config_path);
    if (seed) j["seed"] = *seed;
    RunConfig config = run_config_from_json(j);
    require_dataset_dir(config.dataset_dir);
    Components components = load_components(config);

    fs::create_directories(out_dir);
    GenerateOutcome outcome = run_generation(config, components, workers, out_dir);

    json meta{{"config", run_config_to_json(config)},
              {"config_hash", config_hash(run_config_to_json(config))},
              {"videos", outcome.results.size()},
              {"per_video_seconds", outcome.seconds},
              {"median_seconds", median_of(outcome.seconds)}};
    std::ofstream out(fs::path(out_dir) / "run_meta.json");
    out << meta.dump(2) << "\n";
    std::printf("generated %zu counterfactuals, median %.2fs per video\n",
                outcome.results.size(), median_of(outcome.seconds));
    return 0;
}

int cmd_evaluate(const std::string& run_dir, const std::string& target_path,
                 const std::string& out_path) {
    std::ifstream meta_in(fs::path(run_dir) / "run_meta.json");
    if (!meta_in) throw ConfigError("'" + run_dir + "' is not a generate output directory");
    json meta = json::parse(meta_in);
    RunConfig config = run_config_from_json(meta.at("config"));

    std::string tpath = target_path.empty() ? config.checkpoints.target : target_path;
    ToyTarget target = load_target(tpath);

    std::vector<StoredRun> stored;
    const fs::path videos = fs::path(run_dir) / "videos";
    if (!fs::exists(videos)) throw StateError("run directory has no videos/");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(videos))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) stored.push_back(load_run(d.string()));
    if (stored.empty()) throw StateError("run directory has no stored videos");

    std::vector<const CounterfactualResult*> results;
    std::vector<double> seconds;
    for (const StoredRun& s : stored) {
        results.push_back(&s.result);
        seconds.push_back(s.generation_seconds);
    }
    MetricsReport report = evaluate_run_set(results, target, config.task);

    json out_json{{"metrics", metrics_to_json(report)},
                  {"median_seconds", median_of(seconds)},
                  {"config_hash", meta.at("config_hash")}};
    const std::string out_file =
        out_path.empty() ? (fs::path(run_dir) / "metrics.json").string() : out_path;
    std::ofstream out(out_file);
    out << out_json.dump(2) << "\n";

    auto row = row_from_metrics(report, median_of(seconds));
    row["variant"] = variant_name(config.guidance.variant);
    row["T"] = std::to_string(config.guidance.inference_steps);
    row["lambda_c"] = fmt(config.guidance.lambda_c);
    row["t_sup"] = fmt(config.refine.t_sup);
    write_csv((fs::path(run_dir) / "metrics.csv").string(), {row});
    std::printf("metrics written to %s\n", out_file.c_str());
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::size_t workers) {
    json j = load_config(config_path);
    if (seed && j.contains("base")) j["base"]["seed"] = *seed;
    SweepSpec spec = sweep_spec_from_json(j);
    if (seed) {
        spec.base.seed = *seed;
        spec.base_json["seed"] = *seed;
    }
    require_dataset_dir(spec.base.dataset_dir);

    struct Point {
        GuidanceVariant variant;
        std::size_t t;
        double lambda_c;
        double t_sup;
        json config_json;
        std::string hash;
    };
    std::vector<Point> points;
    for (GuidanceVariant v : spec.variants)
        for (std::size_t t : spec.inference_steps)
            for (double lc : spec.lambda_c)
                for (double ts : spec.t_sup) {
                    Point p{v, t, lc, ts, sweep_point_json(spec, v, t, lc, ts), ""};
                    p.hash = config_hash(p.config_json);
                    points.push_back(std::move(p));
                }

    fs::create_directories(fs::path(out_dir) / "points");
    Components components = load_components(spec.base);

    std::vector<std::map<std::string, std::string>> rows(points.size());
    parallel_for(points.size(), workers == 0 ? 1 : workers, [&](std::size_t i) {
        const Point& p = points[i];
        std::map<std::string, std::string> row{{"variant", variant_name(p.variant)},
                                               {"T", std::to_string(p.t)},
                                               {"lambda_c", fmt(p.lambda_c)},
                                               {"t_sup", fmt(p.t_sup)}};
        const fs::path point_dir = fs::path(out_dir) / "points" / p.hash;
        const fs::path metrics_path = point_dir / "metrics.json";
        try {
            json result;
            if (fs::exists(metrics_path)) {
                std::ifstream in(metrics_path);
                result = json::parse(in); // completed point: reuse, never recompute
            } else {
                RunConfig config = run_config_from_json(p.config_json);
                if (config.keep_runs == 0) config.keep_runs = 2;
                fs::create_directories(point_dir);
                {
                    std::ofstream pj(point_dir / "point.json");
                    pj << p.config_json.dump(2) << "\n";
                }
                GenerateOutcome outcome =
                    run_generation(config, components, 1, point_dir.string(), true);
                std::vector<const CounterfactualResult*> results;
                for (const auto& r : outcome.results) results.push_back(&r);
                MetricsReport report = evaluate_run_set(results, components.target, config.task);
                result = json{{"metrics", metrics_to_json(report)},
                              {"median_seconds", median_of(outcome.seconds)},
                              {"config_hash", p.hash}};
                std::ofstream out(metrics_path);
                out << result.dump(2) << "\n";
            }
            MetricsReport report; // rebuild the row from the stored json
            const json& m = result.at("metrics");
            report.task = task_from_name(m.at("task").get<std::string>());
            report.runs = m.at("runs").get<std::size_t>();
            auto fill = [&](VariantMetrics& vm, const json& src) {
                vm.present = src.at("present").get<bool>();
                if (!vm.present) return;
                vm.ssim = src.at("ssim").get<double>();
                vm.perceptual = src.at("lpips_a").get<double>();
                vm.l1 = src.at("l1").get<double>();
                if (report.task == Task::Classification) {
                    vm.fr = src.at("fr").get<double>();
                    vm.fid = src.at("fid_a").get<double>();
                    vm.fvd = src.at("fvd_a").get<double>();
                } else {
                    vm.r2 = src.at("r2").get<double>();
                    vm.mae_v = src.at("mae").get<double>();
                    vm.rmse_v = src.at("rmse").get<double>();
                }
            };
            fill(report.cf, m.at("cf"));
            fill(report.masked, m.at("masked"));
            report.mask_density = m.at("mask_density").get<double>();
            auto metric_row = row_from_metrics(report, result.at("median_seconds").get<double>());
            metric_row.insert(row.begin(), row.end());
            for (auto& [k, v] : row) metric_row[k] = v;
            rows[i] = std::move(metric_row);
            std::printf("point %s done (%s T=%zu lambda_c=%s t_sup=%s)\n", p.hash.c_str(),
                        variant_name(p.variant).c_str(), p.t, fmt(p.lambda_c).c_str(),
                        fmt(p.t_sup).c_str());
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            row["status"] = "failed: " + msg;
            rows[i] = row;
            std::printf("point %s FAILED: %s\n", p.hash.c_str(), e.what());
        }
    });

    write_csv((fs::path(out_dir) / "sweep.csv").string(), rows);
    const fs::path tables = fs::path(out_dir) / "tables";
    fs::create_directories(tables);
    write_markdown_table((tables / "all_points.md").string(), rows);
    const std::string primary = spec.base.task == Task::Classification ? "fr" : "r2";
    write_pivot_tables(tables.string(), rows, primary);
    std::printf("sweep complete: %zu points -> %s\n", points.size(),
                (fs::path(out_dir) / "sweep.csv").string().c_str());
    return 0;
}

int cmd_report(const std::string& dir, const std::string& out_dir) {
    const fs::path base(dir);
    const std::string out = out_dir.empty() ? (base / "report").string() : out_dir;
    fs::create_directories(out);

    if (fs::exists(base / "sweep.csv")) {
        auto rows = read_csv((base / "sweep.csv").string());
        write_markdown_table((fs::path(out) / "all_points.md").string(), rows);
        std::string primary = "fr";
        for (const auto& row : rows) {
            auto it = row.find("fr");
            if (it == row.end() || it->second.empty()) primary = "r2";
            break;
        }
        write_pivot_tables(out, rows, primary);
        std::printf("sweep report written to %s\n", out.c_str());
        return 0;
    }

    if (!fs::exists(base / "run_meta.json"))
        throw ConfigError("'" + dir + "' is neither a run nor a sweep directory");

    const fs::path videos = base / "videos";
    std::vector<fs::path> dirs;
    if (fs::exists(videos))
        for (const auto& entry : fs::directory_iterator(videos))
            if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());

    std::ofstream table(fs::path(out) / "videos.md");
    table << "| video | target | prediction (factual) | prediction (cf) | prediction (masked) "
             "| mask density |\n| --- | --- | --- | --- | --- | --- |\n";
    std::size_t skipped = 0;
    for (const auto& d : dirs) {
        try {
            StoredRun run = load_run(d.string());
            auto pred_str = [](const std::vector<float>& p) {
                if (p.empty()) return std::string("-");
                if (p.size() == 1) return fmt(p[0]);
                return std::to_string(argmax(p));
            };
            std::string target_str = run.result.y_prime.task == Task::Classification
                                         ? std::to_string(run.result.y_prime.class_id)
                                         : fmt(run.result.y_prime.value);
            table << "| " << d.filename().string() << " | " << target_str << " | "
                  << pred_str(run.result.pred_factual) << " | " << pred_str(run.result.pred_cf)
                  << " | " << pred_str(run.result.pred_mask_cf) << " | "
                  << (run.result.x_mask_cf ? fmt(run.result.mask_density) : std::string("-"))
                  << " |\n";

            // frame grid: factual / counterfactual / refined / delta heat map
            std::vector<const VideoTensor*> grid_rows{&run.result.x_f, &run.result.x_cf};
            VideoTensor delta_vis;
            if (run.result.x_mask_cf) grid_rows.push_back(&*run.result.x_mask_cf);
            if (run.refinement) {
                const DeltaMap& delta = run.refinement->delta;
                delta_vis = VideoTensor(delta.frames, delta.height, delta.width, 1);
                float mx = 0.0f;
                for (float v : delta.values) mx = std::max(mx, v);
                for (std::size_t i = 0; i < delta.values.size(); ++i)
                    delta_vis.values[i] = mx > 0.0f ? delta.values[i] / mx : 0.0f;
                grid_rows.push_back(&delta_vis);
            }
            write_frame_grid((fs::path(out) / (d.filename().string() + "_grid.png")).string(),
                             grid_rows);
        } catch (const std::exception& e) {
            ++skipped;
            std::printf("skipping %s: %s\n", d.string().c_str(), e.what());
        }
    }
    std::printf("report written to %s (%zu videos, %zu skipped)\n", out.c_str(),
                dirs.size() - skipped, skipped);
    return 0;
}

} // namespace vcx::cli
