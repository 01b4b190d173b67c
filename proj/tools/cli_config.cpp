#include "cli_config.hpp"

#include <cstring>
#include <fstream>

#include "vcx/run_store.hpp"

extern "C" char** environ;

namespace vcx::cli {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json config;
    try {
        config = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    apply_env_overrides(config);
    return config;
}

void apply_env_overrides(json& config, const char* const* envp) {
    static const std::string prefix = "VCX_";
    if (!envp) envp = environ;
    for (const char* const* e = envp; *e; ++e) {
        const char* entry = *e;
        const char* eq = std::strchr(entry, '=');
        if (!eq) continue;
        std::string key(entry, eq - entry);
        if (key.rfind(prefix, 0) != 0) continue;
        std::string path = key.substr(prefix.size());
        const std::string value(eq + 1);

        json* node = &config;
        std::size_t pos = 0;
        while (true) {
            const std::size_t sep = path.find("__", pos);
            const std::string token = path.substr(pos, sep == std::string::npos ? sep : sep - pos);
            if (sep == std::string::npos) {
                json parsed;
                try {
                    parsed = json::parse(value);
                } catch (const json::parse_error&) {
                    parsed = value;
                }
                (*node)[token] = parsed;
                break;
            }
            node = &(*node)[token];
            pos = sep + 2;
        }
    }
}

std::string canonical_text(const json& config) {
    // nlohmann objects iterate in key order, so a compact dump is canonical
    return config.dump();
}

std::string config_hash(const json& config) {
    return config_hash_of_json_text(canonical_text(config));
}

DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    const std::string kind = j.value("kind", "moving_shape");
    if (kind == "moving_shape")
        c.kind = DatasetKind::MovingShape;
    else if (kind == "pulse")
        c.kind = DatasetKind::Pulse;
    else
        throw ConfigError("unknown dataset kind '" + kind + "'");
    c.train_count = j.value("train_count", c.train_count);
    c.val_count = j.value("val_count", c.val_count);
    c.test_count = j.value("test_count", c.test_count);
    c.frames = j.value("frames", c.frames);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.classes = j.value("classes", c.classes);
    c.ef_min = j.value("ef_min", c.ef_min);
    c.ef_max = j.value("ef_max", c.ef_max);
    c.shape_size = j.value("shape_size", c.shape_size);
    c.speed = j.value("speed", c.speed);
    c.max_radius = j.value("max_radius", c.max_radius);
    c.noise_amp = j.value("noise_amp", c.noise_amp);
    c.seed.master_seed = j.value("seed", std::uint64_t{1234});
    c.seed.stream_label = j.value("stream_label", std::string("dataset"));
    return c;
}

json dataset_config_to_json(const DatasetConfig& c) {
    return json{{"kind", c.kind == DatasetKind::MovingShape ? "moving_shape" : "pulse"},
                {"train_count", c.train_count},
                {"val_count", c.val_count},
                {"test_count", c.test_count},
                {"frames", c.frames},
                {"height", c.height},
                {"width", c.width},
                {"classes", c.classes},
                {"ef_min", c.ef_min},
                {"ef_max", c.ef_max},
                {"shape_size", c.shape_size},
                {"speed", c.speed},
                {"max_radius", c.max_radius},
                {"noise_amp", c.noise_amp},
                {"seed", c.seed.master_seed},
                {"stream_label", c.seed.stream_label}};
}

ScheduleSpec schedule_spec_from_json(const json& j) {
    ScheduleSpec s;
    s.t_train = j.value("t_train", s.t_train);
    s.beta_min = j.value("beta_min", s.beta_min);
    s.beta_max = j.value("beta_max", s.beta_max);
    return s;
}

namespace {

void apply_preset(json& j) {
    if (!j.contains("preset")) return;
    const std::string preset = j.at("preset").get<std::string>();
    json guidance = j.value("guidance", json::object());
    json refine = j.value("refine", json::object());
    auto fill = [](json& obj, const char* key, json value) {
        if (!obj.contains(key)) obj[key] = std::move(value);
    };
    if (preset == "paper-regression") {
        fill(guidance, "lambda_c", 0.15);
        fill(guidance, "T", 15);
        fill(guidance, "N", 10);
        fill(refine, "t_sup", 0.03);
    } else if (preset == "paper-classification") {
        fill(guidance, "lambda_c", 55.0);
        fill(guidance, "T", 5);
        fill(guidance, "N", 10);
        fill(refine, "t_sup", 0.10);
    } else {
        throw ConfigError("unknown preset '" + preset + "'");
    }
    j["guidance"] = guidance;
    j["refine"] = refine;
}

} // namespace

RunConfig run_config_from_json(json j) {
    apply_preset(j);
    RunConfig c;
    c.task = task_from_name(j.value("task", std::string("classification")));
    if (!j.contains("dataset_dir")) throw ConfigError("run config: missing 'dataset_dir'");
    c.dataset_dir = j.at("dataset_dir").get<std::string>();

    const json eval = j.value("eval", json::object());
    c.split = eval.value("split", std::string("test"));
    c.eval_count = eval.value("count", std::size_t{64});

    if (!j.contains("checkpoints")) throw ConfigError("run config: missing 'checkpoints'");
    const json& ck = j.at("checkpoints");
    c.checkpoints.codec = ck.value("codec", std::string());
    c.checkpoints.denoiser = ck.value("denoiser", std::string());
    c.checkpoints.target = ck.value("target", std::string());
    if (ck.contains("codec_hash")) c.checkpoints.codec_hash = ck.at("codec_hash").get<std::string>();
    if (ck.contains("denoiser_hash"))
        c.checkpoints.denoiser_hash = ck.at("denoiser_hash").get<std::string>();
    if (ck.contains("target_hash"))
        c.checkpoints.target_hash = ck.at("target_hash").get<std::string>();

    c.schedule = schedule_spec_from_json(j.value("schedule", json::object()));

    const json g = j.value("guidance", json::object());
    c.guidance.variant = variant_from_name(g.value("variant", std::string("SG")));
    c.guidance.lambda_c = g.value("lambda_c", 1.0);
    c.guidance.inference_steps = g.value("T", std::size_t{5});
    c.guidance.n_perturbations = g.value("N", std::size_t{10});
    c.guidance.sigma = g.value("sigma", 0.1);
    c.guidance.task = c.task;

    const json r = j.value("refine", json::object());
    c.refine.t_sup = r.value("t_sup", 0.1);

    const json ts = j.value("target_select", json::object());
    c.target_select.offset = ts.value("offset", 20.0);
    const std::string sign = ts.value("sign", std::string("auto"));
    if (sign == "plus")
        c.target_select.sign = TargetSelectConfig::Sign::Plus;
    else if (sign == "minus")
        c.target_select.sign = TargetSelectConfig::Sign::Minus;
    else if (sign == "auto")
        c.target_select.sign = TargetSelectConfig::Sign::Auto;
    else
        throw ConfigError("target_select.sign must be plus/minus/auto");
    c.target_select.value_lo = ts.value("value_lo", 10.0);
    c.target_select.value_hi = ts.value("value_hi", 90.0);

    c.seed = j.value("seed", std::uint64_t{7});
    c.keep_runs = j.value("keep_runs", std::size_t{0});
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json ck{{"codec", c.checkpoints.codec},
            {"denoiser", c.checkpoints.denoiser},
            {"target", c.checkpoints.target}};
    if (c.checkpoints.codec_hash) ck["codec_hash"] = *c.checkpoints.codec_hash;
    if (c.checkpoints.denoiser_hash) ck["denoiser_hash"] = *c.checkpoints.denoiser_hash;
    if (c.checkpoints.target_hash) ck["target_hash"] = *c.checkpoints.target_hash;
    std::string sign = "auto";
    if (c.target_select.sign == TargetSelectConfig::Sign::Plus) sign = "plus";
    if (c.target_select.sign == TargetSelectConfig::Sign::Minus) sign = "minus";
    return json{{"task", task_name(c.task)},
                {"dataset_dir", c.dataset_dir},
                {"eval", json{{"split", c.split}, {"count", c.eval_count}}},
                {"checkpoints", ck},
                {"schedule", json{{"t_train", c.schedule.t_train},
                                  {"beta_min", c.schedule.beta_min},
                                  {"beta_max", c.schedule.beta_max}}},
                {"guidance", json{{"variant", variant_name(c.guidance.variant)},
                                  {"lambda_c", c.guidance.lambda_c},
                                  {"T", c.guidance.inference_steps},
                                  {"N", c.guidance.n_perturbations},
                                  {"sigma", c.guidance.sigma}}},
                {"refine", json{{"t_sup", c.refine.t_sup}}},
                {"target_select", json{{"offset", c.target_select.offset},
                                       {"sign", sign},
                                       {"value_lo", c.target_select.value_lo},
                                       {"value_hi", c.target_select.value_hi}}},
                {"seed", c.seed},
                {"keep_runs", c.keep_runs}};
}

SweepSpec sweep_spec_from_json(const json& j) {
    SweepSpec spec;
    json base;
    if (j.contains("base_path")) {
        base = load_config(j.at("base_path").get<std::string>());
    } else if (j.contains("base")) {
        base = j.at("base");
    } else {
        throw ConfigError("sweep spec: missing 'base' or 'base_path'");
    }
    spec.base = run_config_from_json(base);
    spec.base_json = base;
    if (j.contains("eval_count")) {
        spec.base.eval_count = j.at("eval_count").get<std::size_t>();
        spec.base_json["eval"]["count"] = spec.base.eval_count;
    }

    spec.lambda_c = j.value("lambda_c", std::vector<double>{spec.base.guidance.lambda_c});
    spec.inference_steps =
        j.value("T", std::vector<std::size_t>{spec.base.guidance.inference_steps});
    spec.t_sup = j.value("t_sup", std::vector<double>{spec.base.refine.t_sup});
    std::vector<std::string> names =
        j.value("variant", std::vector<std::string>{variant_name(spec.base.guidance.variant)});
    for (const std::string& n : names) spec.variants.push_back(variant_from_name(n));
    if (spec.lambda_c.empty() || spec.inference_steps.empty() || spec.t_sup.empty() ||
        spec.variants.empty())
        throw ConfigError("sweep spec: empty grid axis");
    return spec;
}

json sweep_point_json(const SweepSpec& spec, GuidanceVariant variant, std::size_t t,
                      double lambda_c, double t_sup) {
    json point = spec.base_json;
    point.erase("preset"); // presets were already folded into the base
    point["guidance"]["variant"] = variant_name(variant);
    point["guidance"]["T"] = t;
    point["guidance"]["lambda_c"] = lambda_c;
    point["refine"]["t_sup"] = t_sup;
    return point;
}

} // namespace vcx::cli
