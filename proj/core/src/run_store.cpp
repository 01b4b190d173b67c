#include "vcx/run_store.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vcx/archive.hpp"
#include "vcx/rng.hpp"

namespace vcx {

using nlohmann::json;

namespace {

json conditioning_to_json(const Conditioning& c) {
    return json{{"task", task_name(c.task)}, {"class_id", c.class_id}, {"value", c.value}};
}

Conditioning conditioning_from_json(const json& j) {
    Conditioning c;
    c.task = task_from_name(j.at("task").get<std::string>());
    c.class_id = j.at("class_id").get<int>();
    c.value = j.at("value").get<float>();
    return c;
}

json guidance_config_to_json(const GuidanceConfig& c) {
    return json{{"lambda_c", c.lambda_c},
                {"n_perturbations", c.n_perturbations},
                {"sigma", c.sigma},
                {"variant", variant_name(c.variant)},
                {"inference_steps", c.inference_steps},
                {"task", task_name(c.task)},
                {"master_seed", c.seed.master_seed},
                {"stream_label", c.seed.stream_label}};
}

GuidanceConfig guidance_config_from_json(const json& j) {
    GuidanceConfig c;
    c.lambda_c = j.at("lambda_c").get<double>();
    c.n_perturbations = j.at("n_perturbations").get<std::size_t>();
    c.sigma = j.at("sigma").get<double>();
    c.variant = variant_from_name(j.at("variant").get<std::string>());
    c.inference_steps = j.at("inference_steps").get<std::size_t>();
    c.task = task_from_name(j.at("task").get<std::string>());
    c.seed.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.seed.stream_label = j.at("stream_label").get<std::string>();
    return c;
}

} // namespace

void store_run(const std::string& directory, const CounterfactualResult& result,
               const RefineOutput* refinement, double generation_seconds) {
    std::filesystem::create_directories(directory);
    const std::filesystem::path dir(directory);

    TensorArchive archive;
    archive.put_video("x_f", result.x_f);
    archive.put_video("x_cf", result.x_cf);
    archive.put_latent("z_T", result.z_T);
    if (result.x_mask_cf) archive.put_video("x_mask_cf", *result.x_mask_cf);
    if (refinement) {
        archive.put_video("x_den", refinement->x_den);
        archive.put_f32("delta", {refinement->delta.frames, refinement->delta.height,
                                  refinement->delta.width},
                        refinement->delta.values);
        archive.put_u8("mask", {refinement->mask.frames, refinement->mask.height,
                                refinement->mask.width},
                       refinement->mask.values);
    }
    archive_save(archive, (dir / "tensors.ldvt").string());

    json trace = json::array();
    for (const StepTrace& s : result.trace)
        trace.push_back(json{{"t", s.t}, {"loss", s.loss}, {"grad_norm", s.grad_norm}});
    json meta{{"target", conditioning_to_json(result.y_prime)},
              {"pred_factual", result.pred_factual},
              {"pred_cf", result.pred_cf},
              {"pred_mask_cf", result.pred_mask_cf},
              {"trace", trace},
              {"config", guidance_config_to_json(result.config)},
              {"mask_density", result.mask_density},
              {"has_mask", result.x_mask_cf.has_value()},
              {"generation_seconds", generation_seconds}};
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
}

StoredRun load_run(const std::string& directory) {
    const std::filesystem::path dir(directory);
    std::ifstream in(dir / "meta.json");
    if (!in) throw StateError("run directory '" + directory + "' has no meta.json");
    json meta = json::parse(in);
    TensorArchive archive = archive_load((dir / "tensors.ldvt").string());

    StoredRun run;
    run.result.x_f = archive.get_video("x_f");
    run.result.x_cf = archive.get_video("x_cf");
    if (!archive.has("z_T")) throw StateError("run '" + directory + "' lost its z_T tensor");
    run.result.z_T = archive.get_latent("z_T");
    run.result.y_prime = conditioning_from_json(meta.at("target"));
    run.result.pred_factual = meta.at("pred_factual").get<std::vector<float>>();
    run.result.pred_cf = meta.at("pred_cf").get<std::vector<float>>();
    run.result.pred_mask_cf = meta.at("pred_mask_cf").get<std::vector<float>>();
    run.result.config = guidance_config_from_json(meta.at("config"));
    run.result.mask_density = meta.at("mask_density").get<double>();
    for (const json& s : meta.at("trace"))
        run.result.trace.push_back({s.at("t").get<std::size_t>(), s.at("loss").get<double>(),
                                    s.at("grad_norm").get<double>()});
    run.generation_seconds = meta.at("generation_seconds").get<double>();

    if (meta.at("has_mask").get<bool>()) {
        run.result.x_mask_cf = archive.get_video("x_mask_cf");
        RefineOutput refinement;
        refinement.x_den = archive.get_video("x_den");
        const ArchiveEntry& delta = archive.get("delta");
        refinement.delta.frames = delta.shape[0];
        refinement.delta.height = delta.shape[1];
        refinement.delta.width = delta.shape[2];
        refinement.delta.values = delta.f32;
        const ArchiveEntry& mask = archive.get("mask");
        refinement.mask.frames = mask.shape[0];
        refinement.mask.height = mask.shape[1];
        refinement.mask.width = mask.shape[2];
        refinement.mask.values = mask.u8;
        refinement.mask_density = run.result.mask_density;
        run.refinement = std::move(refinement);
    }
    return run;
}

std::string validate_run_dir(const std::string& directory) {
    try {
        StoredRun run = load_run(directory);
        if (!run.result.x_f.same_shape(run.result.x_cf)) return "x_f and x_cf shapes differ";
        if (run.result.x_mask_cf && !run.result.x_mask_cf->same_shape(run.result.x_f))
            return "x_mask_cf shape differs from x_f";
        if (run.result.trace.size() != run.result.config.inference_steps)
            return "trace length does not match the configured step count";
        if (run.result.pred_factual.empty() || run.result.pred_cf.empty())
            return "missing predictions";
        validate(run.result.x_f);
        validate(run.result.x_cf);
        validate(run.result.z_T);
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

std::string config_hash_of_json_text(const std::string& canonical_text) {
    const std::uint64_t h = fnv1a64(canonical_text.data(), canonical_text.size());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace vcx
