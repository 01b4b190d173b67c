#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcx/datasets.hpp"
#include "vcx/diffusion.hpp"
#include "vcx/guidance.hpp"
#include "vcx/refine.hpp"

namespace vcx::cli {

using nlohmann::json;

/// Loads JSON from a file and applies environment overrides: any variable
/// VCX_a__b__c=value rewrites config["a"]["b"]["c"]. Values parse as JSON
/// first, falling back to plain strings.
json load_config(const std::string& path);
void apply_env_overrides(json& config, const char* const* envp = nullptr);

/// Canonical text (sorted keys, compact) and its 16-hex FNV-1a hash.
std::string canonical_text(const json& config);
std::string config_hash(const json& config);

DatasetConfig dataset_config_from_json(const json& j);
json dataset_config_to_json(const DatasetConfig& c);

struct ScheduleSpec {
    std::size_t t_train = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
};
ScheduleSpec schedule_spec_from_json(const json& j);

struct CheckpointRefs {
    std::string codec;
    std::string denoiser;
    std::string target;
    std::optional<std::string> codec_hash;
    std::optional<std::string> denoiser_hash;
    std::optional<std::string> target_hash;
};

struct RunConfig {
    Task task = Task::Classification;
    std::string dataset_dir;
    std::string split = "test";
    std::size_t eval_count = 64;
    CheckpointRefs checkpoints;
    ScheduleSpec schedule;
    GuidanceConfig guidance;
    RefineConfig refine;
    TargetSelectConfig target_select;
    std::uint64_t seed = 7;
    std::size_t keep_runs = 0; // 0 = keep all run directories
};

/// Parses a run config, applying the named preset (if any) before explicit
/// keys. Presets: "paper-regression" (lambda_c=0.15, T=15, t_sup=0.03),
/// "paper-classification" (lambda_c=55, T=5, t_sup=0.10); both use N=10.
RunConfig run_config_from_json(json j);
json run_config_to_json(const RunConfig& c);

struct SweepSpec {
    RunConfig base;
    json base_json;
    std::vector<double> lambda_c;
    std::vector<std::size_t> inference_steps;
    std::vector<double> t_sup;
    std::vector<GuidanceVariant> variants;
};

SweepSpec sweep_spec_from_json(const json& j);

/// The derived per-point config (base with the grid values substituted).
json sweep_point_json(const SweepSpec& spec, GuidanceVariant variant, std::size_t t,
                      double lambda_c, double t_sup);

} // namespace vcx::cli
