#pragma once

#include <optional>
#include <string>

#include "vcx/guidance.hpp"
#include "vcx/refine.hpp"

namespace vcx {

/// A persisted run directory:
///   tensors.ldvt  x_f, x_cf, z_T [, x_mask_cf, x_den, delta, mask]
///   meta.json     target, predictions, trace, config echo, mask density, timing
struct StoredRun {
    CounterfactualResult result;
    std::optional<RefineOutput> refinement;
    double generation_seconds = 0.0; // wall clock around generate (+refine)
};

void store_run(const std::string& directory, const CounterfactualResult& result,
               const RefineOutput* refinement, double generation_seconds);

StoredRun load_run(const std::string& directory);

/// Structural check used by the generate smoke tests: required files present,
/// tensors and metadata consistent. Returns an empty string when valid, else
/// a description of the first problem.
std::string validate_run_dir(const std::string& directory);

/// 16-hex-digit FNV-1a64 over a canonical (sorted-key, compact) JSON dump.
std::string config_hash_of_json_text(const std::string& canonical_text);

} // namespace vcx
