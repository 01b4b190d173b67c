#pragma once

#include <string>

#include "vcx/errors.hpp"

namespace vcx {

enum class Task { Classification, Regression };

inline std::string task_name(Task t) {
    return t == Task::Classification ? "classification" : "regression";
}

inline Task task_from_name(const std::string& name) {
    if (name == "classification") return Task::Classification;
    if (name == "regression") return Task::Regression;
    throw ConfigError("unknown task '" + name + "'");
}

/// A class id or scalar value, used both as the denoiser conditioning input
/// and as the counterfactual target y'.
struct Conditioning {
    Task task = Task::Classification;
    int class_id = -1;
    float value = 0.0f;

    static Conditioning of_class(int id) { return {Task::Classification, id, 0.0f}; }
    static Conditioning of_value(float v) { return {Task::Regression, -1, v}; }
};

} // namespace vcx
