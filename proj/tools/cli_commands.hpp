#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace vcx::cli {

int cmd_dataset(const std::string& config_path, const std::string& out_dir);
int cmd_train(const std::string& component, const std::string& config_path,
              const std::string& out_dir, std::optional<std::uint64_t> seed);
int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::size_t workers);
int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::size_t workers);
int cmd_evaluate(const std::string& run_dir, const std::string& target_path,
                 const std::string& out_path);
int cmd_report(const std::string& dir, const std::string& out_dir);

} // namespace vcx::cli
