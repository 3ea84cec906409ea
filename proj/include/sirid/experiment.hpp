#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sirid {

/// Subcommands accepted by run_experiment.
const std::vector<std::string>& experiment_subcommands();

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct RunReport {
  std::vector<std::filesystem::path> outputs;  // relative to the output directory
  std::uint64_t seed;
};

/// Throws config_validation naming the offending key when the document does
/// not match the subcommand's layout. Unknown keys are rejected.
void validate_config(std::string_view subcommand, const nlohmann::json& config);

/// Runs one subcommand and writes its artifacts plus manifest.json into
/// `out_dir`. Relative data paths resolve against `base_dir`.
RunReport run_experiment(std::string_view subcommand, const nlohmann::json& config,
                         const std::filesystem::path& out_dir,
                         const std::filesystem::path& base_dir = {},
                         const RunOverrides& overrides = {});

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// {"error": {"kind": ..., "message": ...}}
nlohmann::json error_document(const std::exception& e);

}  // namespace sirid
