#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miabench/error.hpp"

namespace miabench {

/// Version string embedded in every artifact.
std::string_view tool_version() noexcept;

inline constexpr int kArtifactSchemaVersion = 1;

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every key a RunConfig accepts, in display order.
const std::vector<ConfigKey>& config_keys();

/// Flat string-valued run configuration. Every known key is always present
/// (defaults filled in); unknown keys throw Error(config_error). Typed
/// getters validate on access.
class RunConfig {
 public:
  RunConfig();

  void set(std::string_view key, std::string value);
  const std::string& get(std::string_view key) const;
  bool has_key(std::string_view key) const;

  std::string text(std::string_view key) const { return get(key); }
  std::uint64_t u64(std::string_view key) const;
  std::size_t size(std::string_view key) const { return static_cast<std::size_t>(u64(key)); }
  int integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::vector<std::string> list(std::string_view key) const;

  /// out/<name> unless the key holds an explicit path.
  std::filesystem::path path_or(std::string_view key, std::string_view default_name) const;
  std::filesystem::path out_dir() const { return get("out"); }

  nlohmann::json to_json() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// key=value lines; '#' starts a comment, blank lines are ignored.
/// Later assignments win. Applied on top of `base`.
RunConfig parse_config_text(std::string_view text, RunConfig base = {});
/// A key=value file, or a JSON artifact whose "config" object is reused.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Subcommands: synth, ingest, overlap, build, blind-eval, lm-train,
/// lm-score, mia-eval, report, pipeline.
const std::vector<std::string>& subcommands();

struct RunResult {
  ExitStatus status = ExitStatus::ok;
  std::string message;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs one subcommand. Never throws: module errors are mapped to exit
/// statuses and reported in `message`. Progress lines go to `log`.
RunResult run(std::string_view subcommand, const RunConfig& config, std::ostream& log);

/// Envelope shared by all JSON artifacts.
nlohmann::json artifact(std::string_view kind, const RunConfig& config);
/// Pretty-printed JSON with a trailing newline.
std::string dump_artifact(const nlohmann::json& j);

}  // namespace miabench
