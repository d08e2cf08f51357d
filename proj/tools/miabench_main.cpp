// miabench: command-line driver for dataset construction and MIA evaluation.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "miabench/pipeline.hpp"

namespace {

constexpr const char* kSubcommandHelp[][2] = {
    {"synth", "generate the synthetic member/non-member pool"},
    {"ingest", "build a pool from .txt directories or JSONL files"},
    {"build", "select n members and n non-members (random | no-ngram | no-class)"},
    {"overlap", "n-gram overlap distributions of a selection and their KS distance"},
    {"blind-eval", "k-fold blind classifier ROC on a selection"},
    {"lm-train", "train the reference n-gram language model"},
    {"lm-score", "write log-prob traces of the selection"},
    {"mia-eval", "evaluate membership inference attacks from traces"},
    {"report", "merge stage artifacts into report.json and plot CSVs"},
    {"pipeline", "build, overlap, blind-eval, lm-train, lm-score, mia-eval, report"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Member/non-member benchmark construction and membership inference evaluation", "miabench"};
  app.set_version_flag("--version", std::string(miabench::tool_version()));
  app.require_subcommand(1, 1);

  std::string config_path;
  app.add_option("--config", config_path, "key=value file or a JSON artifact to reuse the config of");

  std::map<std::string, std::optional<std::string>> overrides;
  for (const auto& key : miabench::config_keys()) {
    auto& slot = overrides[key.name];
    std::string help = key.help;
    if (!key.default_value.empty()) help += " [" + key.default_value + "]";
    app.add_option("--" + key.name, slot, help)->group("Config keys");
  }

  std::string build_method;
  for (const auto& [name, help] : kSubcommandHelp) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    if (std::string_view(name) == "build")
      sub->add_option("method", build_method, "random | no-ngram | no-class (overrides --method)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(miabench::ExitStatus::config);
  }

  miabench::RunConfig config;
  try {
    if (!config_path.empty()) config = miabench::load_config_file(config_path, config);
    for (const auto& [key, value] : overrides)
      if (value) config.set(key, *value);
    if (!build_method.empty()) config.set("method", build_method);
  } catch (const miabench::Error& e) {
    std::cerr << "miabench: " << e.what() << '\n';
    return static_cast<int>(miabench::exit_status_for(e.code()));
  }

  const auto* sub = app.get_subcommands().front();
  const auto result = miabench::run(sub->get_name(), config, std::cout);
  if (result.status != miabench::ExitStatus::ok) std::cerr << "miabench: " << result.message << '\n';
  return static_cast<int>(result.status);
}
