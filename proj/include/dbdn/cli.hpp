#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dbdn/model.hpp"
#include "dbdn/train.hpp"

namespace dbdn {

/// Bad key or value in flags or a config file (exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
};

struct RunConfig {
  std::string command;
  ModelConfig model;
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path resume;
  std::filesystem::path val_data;
  std::uint64_t seed = 1;
  TrainSchedule schedule;
  std::uint64_t checkpoint_every = 1000;
  bool deterministic = false;
  int workers = 1;
  std::string baseline;  // empty or "bicubic"
  bool triptych = false;
  std::string op = "all";  // grad-check filter
  std::vector<int> scales{2, 3, 4};

  /// Assigns one field from its textual form. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Every field as key=value pairs in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// entries() rendered one "key=value" per line.
  std::string echo() const;
};

/// Keys accepted by RunConfig::set, in echo order.
const std::vector<std::string>& config_keys();

/// Applies "key=value" lines (blank lines and '#' comments ignored) on top
/// of `base`.
RunConfig apply_config_text(const std::string& text, RunConfig base);

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dbdn
