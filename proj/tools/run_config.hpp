#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evoprune/evoprune.h"

namespace evoprune::cli {

// Rejected configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using KeyValues = std::map<std::string, std::string, std::less<>>;

// Flat `key = value` lines. '#' starts a comment; blank lines are skipped.
// A repeated key keeps its last value.
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);

struct Preset {
  std::string_view name;
  ep_fitness_weights weights;
};

// The four shipped lambda profiles.
const std::vector<Preset>& presets();
const Preset* find_preset(std::string_view name);

struct RunConfig {
  std::filesystem::path data_dir = "data/mnist";
  std::filesystem::path out_dir = "runs";
  std::filesystem::path baseline;    // empty: <out>/baseline.ckpt
  std::filesystem::path checkpoint;  // eval input
  std::uint64_t seed = 0;
  // Fixed separately from `seed` so pretraining and every pruning run hold
  // out the same validation images.
  std::uint64_t split_seed = 0;
  std::size_t validation_size = 1000;
  bool lambda_given = false;
  ep_train_config pretrain{};
  ep_ga_config ga{};

  std::filesystem::path train_images() const { return data_dir / "train-images-idx3-ubyte"; }
  std::filesystem::path train_labels() const { return data_dir / "train-labels-idx1-ubyte"; }
  std::filesystem::path test_images() const { return data_dir / "t10k-images-idx3-ubyte"; }
  std::filesystem::path test_labels() const { return data_dir / "t10k-labels-idx1-ubyte"; }
  std::filesystem::path baseline_path() const {
    return baseline.empty() ? out_dir / "baseline.ckpt" : baseline;
  }
};

// Keys accepted in files and as overrides.
const std::vector<std::string_view>& known_keys();

// Defaults, then `preset`, then every other key; overrides beat the file.
// Unknown keys, malformed numbers and invalid lambda triples throw.
RunConfig build_config(const KeyValues& file, const KeyValues& overrides);

// Throws ConfigError naming the first missing path.
void require_files(const std::vector<std::filesystem::path>& paths);

}  // namespace evoprune::cli
