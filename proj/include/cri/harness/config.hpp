#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cri/cluster.hpp"
#include "cri/degrade.hpp"
#include "cri/generator.hpp"
#include "cri/invert.hpp"
#include "cri/perception.hpp"

namespace cri::harness {

enum class TaskKind { Identity, Inpaint, Colorize, SuperResolution };

struct TaskConfig {
  TaskKind kind = TaskKind::Inpaint;
  int scale = 4;
  double mask_fraction = 0.25;
  std::string mask;  // optional PNG; empty means the centered box
  DownsampleKernel kernel = DownsampleKernel::Box;

  bool operator==(const TaskConfig&) const = default;
};

struct Config {
  std::uint64_t seed = 0;
  InversionMode mode = InversionMode::Cri;

  std::uint64_t generator_seed = 1234;
  GeneratorLayout generator;

  ExtractorConfig perception;
  std::string extractor_weights;  // optional manifest written by FeatureExtractor::save

  ClusterConfig cluster;
  std::optional<std::uint64_t> cluster_seed;  // unset: use the run seed

  LossWeights weights;
  StageSchedule schedule;
  std::optional<double> interpolation_radius;

  TaskConfig task;

  bool operator==(const Config&) const = default;
};

nlohmann::json to_json(const Config& config);
// Starts from the defaults and applies every key present. Unknown keys and
// invalid values throw ConfigError naming the dotted key.
Config config_from_json(const nlohmann::json& j);
Config config_from_json(const nlohmann::json& j, Config base);
void validate(const Config& config);

// An empty (or whitespace-only) file yields the defaults.
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& config);

TaskKind task_from_string(const std::string& name);
std::string to_string(TaskKind kind);

// Degradation for the configured task at the generator's resolution.
DegradationSpec make_spec(const TaskConfig& task, int resolution);

InversionConfig inversion_config(const Config& config);

ToyGenerator make_generator(const Config& config);
FeatureExtractor make_extractor(const Config& config);

}  // namespace cri::harness
