#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cri/harness/config.hpp"
#include "cri/invert.hpp"

namespace cri::harness {

inline constexpr const char* kToolVersion = "0.3.0";

struct RunMetrics {
  // Against the clean reference image; absent when no reference is known.
  std::optional<double> perceptual;
  std::optional<double> mse;
  std::optional<double> psnr;
  // Same, for the stage-1 pivot rendered by the unmodified generator.
  std::optional<double> pivot_perceptual;
  // Observation fit: D(restored) vs the degraded input.
  double observed_perceptual = 0.0;
  double observed_mse = 0.0;
  double pivot_observed_mse = 0.0;
  // Fréchet distance between the class reference set statistics and the
  // restored image's pooled embedding (a zero-covariance Gaussian).
  double frechet = 0.0;

  bool operator==(const RunMetrics&) const = default;
};

struct RunRecord {
  std::string run_id;
  std::string tool_version = kToolVersion;
  std::string plan_hash;
  std::string status = "ok";  // or "diverged"
  std::string error;

  Config config;
  int class_index = 0;
  std::string source;  // input PNG path, or "synthetic"
  std::optional<std::uint64_t> target_seed;
  double detail = 0.0;
  std::map<std::string, std::string> tags;

  int centroid_index = 0;
  int centroid_count = 0;
  std::string centroid_key;
  std::vector<double> centroid_distances;
  double alpha = 0.0;

  Trajectory stage1;
  Trajectory stage2;
  int stage1_best = 0;
  int stage2_best = 0;

  double offset_l2 = 0.0;
  double offset_l1 = 0.0;
  std::vector<double> pivot;
  std::uint64_t theta_hash = 0;

  std::optional<RunMetrics> metrics;
  std::map<std::string, std::string> artifacts;  // role -> path relative to the record

  std::string started_at;
  std::string finished_at;
  double seconds = 0.0;

  bool operator==(const RunRecord&) const = default;
};

nlohmann::json to_json(const RunRecord& record);
nlohmann::json to_json(const RunMetrics& metrics);
RunRecord record_from_json(const nlohmann::json& j);

// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_record(const std::filesystem::path& path, const RunRecord& record);
RunRecord read_record(const std::filesystem::path& path);

// Every record.json below `dir`, ordered by path.
std::vector<std::filesystem::path> find_records(const std::filesystem::path& dir);

std::string utc_timestamp();

}  // namespace cri::harness
