#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cri/harness/config.hpp"
#include "cri/harness/run_record.hpp"

namespace cri::harness {

// Ground-truth target with a known latent.
struct Target {
  ClassLabel label;
  std::uint64_t seed = 0;
  double detail = 0.0;
  LatentZ z;
  LatentW w_star;
  Image clean;
};

// clean = synthesis(mapping(z, c)) with z drawn from the target stream. A
// nonzero `detail` adds a gray plane-wave texture of that amplitude, which the
// generator cannot represent exactly.
Target synth_target(const ToyGenerator& generator, ClassLabel c, std::uint64_t seed, double detail = 0.0);
void add_detail(Image& image, std::uint64_t seed, double amplitude);

// Generator, extractor and per-class caches shared by a batch of runs.
class Workspace {
 public:
  explicit Workspace(const Config& config, std::filesystem::path cache_dir = {});

  const Config& config() const { return config_; }
  const ToyGenerator& generator() const { return generator_; }
  const FeatureExtractor& extractor() const { return extractor_; }

  // Memory cache, then the optional on-disk cache, then a fresh build.
  const CentroidSet& centroids(ClassLabel c, const ClusterConfig& cluster);
  // Embedding statistics of `kReferenceSetSize` held-out class samples.
  const GaussianStats& reference_stats(ClassLabel c);

  static constexpr int kReferenceSetSize = 64;

 private:
  Config config_;
  ToyGenerator generator_;
  FeatureExtractor extractor_;
  std::filesystem::path cache_dir_;
  std::map<std::string, std::unique_ptr<CentroidSet>> centroids_;
  std::map<int, GaussianStats> reference_;
};

struct RunInput {
  std::string run_id;
  Config config;  // generator/perception sections must match the workspace
  ClassLabel label;
  Image degraded;
  std::optional<Image> clean;  // reference for metrics; also saved as the input artifact
  std::string source = "synthetic";
  std::optional<std::uint64_t> target_seed;
  double detail = 0.0;
  std::map<std::string, std::string> tags;
};

RunMetrics evaluate_run(Workspace& ws, const DegradationSpec& spec, const RunInput& input,
                        const InversionResult& result);

// Runs one inversion. With a non-empty `dir`, writes PNG artifacts and
// dir/record.json. A diverged run yields a record with status "diverged".
RunRecord execute(Workspace& ws, const RunInput& input, const std::filesystem::path& dir,
                  const std::string& plan_hash = {});

struct PlanEntry {
  std::string id;
  std::string image;  // clean input PNG; empty means a synthetic target
  std::uint64_t target_seed = 0;
  double detail = 0.0;
  int class_index = 0;
  nlohmann::json overrides = nlohmann::json::object();  // config sections
};

struct ExperimentPlan {
  Config base;
  std::vector<PlanEntry> entries;
  std::string output_dir;
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
ExperimentPlan load_plan(const std::filesystem::path& path);
// FNV-1a of the file bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

// Serial; one subdirectory per entry id.
std::vector<RunRecord> run_plan(const ExperimentPlan& plan, const std::string& plan_hash,
                                const std::filesystem::path& output_dir,
                                const std::filesystem::path& cache_dir = {});

struct ClusterSweep {
  int targets = 20;
  std::vector<int> clusters{1, 5, 10, 15};
  std::uint64_t target_seed = 1000;
  double detail = 0.0;
};

struct RegSweep {
  int targets = 20;
  std::uint64_t target_seed = 2000;
  double detail = 0.02;
};

// Each writes one record per run under out/runs, then the tables and plot.
std::vector<RunRecord> ablate_clusters(Workspace& ws, const Config& base, const ClusterSweep& sweep,
                                       const std::filesystem::path& out);
std::vector<RunRecord> ablate_reg(Workspace& ws, const Config& base, const RegSweep& sweep,
                                  const std::filesystem::path& out);

// Table text derived purely from records (tags select the experiment).
std::string cluster_table(const std::vector<RunRecord>& records);
std::string cluster_summary(const std::vector<RunRecord>& records);
std::string reg_table(const std::vector<RunRecord>& records);
std::string reg_summary(const std::vector<RunRecord>& records);

struct TableCheck {
  std::filesystem::path table;
  bool ok = false;
  std::string detail;
};

// Re-derives every table in an ablation output directory from its records
// and compares it with the file on disk.
std::vector<TableCheck> verify_tables(const std::filesystem::path& out);

std::vector<RunRecord> load_records(const std::filesystem::path& dir);

}  // namespace cri::harness
