#include "cri/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cri/errors.hpp"
#include "cri/harness/plot.hpp"

namespace cri::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kClusterExperiment = "ablate-clusters";
constexpr const char* kRegExperiment = "ablate-reg";
constexpr const char* kReferenceLpips =
    "# published full-scale reference (LPIPS): no-reg 0.1996, l1 0.1694, l2 0.1560";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<const RunRecord*> tagged(const std::vector<RunRecord>& records, const std::string& experiment) {
  std::vector<const RunRecord*> out;
  for (const auto& r : records) {
    auto it = r.tags.find("experiment");
    if (it != r.tags.end() && it->second == experiment) out.push_back(&r);
  }
  std::sort(out.begin(), out.end(), [](const RunRecord* a, const RunRecord* b) { return a->run_id < b->run_id; });
  return out;
}

const std::string& tag(const RunRecord& r, const std::string& key) {
  auto it = r.tags.find(key);
  if (it == r.tags.end()) throw CorruptSnapshotError("run " + r.run_id + " has no '" + key + "' tag");
  return it->second;
}

std::string metric(const std::optional<RunMetrics>& m, std::optional<double> RunMetrics::*field) {
  if (!m || !((*m).*field)) return "";
  return fmt(*((*m).*field));
}

std::string metric(const std::optional<RunMetrics>& m, double RunMetrics::*field) {
  return m ? fmt((*m).*field) : "";
}

bool usable(const RunRecord& r) { return r.status == "ok" && r.metrics && r.metrics->perceptual; }

void write_png_checked(const fs::path& path, const Image& image) { write_png(path, image); }

}  // namespace

Target synth_target(const ToyGenerator& generator, ClassLabel c, std::uint64_t seed, double detail) {
  Engine engine = make_engine(seed, Stream::Targets, 0);
  Target t;
  t.label = c;
  t.seed = seed;
  t.detail = detail;
  t.z = generator.sample_z(engine);
  t.w_star = generator.mapping(t.z, c);
  t.clean = generator.synthesis(t.w_star);
  if (detail != 0.0) add_detail(t.clean, seed, detail);
  return t;
}

void add_detail(Image& image, std::uint64_t seed, double amplitude) {
  Engine engine = make_engine(seed, Stream::Targets, 1);
  std::normal_distribution<double> n(0.0, 1.0);
  const double fx1 = 3 * n(engine), fy1 = 3 * n(engine), ph1 = n(engine);
  const double fx2 = 6 * n(engine), fy2 = 6 * n(engine), ph2 = n(engine);
  const double tau = 2 * std::numbers::pi;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double u = static_cast<double>(x) / image.width, v = static_cast<double>(y) / image.height;
      const double wave = std::sin(tau * (fx1 * u + fy1 * v) + ph1) + std::sin(tau * (fx2 * u + fy2 * v) + ph2);
      for (int ch = 0; ch < 3; ++ch) {
        image.at(y, x, ch) = std::clamp(image.at(y, x, ch) + 0.5 * amplitude * wave, 0.0, 1.0);
      }
    }
  }
}

Workspace::Workspace(const Config& config, fs::path cache_dir)
    : config_(config),
      generator_(make_generator(config)),
      extractor_(make_extractor(config)),
      cache_dir_(std::move(cache_dir)) {}

const CentroidSet& Workspace::centroids(ClassLabel c, const ClusterConfig& cluster) {
  const std::string key = centroid_key(generator_.seed(), c, cluster.samples, cluster.clusters, cluster.seed);
  const std::string memo = key + "_i" + std::to_string(cluster.max_iters) + "_t" + fmt(cluster.tol);
  if (auto it = centroids_.find(memo); it != centroids_.end()) return *it->second;

  const ClusterConfig defaults;
  const bool cacheable =
      !cache_dir_.empty() && cluster.max_iters == defaults.max_iters && cluster.tol == defaults.tol;
  std::unique_ptr<CentroidSet> set;
  if (cacheable && fs::exists(cache_dir_ / (key + ".json"))) {
    set = std::make_unique<CentroidSet>(load_centroids(cache_dir_, key, generator_));
  } else {
    set = std::make_unique<CentroidSet>(build_centroids(generator_, c, cluster));
    if (cacheable) {
      fs::create_directories(cache_dir_);
      save_centroids(cache_dir_, key, *set);
    }
  }
  return *centroids_.emplace(memo, std::move(set)).first->second;
}

const GaussianStats& Workspace::reference_stats(ClassLabel c) {
  if (auto it = reference_.find(c.index); it != reference_.end()) return it->second;
  Engine engine = make_engine(generator_.seed(), Stream::HeldOut, static_cast<std::uint64_t>(c.index));
  std::vector<Image> images;
  images.reserve(kReferenceSetSize);
  for (int i = 0; i < kReferenceSetSize; ++i) {
    images.push_back(generator_.synthesis(generator_.mapping(generator_.sample_z(engine), c)));
  }
  return reference_.emplace(c.index, embed_set(extractor_, images)).first->second;
}

RunMetrics evaluate_run(Workspace& ws, const DegradationSpec& spec, const RunInput& input,
                        const InversionResult& result) {
  const FeatureExtractor& fx = ws.extractor();
  RunMetrics m;
  const Image observed = apply(spec, result.restored);
  m.observed_perceptual = fx.distance(observed, input.degraded);
  m.observed_mse = pixel_l2(observed, input.degraded);
  const Image pivot_image = ws.generator().synthesis(result.pivot);
  m.pivot_observed_mse = pixel_l2(apply(spec, pivot_image), input.degraded);
  if (input.clean) {
    m.perceptual = fx.distance(result.restored, *input.clean);
    m.mse = pixel_l2(result.restored, *input.clean);
    m.psnr = psnr_from_mse(*m.mse);
    m.pivot_perceptual = fx.distance(pivot_image, *input.clean);
  }
  const GaussianStats& ref = ws.reference_stats(input.label);
  const std::vector<double> pooled = fx.embed(result.restored).pooled();
  const std::vector<double> zero(pooled.size() * pooled.size(), 0.0);
  m.frechet = frechet_distance(ref.mean, ref.cov, pooled, zero);
  return m;
}

RunRecord execute(Workspace& ws, const RunInput& input, const fs::path& dir, const std::string& plan_hash) {
  if (input.config.generator != ws.config().generator ||
      input.config.generator_seed != ws.config().generator_seed ||
      input.config.perception != ws.config().perception ||
      input.config.extractor_weights != ws.config().extractor_weights) {
    throw ConfigError("generator", "run config does not match the workspace generator/perception");
  }
  const auto start = std::chrono::steady_clock::now();
  RunRecord r;
  r.run_id = input.run_id;
  r.plan_hash = plan_hash;
  r.config = input.config;
  r.class_index = input.label.index;
  r.source = input.source;
  r.target_seed = input.target_seed;
  r.detail = input.detail;
  r.tags = input.tags;
  r.started_at = utc_timestamp();

  const int res = ws.generator().layout().resolution;
  const DegradationSpec spec = make_spec(input.config.task, res);
  const InversionConfig ic = inversion_config(input.config);
  const CentroidSet* set = nullptr;
  if (ic.mode != InversionMode::AvgInit) {
    set = &ws.centroids(input.label, ic.cluster);
    r.centroid_key = centroid_key(ws.generator().seed(), input.label, ic.cluster.samples,
                                  ic.cluster.clusters, ic.cluster.seed);
  }

  std::optional<InversionResult> result;
  try {
    result = invert(ws.generator(), ws.extractor(), input.degraded, input.label, spec, ic, set);
  } catch (const DivergenceError& e) {
    r.status = "diverged";
    r.error = e.what();
    (e.stage() == "stage 2" ? r.stage2 : r.stage1) = e.trajectory();
  }

  if (result) {
    r.centroid_index = result->selection.index;
    r.centroid_count = static_cast<int>(result->selection.distances.size());
    r.centroid_distances = result->selection.distances;
    r.alpha = result->alpha;
    r.stage1 = result->stage1;
    r.stage2 = result->stage2;
    r.stage1_best = result->stage1_best;
    r.stage2_best = result->stage2_best;
    r.offset_l2 = result->offset.norm();
    r.offset_l1 = result->offset.norm_l1();
    r.pivot.assign(result->pivot.values().begin(), result->pivot.values().end());
    r.theta_hash = result->theta_star.hash();
    r.metrics = evaluate_run(ws, spec, input, *result);
  }

  if (!dir.empty()) {
    fs::create_directories(dir);
    if (input.clean) {
      write_png_checked(dir / "input.png", *input.clean);
      r.artifacts["input"] = "input.png";
    }
    write_png_checked(dir / "degraded.png", input.degraded);
    r.artifacts["degraded"] = "degraded.png";
    if (result) {
      write_png_checked(dir / "restored.png", result->restored);
      write_png_checked(dir / "centroid.png", ws.generator().synthesis(result->centroid));
      r.artifacts["restored"] = "restored.png";
      r.artifacts["centroid"] = "centroid.png";
    }
  }
  r.finished_at = utc_timestamp();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!dir.empty()) write_record(dir / "record.json", r);
  return r;
}

ExperimentPlan plan_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "plan must be a JSON object");
  for (const auto& item : j.items()) {
    if (item.key() != "config" && item.key() != "runs" && item.key() != "output_dir") {
      throw ConfigError(item.key(), "unknown key");
    }
  }
  ExperimentPlan plan;
  if (j.contains("config")) plan.base = config_from_json(j.at("config"));
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir", "expected a string");
    plan.output_dir = j.at("output_dir").get<std::string>();
  }
  if (!j.contains("runs") || !j.at("runs").is_array()) throw ConfigError("runs", "expected an array");

  std::set<std::string> ids;
  const auto& runs = j.at("runs");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string where = "runs[" + std::to_string(i) + "]";
    const json& e = runs[i];
    if (!e.is_object()) throw ConfigError(where, "expected an object");
    PlanEntry entry;
    json overrides = json::object();
    for (const auto& item : e.items()) {
      const std::string& k = item.key();
      const json& v = item.value();
      const std::string key = where + "." + k;
      try {
        if (k == "id") {
          entry.id = v.get<std::string>();
        } else if (k == "image") {
          entry.image = v.is_null() ? "" : v.get<std::string>();
        } else if (k == "target_seed") {
          const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
          if (!ok) throw ConfigError(key, "expected a non-negative integer");
          entry.target_seed = v.get<std::uint64_t>();
        } else if (k == "detail") {
          if (!v.is_number()) throw ConfigError(key, "expected a number");
          entry.detail = v.get<double>();
        } else if (k == "class") {
          if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
          entry.class_index = v.get<int>();
        } else if (k == "task") {
          overrides["task"]["kind"] = v;
        } else if (k == "mode") {
          overrides["mode"] = v;
        } else if (k == "overrides") {
          if (!v.is_object()) throw ConfigError(key, "expected an object");
          overrides.merge_patch(v);
        } else {
          throw ConfigError(key, "unknown key");
        }
      } catch (const json::exception& ex) {
        throw ConfigError(key, ex.what());
      }
    }
    if (overrides.contains("generator") || overrides.contains("perception")) {
      throw ConfigError(where + ".overrides", "generator and perception are fixed for a plan");
    }
    if (entry.class_index < 0 || entry.class_index >= plan.base.generator.classes) {
      throw ConfigError(where + ".class", "out of range");
    }
    try {
      config_from_json(overrides, plan.base);
    } catch (const ConfigError& ex) {
      throw ConfigError(where + ".overrides." + ex.key(), ex.what());
    }
    if (entry.id.empty()) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "run%03zu", i);
      entry.id = buf;
    }
    if (entry.id.find_first_of("/\\") != std::string::npos || entry.id == "." || entry.id == "..") {
      throw ConfigError(where + ".id", "must be a plain name");
    }
    if (!ids.insert(entry.id).second) throw ConfigError(where + ".id", "duplicate run id '" + entry.id + "'");
    entry.overrides = std::move(overrides);
    plan.entries.push_back(std::move(entry));
  }
  return plan;
}

ExperimentPlan load_plan(const fs::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  ExperimentPlan plan = plan_from_json(j);
  // Relative image paths are relative to the plan file.
  for (auto& e : plan.entries) {
    if (!e.image.empty() && fs::path(e.image).is_relative()) e.image = (path.parent_path() / e.image).string();
  }
  return plan;
}

std::string file_hash(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<RunRecord> run_plan(const ExperimentPlan& plan, const std::string& plan_hash,
                                const fs::path& output_dir, const fs::path& cache_dir) {
  const int res = plan.base.generator.resolution;
  // Load every input before any output is written.
  std::vector<std::optional<Image>> images;
  for (const auto& e : plan.entries) {
    if (e.image.empty()) {
      images.emplace_back();
      continue;
    }
    Image img = read_png(e.image);
    if (img.height != res || img.width != res) {
      throw ShapeMismatchError(e.image + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                               ", expected " + std::to_string(res) + "x" + std::to_string(res));
    }
    images.push_back(std::move(img));
  }

  Workspace ws(plan.base, cache_dir);
  std::vector<RunRecord> records;
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const PlanEntry& e = plan.entries[i];
    RunInput in;
    in.run_id = e.id;
    in.config = config_from_json(e.overrides, plan.base);
    in.label = ClassLabel{e.class_index};
    if (images[i]) {
      in.clean = *images[i];
      in.source = e.image;
    } else {
      Target t = synth_target(ws.generator(), in.label, e.target_seed, e.detail);
      in.clean = std::move(t.clean);
      in.target_seed = e.target_seed;
      in.detail = e.detail;
    }
    in.degraded = apply(make_spec(in.config.task, res), *in.clean);
    in.tags["experiment"] = "plan";
    records.push_back(execute(ws, in, output_dir / e.id, plan_hash));
  }
  return records;
}

std::vector<RunRecord> load_records(const fs::path& dir) {
  std::vector<RunRecord> out;
  for (const auto& p : find_records(dir)) out.push_back(read_record(p));
  return out;
}

std::string cluster_table(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "run_id,target,class,clusters,status,perceptual,mse,psnr,offset_l2\n";
  for (const RunRecord* r : tagged(records, kClusterExperiment)) {
    os << r->run_id << ',' << tag(*r, "target") << ',' << r->class_index << ',' << r->config.cluster.clusters
       << ',' << r->status << ',' << metric(r->metrics, &RunMetrics::perceptual) << ','
       << metric(r->metrics, &RunMetrics::mse) << ',' << metric(r->metrics, &RunMetrics::psnr) << ','
       << fmt(r->offset_l2) << '\n';
  }
  return os.str();
}

namespace {

struct ClusterPoint {
  int clusters;
  std::vector<double> perceptual;
  std::vector<double> psnr;
  int runs = 0;
};

std::vector<ClusterPoint> cluster_points(const std::vector<RunRecord>& records) {
  std::map<int, ClusterPoint> by_n;
  for (const RunRecord* r : tagged(records, kClusterExperiment)) {
    ClusterPoint& p = by_n[r->config.cluster.clusters];
    p.clusters = r->config.cluster.clusters;
    ++p.runs;
    if (usable(*r)) {
      p.perceptual.push_back(*r->metrics->perceptual);
      p.psnr.push_back(*r->metrics->psnr);
    }
  }
  std::vector<ClusterPoint> out;
  for (auto& [n, p] : by_n) out.push_back(std::move(p));
  return out;
}

std::set<std::string> distinct(const std::vector<const RunRecord*>& rs, const std::string& key) {
  std::set<std::string> out;
  for (const RunRecord* r : rs) out.insert(tag(*r, key));
  return out;
}

}  // namespace

std::string cluster_summary(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "clusters,mean_perceptual,std_perceptual,mean_psnr,runs,ok\n";
  for (const auto& p : cluster_points(records)) {
    os << p.clusters << ',' << fmt(mean(p.perceptual)) << ',' << fmt(stddev(p.perceptual)) << ','
       << fmt(mean(p.psnr)) << ',' << p.runs << ',' << p.perceptual.size() << '\n';
  }
  const auto rs = tagged(records, kClusterExperiment);
  std::string task = rs.empty() ? "?" : to_string(rs.front()->config.task.kind);
  os << "# desk scale: " << distinct(rs, "target").size() << " synthetic targets per setting, task " << task
     << ", metric: final perceptual distance to the clean target\n";
  return os.str();
}

std::string reg_table(const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << "run_id,target,class,variant,lambda2,status,perceptual,pivot_perceptual,observed_mse,pivot_observed_mse,"
        "offset_l2,offset_l1\n";
  for (const RunRecord* r : tagged(records, kRegExperiment)) {
    os << r->run_id << ',' << tag(*r, "target") << ',' << r->class_index << ',' << tag(*r, "variant") << ','
       << fmt(r->config.weights.lambda2) << ',' << r->status << ','
       << metric(r->metrics, &RunMetrics::perceptual) << ',' << metric(r->metrics, &RunMetrics::pivot_perceptual)
       << ',' << metric(r->metrics, &RunMetrics::observed_mse) << ','
       << metric(r->metrics, &RunMetrics::pivot_observed_mse) << ',' << fmt(r->offset_l2) << ','
       << fmt(r->offset_l1) << '\n';
  }
  return os.str();
}

std::string reg_summary(const std::vector<RunRecord>& records) {
  const auto rs = tagged(records, kRegExperiment);
  std::ostringstream os;
  os << "variant,mean_perceptual,mean_pivot_perceptual,mean_observed_mse,mean_pivot_observed_mse,"
        "mean_offset_l2,mean_offset_l1,runs,ok\n";
  for (const std::string variant : {"no-reg", "l1", "l2"}) {
    std::vector<double> perc, pperc, omse, pomse, l2, l1;
    int runs = 0;
    for (const RunRecord* r : rs) {
      if (tag(*r, "variant") != variant) continue;
      ++runs;
      if (!usable(*r)) continue;
      perc.push_back(*r->metrics->perceptual);
      pperc.push_back(*r->metrics->pivot_perceptual);
      omse.push_back(r->metrics->observed_mse);
      pomse.push_back(r->metrics->pivot_observed_mse);
      l2.push_back(r->offset_l2);
      l1.push_back(r->offset_l1);
    }
    if (runs == 0) continue;
    os << variant << ',' << fmt(mean(perc)) << ',' << fmt(mean(pperc)) << ',' << fmt(mean(omse)) << ','
       << fmt(mean(pomse)) << ',' << fmt(mean(l2)) << ',' << fmt(mean(l1)) << ',' << runs << ','
       << perc.size() << '\n';
  }
  std::string task = rs.empty() ? "?" : to_string(rs.front()->config.task.kind);
  os << "# desk scale: " << distinct(rs, "target").size() << " synthetic targets per variant, task " << task
     << ", metric: perceptual distance to the clean target\n";
  os << kReferenceLpips << '\n';
  return os.str();
}

namespace {

void write_cluster_outputs(const std::vector<RunRecord>& records, const fs::path& out) {
  write_text_atomic(out / "clusters.csv", cluster_table(records));
  write_text_atomic(out / "clusters_summary.csv", cluster_summary(records));
  Series s;
  for (const auto& p : cluster_points(records)) {
    s.x.push_back(p.clusters);
    s.y.push_back(mean(p.perceptual));
  }
  write_png(out / "clusters.png", line_plot({s}));
}

void write_reg_outputs(const std::vector<RunRecord>& records, const fs::path& out) {
  write_text_atomic(out / "reg.csv", reg_table(records));
  write_text_atomic(out / "reg_summary.csv", reg_summary(records));
}

std::string run_id(int target, const std::string& suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "t%02d_%s", target, suffix.c_str());
  return buf;
}

}  // namespace

std::vector<RunRecord> ablate_clusters(Workspace& ws, const Config& base, const ClusterSweep& sweep,
                                       const fs::path& out) {
  if (sweep.targets < 1) throw ConfigError("targets", "must be >= 1");
  if (sweep.clusters.empty()) throw ConfigError("clusters", "sweep is empty");
  for (int n : sweep.clusters) {
    if (n < 1 || n > base.cluster.samples) throw ConfigError("clusters", "each N must lie in [1, samples]");
  }
  const int res = ws.generator().layout().resolution;
  const DegradationSpec spec = make_spec(base.task, res);
  std::vector<RunRecord> records;
  for (int t = 0; t < sweep.targets; ++t) {
    const ClassLabel c{t % ws.generator().layout().classes};
    Target target = synth_target(ws.generator(), c, sweep.target_seed + t, sweep.detail);
    const Image degraded = apply(spec, target.clean);
    for (int n : sweep.clusters) {
      RunInput in;
      in.run_id = run_id(t, "n" + std::to_string(n));
      in.config = base;
      in.config.cluster.clusters = n;
      in.label = c;
      in.degraded = degraded;
      in.clean = target.clean;
      in.target_seed = target.seed;
      in.detail = target.detail;
      in.tags = {{"experiment", kClusterExperiment}, {"target", std::to_string(t)}};
      records.push_back(execute(ws, in, out.empty() ? fs::path{} : out / "runs" / in.run_id));
    }
  }
  if (!out.empty()) write_cluster_outputs(records, out);
  return records;
}

std::vector<RunRecord> ablate_reg(Workspace& ws, const Config& base, const RegSweep& sweep, const fs::path& out) {
  if (sweep.targets < 1) throw ConfigError("targets", "must be >= 1");
  const int res = ws.generator().layout().resolution;
  const DegradationSpec spec = make_spec(base.task, res);
  std::vector<RunRecord> records;
  for (int t = 0; t < sweep.targets; ++t) {
    const ClassLabel c{t % ws.generator().layout().classes};
    Target target = synth_target(ws.generator(), c, sweep.target_seed + t, sweep.detail);
    const Image degraded = apply(spec, target.clean);
    for (const std::string variant : {"no-reg", "l1", "l2"}) {
      RunInput in;
      in.run_id = run_id(t, variant);
      in.config = base;
      in.config.mode = InversionMode::Cri;
      if (variant == "no-reg") {
        in.config.mode = InversionMode::NoReg;
        in.config.weights.lambda2 = 0.0;
      } else {
        in.config.weights.offset_norm = variant == "l1" ? OffsetNorm::L1 : OffsetNorm::L2;
      }
      in.label = c;
      in.degraded = degraded;
      in.clean = target.clean;
      in.target_seed = target.seed;
      in.detail = target.detail;
      in.tags = {{"experiment", kRegExperiment}, {"target", std::to_string(t)}, {"variant", variant}};
      records.push_back(execute(ws, in, out.empty() ? fs::path{} : out / "runs" / in.run_id));
    }
  }
  if (!out.empty()) write_reg_outputs(records, out);
  return records;
}

std::vector<TableCheck> verify_tables(const fs::path& out) {
  const std::vector<RunRecord> records = load_records(out / "runs");
  const std::vector<std::pair<std::string, std::string (*)(const std::vector<RunRecord>&)>> tables{
      {"clusters.csv", cluster_table},
      {"clusters_summary.csv", cluster_summary},
      {"reg.csv", reg_table},
      {"reg_summary.csv", reg_summary},
  };
  std::vector<TableCheck> checks;
  for (const auto& [name, derive] : tables) {
    const fs::path path = out / name;
    if (!fs::exists(path)) continue;
    TableCheck check{path, false, {}};
    const std::string expected = derive(records);
    const std::string actual = read_text(path);
    if (expected == actual) {
      check.ok = true;
    } else {
      std::istringstream a(actual), e(expected);
      std::string la, le;
      int line = 1;
      while (true) {
        const bool ga = static_cast<bool>(std::getline(a, la));
        const bool ge = static_cast<bool>(std::getline(e, le));
        if (!ga && !ge) break;
        if (!ga || !ge || la != le) {
          check.detail = "line " + std::to_string(line) + ": file '" + (ga ? la : "<eof>") + "' vs records '" +
                         (ge ? le : "<eof>") + "'";
          break;
        }
        ++line;
      }
    }
    checks.push_back(std::move(check));
  }
  return checks;
}

}  // namespace cri::harness
