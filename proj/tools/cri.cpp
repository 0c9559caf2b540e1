#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cri/errors.hpp"
#include "cri/harness/config.hpp"
#include "cri/harness/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cri;
using namespace cri::harness;

namespace {

constexpr int kOk = 0;
constexpr int kDiverged = 1;
constexpr int kUsage = 2;

// Flags that map onto config keys; only the ones given on the command line
// are applied, on top of the config file and the environment.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> generator_seed;
  std::optional<std::string> mode;
  std::optional<std::string> task;
  std::optional<int> scale;
  std::optional<std::string> mask;
  std::optional<double> mask_fraction;
  std::optional<int> clusters;
  std::optional<int> samples;
  std::optional<std::uint64_t> cluster_seed;
  std::optional<double> lambda1, lambda2, lambda_l2, lambda_r, lambda_l2_r;
  std::optional<std::string> offset_norm;
  std::optional<int> stage1_iters, stage2_iters;
  std::optional<double> stage1_lr, stage2_lr;
  std::optional<std::string> space;
  std::optional<double> alpha;

  json patch() const {
    json p = json::object();
    auto set = [&](const char* section, const char* key, const auto& v) {
      if (v) p[section][key] = *v;
    };
    if (seed) p["seed"] = *seed;
    if (mode) p["mode"] = *mode;
    set("generator", "seed", generator_seed);
    set("task", "kind", task);
    set("task", "scale", scale);
    set("task", "mask", mask);
    set("task", "mask_fraction", mask_fraction);
    set("cluster", "clusters", clusters);
    set("cluster", "samples", samples);
    set("cluster", "seed", cluster_seed);
    set("weights", "lambda1", lambda1);
    set("weights", "lambda2", lambda2);
    set("weights", "lambda_l2", lambda_l2);
    set("weights", "lambda_r", lambda_r);
    set("weights", "lambda_l2_r", lambda_l2_r);
    set("weights", "offset_norm", offset_norm);
    set("schedule", "stage1_iters", stage1_iters);
    set("schedule", "stage2_iters", stage2_iters);
    set("schedule", "stage1_lr", stage1_lr);
    set("schedule", "stage2_lr", stage2_lr);
    set("schedule", "latent_space", space);
    set("schedule", "interpolation_radius", alpha);
    return p;
  }
};

struct Common {
  std::string config_path;
  std::string out;
  std::string cache;
  Overrides o;
};

void add_common(CLI::App* cmd, Common& c, bool tuning = true) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--out", c.out, "Output directory (env CRI_OUTPUT_DIR)");
  cmd->add_option("--cache", c.cache, "Centroid cache directory (default <out>/centroids)");
  cmd->add_option("--seed", c.o.seed, "Run seed (env CRI_SEED)");
  cmd->add_option("--generator-seed", c.o.generator_seed, "Toy generator seed");
  cmd->add_option("--task", c.o.task, "inpaint | colorize | sr | identity");
  cmd->add_option("--scale", c.o.scale, "Super-resolution factor");
  cmd->add_option("--mask", c.o.mask, "Mask PNG for inpainting (nonzero = observed)");
  cmd->add_option("--mask-fraction", c.o.mask_fraction, "Hidden area of the default centered mask");
  cmd->add_option("--clusters", c.o.clusters, "Number of centroids N");
  cmd->add_option("--samples", c.o.samples, "Latent samples M per class");
  cmd->add_option("--cluster-seed", c.o.cluster_seed, "Seed for sampling and k-means (default: run seed)");
  if (!tuning) return;
  cmd->add_option("--mode", c.o.mode, "cri | avg-init | no-reg | direct-w | joint");
  cmd->add_option("--lambda1", c.o.lambda1, "Stage-1 pixel weight");
  cmd->add_option("--lambda2", c.o.lambda2, "Offset norm weight");
  cmd->add_option("--lambda-l2", c.o.lambda_l2, "Stage-2 pixel weight");
  cmd->add_option("--lambda-r", c.o.lambda_r, "Locality weight");
  cmd->add_option("--lambda-l2-r", c.o.lambda_l2_r, "Pixel weight inside the locality term");
  cmd->add_option("--offset-norm", c.o.offset_norm, "l2 | l1");
  cmd->add_option("--stage1-iters", c.o.stage1_iters, "Offset optimization iterations");
  cmd->add_option("--stage2-iters", c.o.stage2_iters, "Generator finetuning iterations");
  cmd->add_option("--stage1-lr", c.o.stage1_lr, "Offset learning rate");
  cmd->add_option("--stage2-lr", c.o.stage2_lr, "Finetuning learning rate");
  cmd->add_option("--space", c.o.space, "w | w+");
  cmd->add_option("--alpha", c.o.alpha, "Locality interpolation radius (default: data-derived)");
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

Config resolve_config(Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : load_config(c.config_path);
  if (auto s = env("CRI_SEED")) {
    try {
      std::size_t used = 0;
      if (s->find('-') != std::string::npos) throw std::invalid_argument("negative");
      const auto v = std::stoull(*s, &used, 10);
      if (used != s->size()) throw std::invalid_argument("trailing characters");
      cfg.seed = v;
    } catch (const std::exception&) {
      throw ConfigError("CRI_SEED", "expected a non-negative integer, got '" + *s + "'");
    }
  }
  cfg = config_from_json(c.o.patch(), cfg);
  if (c.out.empty()) c.out = env("CRI_OUTPUT_DIR").value_or("cri-out");
  if (c.cache.empty()) c.cache = (fs::path(c.out) / "centroids").string();
  return cfg;
}

void print_metrics(const RunRecord& r) {
  json line = {{"run_id", r.run_id}, {"status", r.status}, {"centroid", r.centroid_index},
               {"offset_l2", r.offset_l2}};
  if (r.metrics) line["metrics"] = to_json(*r.metrics);
  std::cout << line.dump() << '\n';
}

int cmd_invert(Common& c, const std::string& input, int cls, bool observed, const std::string& reference,
               const std::string& id) {
  Config cfg = resolve_config(c);
  // Every input is read before anything is written.
  Image image = read_png(input);
  std::optional<Image> clean;
  if (!reference.empty()) clean = read_png(reference);

  Workspace ws(cfg, c.cache);
  if (cls < 0 || cls >= cfg.generator.classes) {
    throw InvalidClassError("class " + std::to_string(cls) + " out of range [0, " +
                            std::to_string(cfg.generator.classes) + ")");
  }
  const int res = cfg.generator.resolution;
  const DegradationSpec spec = make_spec(cfg.task, res);
  RunInput in;
  in.run_id = id;
  in.config = cfg;
  in.label = ClassLabel{cls};
  in.source = input;
  if (observed) {
    if (image.height != spec.output_height(res) || image.width != spec.output_width(res)) {
      throw ShapeMismatchError("observation " + input + " does not match the " + to_string(cfg.task.kind) +
                               " output size");
    }
    in.degraded = std::move(image);
    in.clean = std::move(clean);
  } else {
    if (image.height != res || image.width != res) {
      throw ShapeMismatchError(input + " must be " + std::to_string(res) + "x" + std::to_string(res));
    }
    in.degraded = apply(spec, image);
    in.clean = clean ? std::move(clean) : std::optional<Image>(std::move(image));
  }
  if (in.clean && (in.clean->height != res || in.clean->width != res)) {
    throw ShapeMismatchError("reference image must be " + std::to_string(res) + "x" + std::to_string(res));
  }
  const RunRecord r = execute(ws, in, fs::path(c.out) / id);
  print_metrics(r);
  return r.status == "ok" ? kOk : kDiverged;
}

int cmd_synth(Common& c, int cls, std::optional<std::uint64_t> target_seed, double detail) {
  Config cfg = resolve_config(c);
  if (cls < 0 || cls >= cfg.generator.classes) throw InvalidClassError("class out of range");
  const ToyGenerator gen = make_generator(cfg);
  const std::uint64_t seed = target_seed.value_or(cfg.seed);
  const Target t = synth_target(gen, ClassLabel{cls}, seed, detail);
  const DegradationSpec spec = make_spec(cfg.task, cfg.generator.resolution);
  const Image degraded = apply(spec, t.clean);

  const fs::path out(c.out);
  fs::create_directories(out);
  write_png(out / "clean.png", t.clean);
  write_png(out / "degraded.png", degraded);
  json manifest = {{"class", cls},
                   {"seed", seed},
                   {"detail", detail},
                   {"generator_seed", cfg.generator_seed},
                   {"task", to_string(cfg.task.kind)},
                   {"scale", cfg.task.scale},
                   {"z", t.z.values},
                   {"w_star", {{"layers", t.w_star.layers()}, {"dim", t.w_star.dim()}, {"values", t.w_star.values()}}},
                   {"clean", "clean.png"},
                   {"degraded", "degraded.png"},
                   {"degraded_size", {degraded.height, degraded.width}}};
  write_text_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << (out / "manifest.json").string() << '\n';
  return kOk;
}

int cmd_cluster(Common& c, std::optional<int> cls) {
  Config cfg = resolve_config(c);
  const ToyGenerator gen = make_generator(cfg);
  const InversionConfig ic = inversion_config(cfg);
  const fs::path out(c.out);
  fs::create_directories(out);
  const int first = cls.value_or(0);
  const int last = cls ? *cls + 1 : cfg.generator.classes;
  if (first < 0 || last > cfg.generator.classes) throw InvalidClassError("class out of range");
  for (int k = first; k < last; ++k) {
    const ClassLabel label{k};
    const CentroidSet set = build_centroids(gen, label, ic.cluster);
    const std::string key = centroid_key(gen.seed(), label, ic.cluster.samples, ic.cluster.clusters, ic.cluster.seed);
    save_centroids(out, key, set);
    for (int i = 0; i < set.size(); ++i) {
      write_png(out / (key + "_center" + std::to_string(i) + ".png"), set.center_images[i]);
    }
    std::cout << key << " inertia " << set.inertia << '\n';
  }
  return kOk;
}

int report_tables(const fs::path& out, const char* summary) {
  int status = kOk;
  for (const auto& check : verify_tables(out)) {
    if (!check.ok) {
      std::cerr << "table mismatch " << check.table.string() << ": " << check.detail << '\n';
      status = kUsage;
    }
  }
  std::ifstream in(out / summary);
  std::cout << in.rdbuf();
  return status;
}

int any_diverged(const std::vector<RunRecord>& records) {
  for (const auto& r : records) {
    if (r.status != "ok") return kDiverged;
  }
  return kOk;
}

int cmd_ablate_clusters(Common& c, ClusterSweep sweep, bool task_given) {
  if (!task_given) c.o.task = "colorize";
  Config cfg = resolve_config(c);
  Workspace ws(cfg, c.cache);
  const auto records = ablate_clusters(ws, cfg, sweep, c.out);
  const int tables = report_tables(c.out, "clusters_summary.csv");
  return tables != kOk ? tables : any_diverged(records);
}

int cmd_ablate_reg(Common& c, RegSweep sweep, bool task_given) {
  if (!task_given) c.o.task = "colorize";
  Config cfg = resolve_config(c);
  Workspace ws(cfg, c.cache);
  const auto records = ablate_reg(ws, cfg, sweep, c.out);
  const int tables = report_tables(c.out, "reg_summary.csv");
  return tables != kOk ? tables : any_diverged(records);
}

int cmd_eval(Common& c, const std::string& reference, const std::string& restored, const std::string& ref_dir,
             const std::string& res_dir) {
  Config cfg = resolve_config(c);
  const FeatureExtractor fx = make_extractor(cfg);
  json out;
  if (!reference.empty() || !restored.empty()) {
    if (reference.empty() || restored.empty()) throw ConfigError("eval", "--reference and --restored go together");
    const Image a = read_png(reference), b = read_png(restored);
    if (!a.same_shape(b)) throw ShapeMismatchError("images differ in size");
    const double mse = pixel_l2(b, a);
    out["perceptual"] = fx.distance(b, a);
    out["mse"] = mse;
    out["psnr"] = psnr_from_mse(mse);
  }
  if (!ref_dir.empty() || !res_dir.empty()) {
    if (ref_dir.empty() || res_dir.empty()) {
      throw ConfigError("eval", "--reference-dir and --restored-dir go together");
    }
    auto load_dir = [](const fs::path& dir) {
      if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
      std::vector<fs::path> paths;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path());
      }
      std::sort(paths.begin(), paths.end());
      std::vector<Image> images;
      for (const auto& p : paths) images.push_back(read_png(p));
      return images;
    };
    const auto ref = load_dir(ref_dir), res = load_dir(res_dir);
    if (ref.size() < 2 || res.size() < 2) throw IoError("each image set needs at least two PNGs");
    const GaussianStats a = embed_set(fx, ref), b = embed_set(fx, res);
    out["frechet"] = frechet_distance(a.mean, a.cov, b.mean, b.cov);
    out["reference_images"] = ref.size();
    out["restored_images"] = res.size();
  }
  if (out.is_null()) throw ConfigError("eval", "nothing to evaluate");
  std::cout << out.dump(2) << '\n';
  return kOk;
}

int cmd_plan(Common& c, const std::string& plan_path) {
  const ExperimentPlan plan = load_plan(plan_path);
  std::string out = c.out;
  if (out.empty()) out = env("CRI_OUTPUT_DIR").value_or(plan.output_dir.empty() ? "cri-out" : plan.output_dir);
  const std::string cache = c.cache.empty() ? (fs::path(out) / "centroids").string() : c.cache;
  const auto records = run_plan(plan, file_hash(plan_path), out, cache);
  for (const auto& r : records) print_metrics(r);
  return any_diverged(records);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering & regularized inversion on a procedural toy generator"};
  app.require_subcommand(1);
  Common common;

  auto* invert = app.add_subcommand("invert", "Restore one image and write a run record");
  std::string input, reference, id = "invert";
  int cls = -1;
  bool observed = false;
  invert->add_option("--input", input, "Clean input PNG (degraded with --task), or the observation with --observed")
      ->required();
  invert->add_option("--class", cls, "Class label")->required();
  invert->add_flag("--observed", observed, "Input is already degraded");
  invert->add_option("--reference", reference, "Clean reference PNG for metrics");
  invert->add_option("--id", id, "Run id (output subdirectory)");
  add_common(invert, common);

  auto* synth = app.add_subcommand("synth-target", "Write a synthetic target with known latent");
  int synth_cls = 0;
  std::optional<std::uint64_t> target_seed;
  double detail = 0.0;
  synth->add_option("--class", synth_cls, "Class label")->required();
  synth->add_option("--target-seed", target_seed, "Target seed (default: run seed)");
  synth->add_option("--detail", detail, "Amplitude of off-range texture added to the target");
  add_common(synth, common, false);

  auto* cluster = app.add_subcommand("cluster", "Precompute centroid sets");
  std::optional<int> cluster_cls;
  cluster->add_option("--class", cluster_cls, "Only this class (default: all)");
  add_common(cluster, common, false);

  auto* ablc = app.add_subcommand("ablate-clusters", "Sweep the number of centroids");
  ClusterSweep csweep;
  ablc->add_option("--targets", csweep.targets, "Synthetic targets");
  ablc->add_option("--sweep", csweep.clusters, "Centroid counts")->delimiter(',');
  ablc->add_option("--target-seed", csweep.target_seed, "First target seed");
  ablc->add_option("--detail", csweep.detail, "Off-range texture amplitude");
  add_common(ablc, common);

  auto* ablr = app.add_subcommand("ablate-reg", "Compare no-reg, L1 and L2 offset regularizers");
  RegSweep rsweep;
  ablr->add_option("--targets", rsweep.targets, "Synthetic targets");
  ablr->add_option("--target-seed", rsweep.target_seed, "First target seed");
  ablr->add_option("--detail", rsweep.detail, "Off-range texture amplitude");
  add_common(ablr, common);

  auto* eval = app.add_subcommand("eval", "Metrics between images or image sets");
  std::string eval_ref, eval_res, ref_dir, res_dir;
  eval->add_option("--reference", eval_ref, "Reference PNG");
  eval->add_option("--restored", eval_res, "Restored PNG");
  eval->add_option("--reference-dir", ref_dir, "Directory of reference PNGs (Fréchet distance)");
  eval->add_option("--restored-dir", res_dir, "Directory of restored PNGs (Fréchet distance)");
  add_common(eval, common, false);

  auto* plan = app.add_subcommand("plan", "Run an experiment plan");
  std::string plan_path;
  plan->add_option("plan", plan_path, "Plan JSON")->required();
  plan->add_option("--out", common.out, "Output directory (env CRI_OUTPUT_DIR)");
  plan->add_option("--cache", common.cache, "Centroid cache directory");

  auto* verify = app.add_subcommand("verify", "Re-derive ablation tables from their run records");
  std::string verify_dir;
  verify->add_option("dir", verify_dir, "Ablation output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*invert) return cmd_invert(common, input, cls, observed, reference, id);
    if (*synth) return cmd_synth(common, synth_cls, target_seed, detail);
    if (*cluster) return cmd_cluster(common, cluster_cls);
    if (*ablc) return cmd_ablate_clusters(common, csweep, ablc->count("--task") > 0);
    if (*ablr) return cmd_ablate_reg(common, rsweep, ablr->count("--task") > 0);
    if (*eval) return cmd_eval(common, eval_ref, eval_res, ref_dir, res_dir);
    if (*plan) return cmd_plan(common, plan_path);
    if (*verify) {
      bool ok = true;
      const auto checks = verify_tables(verify_dir);
      for (const auto& check : checks) {
        std::cout << (check.ok ? "ok       " : "MISMATCH ") << check.table.string() << ' ' << check.detail << '\n';
        ok = ok && check.ok;
      }
      if (checks.empty()) {
        std::cerr << "no tables found in " << verify_dir << '\n';
        return kUsage;
      }
      return ok ? kOk : kUsage;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
