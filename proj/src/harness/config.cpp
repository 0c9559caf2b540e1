#include "cri/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cri/errors.hpp"
#include "cri/image.hpp"

namespace cri::harness {

using nlohmann::json;

namespace {

// Reads keys from one JSON object, remembering which were consumed so the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_, "expected an object");
  }

  std::string key(const std::string& k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

  const json* find(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& k, int& out) {
    if (const json* v = find(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      out = v->get<int>();
    }
  }

  void read(const std::string& k, std::uint64_t& out) {
    if (const json* v = find(k)) out = as_seed(*v, key(k));
  }

  void read(const std::string& k, double& out) {
    if (const json* v = find(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& k, bool& out) {
    if (const json* v = find(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
      out = v->get<bool>();
    }
  }

  void read(const std::string& k, std::string& out) {
    if (const json* v = find(k)) {
      if (v->is_null()) {
        out.clear();
      } else if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        throw ConfigError(key(k), "expected a string");
      }
    }
  }

  void read(const std::string& k, std::optional<double>& out) {
    if (const json* v = find(k)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw ConfigError(key(k), "expected a number or null");
      }
    }
  }

  void read(const std::string& k, std::optional<std::uint64_t>& out) {
    if (const json* v = find(k)) {
      if (v->is_null()) {
        out.reset();
      } else {
        out = as_seed(*v, key(k));
      }
    }
  }

  template <class F>
  void read_enum(const std::string& k, F&& parse) {
    if (const json* v = find(k)) {
      if (!v->is_string()) throw ConfigError(key(k), "expected a string");
      try {
        parse(v->get<std::string>());
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(key(k), e.what());
      }
    }
  }

  const json* child(const std::string& k) {
    const json* v = find(k);
    if (v && !v->is_object()) throw ConfigError(key(k), "expected an object");
    return v;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError(key(item.key()), "unknown key");
    }
  }

 private:
  static std::uint64_t as_seed(const json& v, const std::string& name) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(name, "must be non-negative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ConfigError(name, "expected an integer");
  }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

OffsetNorm norm_from_string(const std::string& s) {
  if (s == "l2") return OffsetNorm::L2;
  if (s == "l1") return OffsetNorm::L1;
  throw Error("unknown offset norm '" + s + "' (expected l2 or l1)");
}

LatentSpace space_from_string(const std::string& s) {
  if (s == "w+") return LatentSpace::WPlus;
  if (s == "w") return LatentSpace::W;
  throw Error("unknown latent space '" + s + "' (expected w or w+)");
}

DownsampleKernel kernel_from_string(const std::string& s) {
  if (s == "box") return DownsampleKernel::Box;
  if (s == "nearest") return DownsampleKernel::Nearest;
  throw Error("unknown downsample kernel '" + s + "' (expected box or nearest)");
}

std::string to_string(DownsampleKernel k) { return k == DownsampleKernel::Box ? "box" : "nearest"; }

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void non_negative(double v, const std::string& key) {
  require(std::isfinite(v) && v >= 0.0, key, "must be a finite value >= 0");
}

void positive(double v, const std::string& key) {
  require(std::isfinite(v) && v > 0.0, key, "must be a finite value > 0");
}

}  // namespace

TaskKind task_from_string(const std::string& name) {
  if (name == "inpaint") return TaskKind::Inpaint;
  if (name == "colorize") return TaskKind::Colorize;
  if (name == "sr") return TaskKind::SuperResolution;
  if (name == "identity") return TaskKind::Identity;
  throw Error("unknown task '" + name + "' (expected inpaint, colorize, sr or identity)");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Inpaint: return "inpaint";
    case TaskKind::Colorize: return "colorize";
    case TaskKind::SuperResolution: return "sr";
    case TaskKind::Identity: return "identity";
  }
  return "?";
}

json to_json(const Config& c) {
  json j;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["generator"] = {{"seed", c.generator_seed},       {"resolution", c.generator.resolution},
                    {"layers", c.generator.layers},   {"z_dim", c.generator.z_dim},
                    {"w_dim", c.generator.w_dim},     {"classes", c.generator.classes},
                    {"modes", c.generator.modes},     {"hidden", c.generator.hidden}};
  j["perception"] = {{"seed", c.perception.seed},
                     {"scales", c.perception.scales},
                     {"channels", c.perception.channels},
                     {"weights", c.extractor_weights.empty() ? json(nullptr) : json(c.extractor_weights)}};
  j["cluster"] = {{"samples", c.cluster.samples},
                  {"clusters", c.cluster.clusters},
                  {"kmeans_iters", c.cluster.max_iters},
                  {"tol", c.cluster.tol},
                  {"seed", c.cluster_seed ? json(*c.cluster_seed) : json(nullptr)},
                  {"degrade_centers", c.cluster.degrade_centers}};
  j["weights"] = {{"lambda1", c.weights.lambda1},
                  {"lambda2", c.weights.lambda2},
                  {"lambda_l2", c.weights.lambda_l2},
                  {"lambda_r", c.weights.lambda_r},
                  {"lambda_l2_r", c.weights.lambda_l2_r},
                  {"offset_norm", to_string(c.weights.offset_norm)}};
  j["schedule"] = {{"stage1_iters", c.schedule.stage1_iters},
                   {"stage2_iters", c.schedule.stage2_iters},
                   {"stage1_lr", c.schedule.stage1_lr},
                   {"stage2_lr", c.schedule.stage2_lr},
                   {"optimizer", "adam"},
                   {"latent_space", to_string(c.schedule.space)},
                   {"interpolation_radius",
                    c.interpolation_radius ? json(*c.interpolation_radius) : json(nullptr)}};
  j["task"] = {{"kind", to_string(c.task.kind)},
               {"scale", c.task.scale},
               {"mask_fraction", c.task.mask_fraction},
               {"mask", c.task.mask.empty() ? json(nullptr) : json(c.task.mask)},
               {"downsample_kernel", to_string(c.task.kernel)}};
  return j;
}

Config config_from_json(const json& j) { return config_from_json(j, Config{}); }

Config config_from_json(const json& j, Config c) {
  if (j.is_null()) return c;
  Section top(j, "");
  top.read("seed", c.seed);
  top.read_enum("mode", [&](const std::string& s) { c.mode = mode_from_string(s); });

  if (const json* g = top.child("generator")) {
    Section s(*g, "generator");
    s.read("seed", c.generator_seed);
    s.read("resolution", c.generator.resolution);
    s.read("layers", c.generator.layers);
    s.read("z_dim", c.generator.z_dim);
    s.read("w_dim", c.generator.w_dim);
    s.read("classes", c.generator.classes);
    s.read("modes", c.generator.modes);
    s.read("hidden", c.generator.hidden);
    s.finish();
  }
  if (const json* p = top.child("perception")) {
    Section s(*p, "perception");
    s.read("seed", c.perception.seed);
    s.read("scales", c.perception.scales);
    s.read("channels", c.perception.channels);
    s.read("weights", c.extractor_weights);
    s.finish();
  }
  if (const json* k = top.child("cluster")) {
    Section s(*k, "cluster");
    s.read("samples", c.cluster.samples);
    s.read("clusters", c.cluster.clusters);
    s.read("kmeans_iters", c.cluster.max_iters);
    s.read("tol", c.cluster.tol);
    s.read("seed", c.cluster_seed);
    s.read("degrade_centers", c.cluster.degrade_centers);
    s.finish();
  }
  if (const json* w = top.child("weights")) {
    Section s(*w, "weights");
    s.read("lambda1", c.weights.lambda1);
    s.read("lambda2", c.weights.lambda2);
    s.read("lambda_l2", c.weights.lambda_l2);
    s.read("lambda_r", c.weights.lambda_r);
    s.read("lambda_l2_r", c.weights.lambda_l2_r);
    s.read_enum("offset_norm", [&](const std::string& v) { c.weights.offset_norm = norm_from_string(v); });
    s.finish();
  }
  if (const json* sc = top.child("schedule")) {
    Section s(*sc, "schedule");
    s.read("stage1_iters", c.schedule.stage1_iters);
    s.read("stage2_iters", c.schedule.stage2_iters);
    s.read("stage1_lr", c.schedule.stage1_lr);
    s.read("stage2_lr", c.schedule.stage2_lr);
    s.read_enum("optimizer", [](const std::string& v) {
      if (v != "adam") throw Error("only 'adam' is supported");
    });
    s.read_enum("latent_space", [&](const std::string& v) { c.schedule.space = space_from_string(v); });
    s.read("interpolation_radius", c.interpolation_radius);
    s.finish();
  }
  if (const json* t = top.child("task")) {
    Section s(*t, "task");
    s.read_enum("kind", [&](const std::string& v) { c.task.kind = task_from_string(v); });
    s.read("scale", c.task.scale);
    s.read("mask_fraction", c.task.mask_fraction);
    s.read("mask", c.task.mask);
    s.read_enum("downsample_kernel", [&](const std::string& v) { c.task.kernel = kernel_from_string(v); });
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

void validate(const Config& c) {
  const GeneratorLayout& g = c.generator;
  require(g.resolution >= 4, "generator.resolution", "must be >= 4");
  require(g.layers >= 1, "generator.layers", "must be >= 1");
  require(g.z_dim >= 1, "generator.z_dim", "must be >= 1");
  require(g.w_dim >= 1, "generator.w_dim", "must be >= 1");
  require(g.classes >= 1, "generator.classes", "must be >= 1");
  require(g.modes >= 1 && g.modes <= g.z_dim && g.modes <= g.w_dim, "generator.modes",
          "must be between 1 and min(z_dim, w_dim)");
  require(g.hidden >= 1, "generator.hidden", "must be >= 1");

  require(c.perception.scales >= 1, "perception.scales", "must be >= 1");
  require(c.perception.channels >= 1, "perception.channels", "must be >= 1");
  require(g.resolution % (1 << (c.perception.scales - 1)) == 0, "perception.scales",
          "resolution must be divisible by 2^(scales-1)");

  require(c.cluster.samples >= 1, "cluster.samples", "must be >= 1");
  require(c.cluster.clusters >= 1, "cluster.clusters", "must be >= 1");
  require(c.cluster.clusters <= c.cluster.samples, "cluster.clusters", "must not exceed cluster.samples");
  require(c.cluster.max_iters >= 1, "cluster.kmeans_iters", "must be >= 1");
  non_negative(c.cluster.tol, "cluster.tol");

  non_negative(c.weights.lambda1, "weights.lambda1");
  non_negative(c.weights.lambda2, "weights.lambda2");
  non_negative(c.weights.lambda_l2, "weights.lambda_l2");
  non_negative(c.weights.lambda_r, "weights.lambda_r");
  non_negative(c.weights.lambda_l2_r, "weights.lambda_l2_r");

  require(c.schedule.stage1_iters >= 0, "schedule.stage1_iters", "must be >= 0");
  require(c.schedule.stage2_iters >= 0, "schedule.stage2_iters", "must be >= 0");
  positive(c.schedule.stage1_lr, "schedule.stage1_lr");
  positive(c.schedule.stage2_lr, "schedule.stage2_lr");
  if (c.interpolation_radius) non_negative(*c.interpolation_radius, "schedule.interpolation_radius");

  require(c.task.scale >= 1, "task.scale", "must be >= 1");
  if (c.task.kind == TaskKind::SuperResolution) {
    require(g.resolution % c.task.scale == 0, "task.scale", "must divide generator.resolution");
  }
  require(std::isfinite(c.task.mask_fraction) && c.task.mask_fraction > 0.0 && c.task.mask_fraction < 1.0,
          "task.mask_fraction", "must lie in (0, 1)");
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    Config c;
    validate(c);
    return c;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << to_json(config).dump(2) << '\n';
  if (!out) throw IoError("failed writing config " + path.string());
}

DegradationSpec make_spec(const TaskConfig& task, int resolution) {
  DegradationSpec spec;
  switch (task.kind) {
    case TaskKind::Identity: spec = DegradationSpec::identity(); break;
    case TaskKind::Colorize: spec = DegradationSpec::grayscale(); break;
    case TaskKind::SuperResolution: spec = DegradationSpec::downsample(task.scale, task.kernel); break;
    case TaskKind::Inpaint:
      spec = DegradationSpec::masked(task.mask.empty()
                                         ? centered_box_mask(resolution, resolution, task.mask_fraction)
                                         : read_mask_png(task.mask));
      break;
  }
  spec.validate(resolution, resolution);
  return spec;
}

InversionConfig inversion_config(const Config& c) {
  InversionConfig ic;
  ic.cluster = c.cluster;
  ic.cluster.seed = c.cluster_seed.value_or(c.seed);
  ic.weights = c.weights;
  ic.schedule = c.schedule;
  ic.interpolation_radius = c.interpolation_radius;
  ic.seed = c.seed;
  ic.mode = c.mode;
  return ic;
}

ToyGenerator make_generator(const Config& c) { return ToyGenerator(c.generator_seed, c.generator); }

FeatureExtractor make_extractor(const Config& c) {
  if (!c.extractor_weights.empty()) {
    FeatureExtractor fx = FeatureExtractor::load(c.extractor_weights);
    if (fx.config().base_resolution != c.generator.resolution) {
      throw ConfigError("perception.weights", "base resolution does not match generator.resolution");
    }
    return fx;
  }
  ExtractorConfig e = c.perception;
  e.base_resolution = c.generator.resolution;
  return FeatureExtractor(e);
}

}  // namespace cri::harness
