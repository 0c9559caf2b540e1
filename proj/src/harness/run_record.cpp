#include "cri/harness/run_record.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "cri/errors.hpp"

namespace cri::harness {

using nlohmann::json;

namespace {

// JSON has no non-finite numbers; they are spelled out so diverged
// trajectories survive a round trip.
json number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  return v;
}

double number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  throw CorruptSnapshotError("run record: expected a number, got " + j.dump());
}

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::optional<double> optional_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return number(j);
}

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

std::vector<double> numbers(const json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(number(x));
  return v;
}

json trajectory_json(const Trajectory& t, int best) {
  json total = json::array(), perceptual = json::array(), pixel = json::array(), reg = json::array();
  for (const auto& e : t) {
    total.push_back(number(e.total));
    perceptual.push_back(number(e.perceptual));
    pixel.push_back(number(e.pixel));
    reg.push_back(number(e.regularizer));
  }
  return {{"best_iteration", best},
          {"total", total},
          {"perceptual", perceptual},
          {"pixel", pixel},
          {"regularizer", reg}};
}

Trajectory trajectory_from(const json& j) {
  const auto total = numbers(j.at("total"));
  const auto perceptual = numbers(j.at("perceptual"));
  const auto pixel = numbers(j.at("pixel"));
  const auto reg = numbers(j.at("regularizer"));
  if (perceptual.size() != total.size() || pixel.size() != total.size() || reg.size() != total.size()) {
    throw CorruptSnapshotError("run record: trajectory columns differ in length");
  }
  Trajectory t(total.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = {total[i], perceptual[i], pixel[i], reg[i]};
  return t;
}

RunMetrics metrics_from(const json& j) {
  RunMetrics m;
  m.perceptual = optional_number(j.at("perceptual"));
  m.mse = optional_number(j.at("mse"));
  m.psnr = optional_number(j.at("psnr"));
  m.pivot_perceptual = optional_number(j.at("pivot_perceptual"));
  m.observed_perceptual = number(j.at("observed_perceptual"));
  m.observed_mse = number(j.at("observed_mse"));
  m.pivot_observed_mse = number(j.at("pivot_observed_mse"));
  m.frechet = number(j.at("frechet"));
  return m;
}

}  // namespace

json to_json(const RunMetrics& m) {
  return {{"perceptual", optional_number(m.perceptual)},
          {"mse", optional_number(m.mse)},
          {"psnr", optional_number(m.psnr)},
          {"pivot_perceptual", optional_number(m.pivot_perceptual)},
          {"observed_perceptual", number(m.observed_perceptual)},
          {"observed_mse", number(m.observed_mse)},
          {"pivot_observed_mse", number(m.pivot_observed_mse)},
          {"frechet", number(m.frechet)}};
}

json to_json(const RunRecord& r) {
  json j;
  j["run_id"] = r.run_id;
  j["tool_version"] = r.tool_version;
  j["plan_hash"] = r.plan_hash;
  j["status"] = r.status;
  j["error"] = r.error;
  j["config"] = to_json(r.config);
  j["target"] = {{"class", r.class_index},
                 {"source", r.source},
                 {"seed", r.target_seed ? json(*r.target_seed) : json(nullptr)},
                 {"detail", number(r.detail)}};
  j["tags"] = r.tags;
  j["centroid"] = {{"index", r.centroid_index},
                   {"count", r.centroid_count},
                   {"key", r.centroid_key},
                   {"selection_features", "multiscale-normalized"},
                   {"distances", numbers(r.centroid_distances)},
                   {"interpolation_radius", number(r.alpha)}};
  j["stage1"] = trajectory_json(r.stage1, r.stage1_best);
  j["stage2"] = trajectory_json(r.stage2, r.stage2_best);
  j["result"] = {{"offset_l2", number(r.offset_l2)},
                 {"offset_l1", number(r.offset_l1)},
                 {"pivot", numbers(r.pivot)},
                 {"theta_hash", r.theta_hash}};
  j["metrics"] = r.metrics ? to_json(*r.metrics) : json(nullptr);
  j["artifacts"] = r.artifacts;
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  j["seconds"] = number(r.seconds);
  return j;
}

RunRecord record_from_json(const json& j) {
  try {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.plan_hash = j.at("plan_hash").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.config = config_from_json(j.at("config"));
    const auto& t = j.at("target");
    r.class_index = t.at("class").get<int>();
    r.source = t.at("source").get<std::string>();
    if (!t.at("seed").is_null()) r.target_seed = t.at("seed").get<std::uint64_t>();
    r.detail = number(t.at("detail"));
    r.tags = j.at("tags").get<std::map<std::string, std::string>>();
    const auto& c = j.at("centroid");
    r.centroid_index = c.at("index").get<int>();
    r.centroid_count = c.at("count").get<int>();
    r.centroid_key = c.at("key").get<std::string>();
    r.centroid_distances = numbers(c.at("distances"));
    r.alpha = number(c.at("interpolation_radius"));
    r.stage1 = trajectory_from(j.at("stage1"));
    r.stage1_best = j.at("stage1").at("best_iteration").get<int>();
    r.stage2 = trajectory_from(j.at("stage2"));
    r.stage2_best = j.at("stage2").at("best_iteration").get<int>();
    const auto& res = j.at("result");
    r.offset_l2 = number(res.at("offset_l2"));
    r.offset_l1 = number(res.at("offset_l1"));
    r.pivot = numbers(res.at("pivot"));
    r.theta_hash = res.at("theta_hash").get<std::uint64_t>();
    if (!j.at("metrics").is_null()) r.metrics = metrics_from(j.at("metrics"));
    r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    r.started_at = j.at("started_at").get<std::string>();
    r.finished_at = j.at("finished_at").get<std::string>();
    r.seconds = number(j.at("seconds"));
    return r;
  } catch (const json::exception& e) {
    throw CorruptSnapshotError(std::string("run record: ") + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_record(const std::filesystem::path& path, const RunRecord& record) {
  write_text_atomic(path, to_json(record).dump(2) + "\n");
}

RunRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run record " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CorruptSnapshotError(path.string() + ": " + e.what());
  }
  return record_from_json(j);
}

std::vector<std::filesystem::path> find_records(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "record.json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace cri::harness
