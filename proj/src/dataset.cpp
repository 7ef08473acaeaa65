#include "genosil/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "genosil/error.hpp"

namespace genosil {

int Dataset::demo_count() const {
  return static_cast<int>(std::set<int>(demo_ids.begin(), demo_ids.end()).size());
}

Dataset flatten(const GeneratedDataset& generated) {
  const auto d = dims(generated.kind);
  Eigen::Index n = 0;
  for (const auto& demo : generated.demos) n += static_cast<Eigen::Index>(demo.actions.size());
  Dataset out;
  out.kind = generated.kind;
  out.ranges = generated.config.ranges;
  out.seed = generated.config.seed;
  out.states.resize(d.state, n);
  out.safety_params.resize(d.safety, n);
  out.actions.resize(d.action, n);
  out.demo_ids.reserve(n);
  out.steps.reserve(n);
  Eigen::Index col = 0;
  for (const auto& demo : generated.demos) {
    for (std::size_t k = 0; k < demo.actions.size(); ++k, ++col) {
      out.states.col(col) = demo.states[k];
      out.safety_params.col(col) = demo.safety_params[k];
      out.actions.col(col) = demo.actions[k];
      out.demo_ids.push_back(demo.id);
      out.steps.push_back(static_cast<int>(k));
    }
  }
  return out;
}

Json ranges_to_json(const ScenarioRanges& r) {
  return Json{{"env", std::string(to_string(r.kind))},
              {"workspace_lower", vector_to_json(r.workspace_lower)},
              {"workspace_upper", vector_to_json(r.workspace_upper)},
              {"start_lower", vector_to_json(r.start_lower)},
              {"start_upper", vector_to_json(r.start_upper)},
              {"goal_lower", vector_to_json(r.goal_lower)},
              {"goal_upper", vector_to_json(r.goal_upper)},
              {"heading_min", r.heading_min},
              {"heading_max", r.heading_max},
              {"radius_min", r.radius_min},
              {"radius_max", r.radius_max},
              {"speed_min", r.speed_min},
              {"speed_max", r.speed_max},
              {"safe_margin", r.safe_margin},
              {"min_goal_distance", r.min_goal_distance},
              {"path_fraction_min", r.path_fraction_min},
              {"path_fraction_max", r.path_fraction_max},
              {"lateral_offset_max", r.lateral_offset_max},
              {"approach_speed", r.approach_speed},
              {"horizon", r.horizon},
              {"dt", r.dt},
              {"agent_radius", r.agent_radius},
              {"goal_tolerance", r.goal_tolerance},
              {"max_attempts", r.max_attempts}};
}

namespace {

double number_at(const Json& value, const std::string& key) {
  if (!value.is_number()) throw ValidationError("ranges: '" + key + "' must be a number");
  return value.get<double>();
}

int integer_at(const Json& value, const std::string& key) {
  if (!value.is_number_integer()) throw ValidationError("'" + key + "' must be an integer");
  return value.get<int>();
}

}  // namespace

ScenarioRanges ranges_from_json(const Json& j, ScenarioRanges base) {
  if (!j.is_object()) throw ValidationError("ranges must be a JSON object");
  using Setter = std::function<void(const Json&)>;
  const std::string what = "ranges";
  auto vec = [&](Vector& target, const std::string& key) -> Setter {
    return [&target, key, what](const Json& v) { target = vector_from_json(v, what + "." + key); };
  };
  auto num = [](double& target, const std::string& key) -> Setter {
    return [&target, key](const Json& v) { target = number_at(v, key); };
  };
  auto integer = [](int& target, const std::string& key) -> Setter {
    return [&target, key](const Json& v) { target = integer_at(v, key); };
  };
  const std::map<std::string, Setter> setters{
      {"env",
       [&base](const Json& v) {
         if (!v.is_string() || env_kind_from_string(v.get<std::string>()) != base.kind) {
           throw ValidationError("ranges: 'env' does not match the environment");
         }
       }},
      {"workspace_lower", vec(base.workspace_lower, "workspace_lower")},
      {"workspace_upper", vec(base.workspace_upper, "workspace_upper")},
      {"start_lower", vec(base.start_lower, "start_lower")},
      {"start_upper", vec(base.start_upper, "start_upper")},
      {"goal_lower", vec(base.goal_lower, "goal_lower")},
      {"goal_upper", vec(base.goal_upper, "goal_upper")},
      {"heading_min", num(base.heading_min, "heading_min")},
      {"heading_max", num(base.heading_max, "heading_max")},
      {"radius_min", num(base.radius_min, "radius_min")},
      {"radius_max", num(base.radius_max, "radius_max")},
      {"speed_min", num(base.speed_min, "speed_min")},
      {"speed_max", num(base.speed_max, "speed_max")},
      {"safe_margin", num(base.safe_margin, "safe_margin")},
      {"min_goal_distance", num(base.min_goal_distance, "min_goal_distance")},
      {"path_fraction_min", num(base.path_fraction_min, "path_fraction_min")},
      {"path_fraction_max", num(base.path_fraction_max, "path_fraction_max")},
      {"lateral_offset_max", num(base.lateral_offset_max, "lateral_offset_max")},
      {"approach_speed", num(base.approach_speed, "approach_speed")},
      {"horizon", integer(base.horizon, "horizon")},
      {"dt", num(base.dt, "dt")},
      {"agent_radius", num(base.agent_radius, "agent_radius")},
      {"goal_tolerance", num(base.goal_tolerance, "goal_tolerance")},
      {"max_attempts", integer(base.max_attempts, "max_attempts")},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ValidationError("ranges: unknown key '" + key + "'");
    it->second(value);
  }
  return base;
}

Json cbf_to_json(const CbfConfig& cfg) {
  return Json{{"alpha", cfg.alpha},
              {"vehicle_speed_gain", cfg.vehicle_speed_gain},
              {"vehicle_heading_gain", cfg.vehicle_heading_gain},
              {"manipulator_step", cfg.manipulator_step},
              {"vehicle_reference_speed", cfg.vehicle_reference_speed},
              {"manipulator_reference_speed", cfg.manipulator_reference_speed},
              {"vehicle_buffer", cfg.vehicle_buffer},
              {"manipulator_buffer", cfg.manipulator_buffer}};
}

CbfConfig cbf_from_json(const Json& j, CbfConfig base) {
  if (!j.is_object()) throw ValidationError("cbf settings must be a JSON object");
  const std::map<std::string, double*> fields{
      {"alpha", &base.alpha},
      {"vehicle_speed_gain", &base.vehicle_speed_gain},
      {"vehicle_heading_gain", &base.vehicle_heading_gain},
      {"manipulator_step", &base.manipulator_step},
      {"vehicle_reference_speed", &base.vehicle_reference_speed},
      {"manipulator_reference_speed", &base.manipulator_reference_speed},
      {"vehicle_buffer", &base.vehicle_buffer},
      {"manipulator_buffer", &base.manipulator_buffer}};
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ValidationError("cbf: unknown key '" + key + "'");
    *it->second = number_at(value, key);
  }
  return base;
}

Json manifest_json(const GeneratedDataset& generated) {
  std::size_t samples = 0;
  for (const auto& demo : generated.demos) samples += demo.actions.size();
  return Json{{"schema_version", kDatasetSchemaVersion},
              {"env", std::string(to_string(generated.kind))},
              {"seed", generated.config.seed},
              {"n_demos", generated.demos.size()},
              {"n_samples", samples},
              {"attempted", generated.attempted},
              {"kept", generated.demos.size()},
              {"discarded",
               {{"collided", generated.discarded.collided},
                {"timeout", generated.discarded.timeout},
                {"infeasible", generated.discarded.infeasible}}},
              {"ranges", ranges_to_json(generated.config.ranges)},
              {"cbf", cbf_to_json(generated.config.cbf)}};
}

void write_dataset(const std::string& directory, const GeneratedDataset& generated) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  const fs::path dir(directory);
  {
    std::ofstream out(dir / kDatasetFile);
    if (!out) throw ValidationError("cannot write dataset file in '" + directory + "'");
    for (const auto& demo : generated.demos) {
      for (std::size_t k = 0; k < demo.actions.size(); ++k) {
        const Json record{{"demo_id", demo.id},
                          {"step", k},
                          {"s", vector_to_json(demo.states[k])},
                          {"c", vector_to_json(demo.safety_params[k])},
                          {"a", vector_to_json(demo.actions[k])}};
        out << record.dump() << '\n';
      }
    }
  }
  std::ofstream manifest(dir / kManifestFile);
  if (!manifest) throw ValidationError("cannot write manifest in '" + directory + "'");
  manifest << manifest_json(generated).dump(2) << '\n';
}

namespace {

Dataset read_dataset_unchecked(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  std::ifstream manifest_in(dir / kManifestFile);
  if (!manifest_in) throw ValidationError("dataset manifest not found in '" + directory + "'");
  Json manifest;
  try {
    manifest = Json::parse(manifest_in);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  const std::string what = "manifest";
  if (json_at(manifest, "schema_version", what) != kDatasetSchemaVersion) {
    throw ValidationError("unsupported dataset schema version");
  }
  Dataset out;
  out.kind = env_kind_from_string(json_at(manifest, "env", what).get<std::string>());
  out.ranges = ranges_from_json(json_at(manifest, "ranges", what), ScenarioRanges::defaults(out.kind));
  out.ranges.validate();
  out.seed = json_at(manifest, "seed", what).get<std::uint64_t>();
  const auto n_samples = json_at(manifest, "n_samples", what).get<std::int64_t>();
  const auto n_demos = json_at(manifest, "n_demos", what).get<int>();

  std::ifstream in(dir / kDatasetFile);
  if (!in) throw ValidationError("dataset records not found in '" + directory + "'");
  const auto d = dims(out.kind);
  const ActionBounds bounds = action_bounds(out.kind);
  std::vector<Vector> states, safety, actions;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_no);
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ValidationError(where + ": invalid JSON");
    }
    if (!record.is_object() || record.size() != 5) {
      throw ValidationError(where + ": expected keys a, c, demo_id, s, step");
    }
    Vector s = vector_from_json(json_at(record, "s", where), where + ".s");
    Vector c = vector_from_json(json_at(record, "c", where), where + ".c");
    Vector a = vector_from_json(json_at(record, "a", where), where + ".a");
    const int demo_id = json_at(record, "demo_id", where).get<int>();
    const int step = json_at(record, "step", where).get<int>();
    require(s.size() == d.state && c.size() == d.safety && a.size() == d.action,
            where + ": widths do not match the " + std::string(to_string(out.kind)) + " environment");
    require(s.allFinite() && c.allFinite() && a.allFinite(), where + ": non-finite entry");
    require(bounds.contains(a, 1e-12), where + ": action outside bounds");
    require(c[2 * d.position] > 0.0, where + ": obstacle radius must be > 0");
    require(demo_id >= 0 && step >= 0, where + ": negative demo_id or step");
    if (!out.demo_ids.empty()) {
      const bool continues = demo_id == out.demo_ids.back() && step == out.steps.back() + 1;
      const bool starts = demo_id == out.demo_ids.back() + 1 && step == 0;
      require(continues || starts, where + ": records out of order");
    } else {
      require(demo_id == 0 && step == 0, where + ": dataset must start at demo 0, step 0");
    }
    out.demo_ids.push_back(demo_id);
    out.steps.push_back(step);
    states.push_back(std::move(s));
    safety.push_back(std::move(c));
    actions.push_back(std::move(a));
  }
  require(static_cast<std::int64_t>(actions.size()) == n_samples,
          "dataset has " + std::to_string(actions.size()) + " records but the manifest says " +
              std::to_string(n_samples));
  require(out.demo_count() == n_demos, "demo count disagrees with the manifest");
  require(!actions.empty(), "dataset is empty");

  const auto n = static_cast<Eigen::Index>(actions.size());
  out.states.resize(d.state, n);
  out.safety_params.resize(d.safety, n);
  out.actions.resize(d.action, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.states.col(i) = states[i];
    out.safety_params.col(i) = safety[i];
    out.actions.col(i) = actions[i];
  }
  return out;
}

}  // namespace

Dataset read_dataset(const std::string& directory) {
  try {
    return read_dataset_unchecked(directory);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("dataset schema error: ") + e.what());
  }
}

}  // namespace genosil
