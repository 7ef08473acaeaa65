#pragma once

// On-disk demonstration datasets.
//
// A dataset directory holds
//   dataset.jsonl  one record per (s, c, a*) triple:
//                  {"a": [...], "c": [...], "demo_id": 0, "s": [...], "step": 0}
//   manifest.json  schema version, env kind, seed, ranges, expert gains and
//                  kept/discarded counts.

#include <cstdint>
#include <string>
#include <vector>

#include "genosil/expert.hpp"
#include "genosil/json_util.hpp"

namespace genosil {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr const char* kDatasetFile = "dataset.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

// Flattened (s, c, a*) triples, one column per sample, ordered by demo then step.
struct Dataset {
  EnvKind kind = EnvKind::kVehicle;
  ScenarioRanges ranges;
  std::uint64_t seed = 0;
  Matrix states;
  Matrix safety_params;
  Matrix actions;
  std::vector<int> demo_ids;
  std::vector<int> steps;

  Eigen::Index size() const { return states.cols(); }
  int demo_count() const;
};

Dataset flatten(const GeneratedDataset& generated);

Json ranges_to_json(const ScenarioRanges& ranges);
// Applies the keys present in `j` on top of `base`; unknown keys are rejected.
ScenarioRanges ranges_from_json(const Json& j, ScenarioRanges base);

Json cbf_to_json(const CbfConfig& cfg);
CbfConfig cbf_from_json(const Json& j, CbfConfig base);

Json manifest_json(const GeneratedDataset& generated);

// Writes both files into `directory` (created if missing).
void write_dataset(const std::string& directory, const GeneratedDataset& generated);

// Reads and validates a dataset directory. Throws ValidationError on any
// schema violation (missing keys, wrong widths, non-finite values, actions
// out of bounds, counts disagreeing with the manifest).
Dataset read_dataset(const std::string& directory);

}  // namespace genosil
