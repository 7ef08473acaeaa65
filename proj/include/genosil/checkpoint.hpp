#pragma once

// Unified checkpoint: one JSON document holding every network of a trained
// controller with its normalizers, the training config that produced it and a
// short training summary. Doubles are written in shortest round-trip form, so
// save/load is value-exact.

#include <string>
#include <variant>

#include "genosil/json_util.hpp"
#include "genosil/model.hpp"

namespace genosil {

inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr const char* kCheckpointFormat = "genosil-checkpoint";

using LearnedModel = std::variant<GenosilModel, GcbcModel>;

struct Checkpoint {
  LearnedModel model;
  Json train_config = Json::object();
  Json training_summary = Json::object();

  std::string method() const;  // "genosil" or "gcbc"
  EnvKind env() const;
};

Json net_to_json(const nn::DenseNet& net);
nn::DenseNet net_from_json(const Json& j, const std::string& what);

Json checkpoint_to_json(const Checkpoint& checkpoint);
// Throws ValidationError on any schema problem.
Checkpoint checkpoint_from_json(const Json& j);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace genosil
