#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>

#include "genosil/error.hpp"

namespace genosil {

using Json = nlohmann::json;

inline Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ValidationError(what + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(what + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Fetches a required key or throws ValidationError naming it.
inline const Json& json_at(const Json& j, const std::string& key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(what + ": missing key '" + key + "'");
  }
  return j.at(key);
}

}  // namespace genosil
