#include "genosil/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "genosil/error.hpp"

namespace genosil {

namespace {

Json normalizer_to_json(const AffineNormalizer& n) {
  return Json{{"center", vector_to_json(n.center)}, {"half_range", vector_to_json(n.half_range)}};
}

AffineNormalizer normalizer_from_json(const Json& j, const std::string& what) {
  AffineNormalizer n{vector_from_json(json_at(j, "center", what), what + ".center"),
                     vector_from_json(json_at(j, "half_range", what), what + ".half_range")};
  require(n.center.size() == n.half_range.size(), what + ": center and half_range widths differ");
  require((n.half_range.array() > 0.0).all() && n.center.allFinite() && n.half_range.allFinite(),
          what + ": half_range must be positive and finite");
  return n;
}

Json policy_to_json(const PolicyNet& p) {
  return Json{{"net", net_to_json(p.net)},
              {"state_normalizer", normalizer_to_json(p.state_normalizer)},
              {"condition_normalizer", normalizer_to_json(p.condition_normalizer)},
              {"action_lower", vector_to_json(p.bounds.lower)},
              {"action_upper", vector_to_json(p.bounds.upper)},
              {"heading_index", p.heading_index}};
}

PolicyNet policy_from_json(const Json& j, Conditioning conditioning, EnvKind kind) {
  const std::string what = "policy";
  PolicyNet p;
  p.net = net_from_json(json_at(j, "net", what), "policy.net");
  p.state_normalizer = normalizer_from_json(json_at(j, "state_normalizer", what), "policy.state_normalizer");
  p.condition_normalizer =
      normalizer_from_json(json_at(j, "condition_normalizer", what), "policy.condition_normalizer");
  p.bounds.lower = vector_from_json(json_at(j, "action_lower", what), "policy.action_lower");
  p.bounds.upper = vector_from_json(json_at(j, "action_upper", what), "policy.action_upper");
  p.conditioning = conditioning;
  p.heading_index = json_at(j, "heading_index", what).get<Eigen::Index>();
  require(p.heading_index >= -1 && p.heading_index < p.state_width(),
          "policy.heading_index must name a state entry or be -1");
  const auto d = dims(kind);
  require(p.state_width() == d.state, "policy state width does not match the environment");
  require(p.bounds.width() == d.action && p.net.output_width() == d.action,
          "policy action width does not match the environment");
  require(p.net.input_width() == p.state_feature_width() + p.condition_width(),
          "policy input width must equal state feature width + conditioning width");
  return p;
}

Checkpoint checkpoint_from_json_unchecked(const Json& j) {
  const std::string what = "checkpoint";
  if (!j.is_object()) throw ValidationError("checkpoint must be a JSON object");
  if (json_at(j, "format", what) != kCheckpointFormat) {
    throw ValidationError("not a genosil checkpoint (format field mismatch)");
  }
  if (json_at(j, "schema_version", what) != kCheckpointSchemaVersion) {
    throw ValidationError("unsupported checkpoint schema version");
  }
  const EnvKind kind = env_kind_from_string(json_at(j, "env", what).get<std::string>());
  const std::string method = json_at(j, "method", what).get<std::string>();
  const Json& networks = json_at(j, "networks", what);
  Checkpoint out;
  out.train_config = j.value("train_config", Json::object());
  out.training_summary = j.value("training_summary", Json::object());

  if (method == "genosil") {
    GenosilModel model;
    model.kind = kind;
    model.safety_normalizer =
        normalizer_from_json(json_at(j, "safety_normalizer", what), "safety_normalizer");
    model.latent = LatentModel(net_from_json(json_at(networks, "encoder_trunk", what), "encoder_trunk"),
                               net_from_json(json_at(networks, "mu_head", what), "mu_head"),
                               net_from_json(json_at(networks, "logvar_head", what), "logvar_head"),
                               net_from_json(json_at(networks, "decoder", what), "decoder"));
    model.policy = policy_from_json(json_at(networks, "policy", what), Conditioning::kLatent, kind);
    require(model.latent.safety_width() == dims(kind).safety &&
                model.safety_normalizer.width() == dims(kind).safety,
            "encoder width does not match the environment's safety parameters");
    require(model.policy.condition_width() == model.latent.latent_width(),
            "policy conditioning width must equal the latent width");
    if (j.contains("latent_width")) {
      require(j.at("latent_width") == model.latent.latent_width(), "latent_width field disagrees with the networks");
    }
    out.model = std::move(model);
  } else if (method == "gcbc") {
    GcbcModel model;
    model.kind = kind;
    model.policy = policy_from_json(json_at(networks, "policy", what), Conditioning::kGoal, kind);
    require(model.policy.condition_width() == dims(kind).position,
            "GC-BC conditioning width must equal the goal dimension");
    out.model = std::move(model);
  } else {
    throw ValidationError("unknown checkpoint method '" + method + "'");
  }
  return out;
}

}  // namespace

std::string Checkpoint::method() const {
  return std::holds_alternative<GenosilModel>(model) ? "genosil" : "gcbc";
}

EnvKind Checkpoint::env() const {
  return std::visit([](const auto& m) { return m.kind; }, model);
}

Json net_to_json(const nn::DenseNet& net) {
  Json widths = Json::array();
  for (auto w : net.widths()) widths.push_back(w);
  Json activations = Json::array();
  for (const auto& layer : net.layers()) activations.push_back(std::string(nn::to_string(layer.activation)));
  std::vector<double> flat(net.parameter_count());
  net.copy_parameters(flat);
  return Json{{"widths", widths}, {"activations", activations}, {"parameters", flat}};
}

nn::DenseNet net_from_json(const Json& j, const std::string& what) {
  const Json& widths = json_at(j, "widths", what);
  const Json& activations = json_at(j, "activations", what);
  const Json& parameters = json_at(j, "parameters", what);
  require(widths.is_array() && widths.size() >= 2, what + ": need at least two widths");
  require(activations.is_array() && activations.size() + 1 == widths.size(),
          what + ": one activation per layer expected");
  std::vector<nn::DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const auto in = widths[k].get<Eigen::Index>();
    const auto out = widths[k + 1].get<Eigen::Index>();
    require(in > 0 && out > 0, what + ": widths must be positive");
    layers.push_back({nn::Matrix::Zero(out, in), nn::Vector::Zero(out),
                      nn::activation_from_string(activations[k].get<std::string>())});
  }
  nn::DenseNet net(std::move(layers));
  const Vector flat = vector_from_json(parameters, what + ".parameters");
  require(static_cast<std::size_t>(flat.size()) == net.parameter_count(),
          what + ": parameter count does not match the layer widths");
  require(flat.allFinite(), what + ": parameters must be finite");
  net.assign_parameters(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
  return net;
}

Json checkpoint_to_json(const Checkpoint& checkpoint) {
  Json j{{"format", kCheckpointFormat},
         {"schema_version", kCheckpointSchemaVersion},
         {"method", checkpoint.method()},
         {"env", std::string(to_string(checkpoint.env()))},
         {"train_config", checkpoint.train_config},
         {"training_summary", checkpoint.training_summary}};
  if (const auto* g = std::get_if<GenosilModel>(&checkpoint.model)) {
    j["latent_width"] = g->latent.latent_width();
    j["safety_normalizer"] = normalizer_to_json(g->safety_normalizer);
    j["networks"] = Json{{"encoder_trunk", net_to_json(g->latent.trunk())},
                         {"mu_head", net_to_json(g->latent.mu_head())},
                         {"logvar_head", net_to_json(g->latent.logvar_head())},
                         {"decoder", net_to_json(g->latent.decoder())},
                         {"policy", policy_to_json(g->policy)}};
  } else {
    const auto& b = std::get<GcbcModel>(checkpoint.model);
    j["networks"] = Json{{"policy", policy_to_json(b.policy)}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const Json& j) {
  try {
    return checkpoint_from_json_unchecked(j);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("checkpoint schema error: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open checkpoint '" + path + "' for writing");
  out << checkpoint_to_json(checkpoint).dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("checkpoint '" + path + "' not found");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("checkpoint '" + path + "' is not valid JSON");
  }
  return checkpoint_from_json(j);
}

}  // namespace genosil
