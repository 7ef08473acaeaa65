#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "genosil/checkpoint.hpp"
#include "genosil/cli.hpp"
#include "genosil/dataset.hpp"
#include "genosil/eval.hpp"
#include "genosil/trainer.hpp"

namespace py = pybind11;
using namespace genosil;

namespace {

py::object to_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_python(const py::object& o) {
  if (o.is_none()) return Json::object();
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ScenarioRanges ranges_for(const std::string& env, const std::string& preset) {
  return ScenarioRanges::preset(env_kind_from_string(env), preset);
}

py::dict scenario_dict(const Scenario& s) {
  py::dict d;
  d["env"] = std::string(to_string(s.kind));
  d["start"] = s.start;
  d["obstacle_position"] = s.obstacle_position;
  d["obstacle_velocity"] = s.obstacle_velocity;
  d["obstacle_radius"] = s.obstacle_radius;
  d["goal"] = s.goal;
  d["horizon"] = s.horizon;
  d["dt"] = s.dt;
  d["hash"] = scenario_hash(s);
  return d;
}

// A loaded checkpoint with a single act() entry point.
class Policy {
 public:
  explicit Policy(const std::string& path) : checkpoint_(load_checkpoint(path)), controller_(make_controller(checkpoint_)) {}

  std::string method() const { return checkpoint_.method(); }
  std::string env() const { return std::string(to_string(checkpoint_.env())); }

  // Safety parameters are [obstacle position, obstacle velocity, radius, goal].
  Vector act(const Vector& state, const Vector& safety_params) const {
    if (const auto* g = std::get_if<GenosilModel>(&checkpoint_.model)) return g->act(state, safety_params);
    const auto& m = std::get<GcbcModel>(checkpoint_.model);
    return m.act(state, goal_rows(m.kind, safety_params).col(0));
  }

  Vector embed(const Vector& safety_params) const {
    const auto* g = std::get_if<GenosilModel>(&checkpoint_.model);
    require(g != nullptr, "only GenOSIL checkpoints have a latent embedding");
    return g->embed(safety_params).z;
  }

  py::object summary() const { return to_python(checkpoint_.training_summary); }
  const Controller& controller() const { return *controller_; }

 private:
  Checkpoint checkpoint_;
  std::unique_ptr<Controller> controller_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Safety-conditioned imitation learning: expert data, training and evaluation";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  m.def("presets", &preset_names);

  m.def("sample_scenario",
        [](const std::string& env, std::uint64_t seed, const std::string& preset) {
          Rng rng(seed);
          return scenario_dict(sample_scenario(rng, ranges_for(env, preset)));
        },
        py::arg("env") = "vehicle", py::arg("seed") = 0, py::arg("preset") = "nominal");

  m.def("cone_barrier", &cone_barrier, py::arg("p_rel"), py::arg("v_rel"), py::arg("radius"));

  m.def("project_onto_constraint",
        [](const Vector& nominal, const Vector& gradient, double offset, const std::string& env) {
          const auto sol = project_onto_constraint(nominal, {gradient, offset}, action_bounds(env_kind_from_string(env)));
          return py::make_tuple(sol.action, sol.multiplier, sol.feasible);
        },
        py::arg("nominal"), py::arg("gradient"), py::arg("offset"), py::arg("env") = "vehicle",
        "Closest point of the action box to `nominal` with gradient . u + offset >= 0. Returns (action, multiplier, feasible).");

  m.def("kl_loss", [](const Matrix& mu, const Matrix& logvar) { return kl_loss(mu, logvar).value; },
        py::arg("mu"), py::arg("logvar"), "Columns are samples.");

  m.def("anneal_factor", &anneal_factor, py::arg("step"), py::arg("max_value"), py::arg("anneal_steps"));

  m.def("generate",
        [](const std::string& out, const std::string& env, int n_demos, std::uint64_t seed, const std::string& preset,
           int workers) {
          GenerateConfig cfg;
          cfg.n_demos = n_demos;
          cfg.ranges = ranges_for(env, preset);
          cfg.seed = seed;
          cfg.workers = workers;
          cfg.probe_batch = std::min(cfg.probe_batch, n_demos);
          const auto generated = [&] {
            py::gil_scoped_release release;
            return generate_dataset(cfg);
          }();
          write_dataset(out, generated);
          return to_python(manifest_json(generated));
        },
        py::arg("out"), py::arg("env") = "vehicle", py::arg("n_demos") = 2000, py::arg("seed") = 0,
        py::arg("preset") = "nominal", py::arg("workers") = 1, "Writes a dataset directory and returns its manifest.");

  m.def("train",
        [](const std::string& dataset, const std::string& checkpoint, const std::string& method, const py::object& config) {
          require(method == "genosil" || method == "gcbc", "method must be 'genosil' or 'gcbc'");
          TrainConfig cfg = TrainConfig::from_json(from_python(config));
          cfg.dataset_path = dataset;
          cfg.checkpoint_path = checkpoint;
          cfg.validate();
          Json summary;
          {
            py::gil_scoped_release release;
            const Dataset data = read_dataset(dataset);
            summary = method == "genosil" ? train(data, cfg).report.summary() : train_gcbc(data, cfg).report.summary();
          }
          return to_python(summary);
        },
        py::arg("dataset"), py::arg("checkpoint"), py::arg("method") = "genosil", py::arg("config") = py::none(),
        "Trains on a dataset directory, writes the checkpoint and returns the training summary. `config` takes the "
        "same keys as the CLI train config.");

  py::class_<Policy>(m, "Policy")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def_property_readonly("method", &Policy::method)
      .def_property_readonly("env", &Policy::env)
      .def("act", &Policy::act, py::arg("state"), py::arg("safety_params"))
      .def("embed", &Policy::embed, py::arg("safety_params"))
      .def("summary", &Policy::summary);

  m.def("evaluate",
        [](const std::vector<std::string>& checkpoints, bool expert, const std::string& env, const std::string& preset,
           int n_trials, std::uint64_t seed, int workers) {
          std::vector<std::unique_ptr<Policy>> policies;
          for (const auto& path : checkpoints) policies.push_back(std::make_unique<Policy>(path));
          require(!policies.empty() || expert, "nothing to evaluate");
          const std::string kind = env.empty() ? policies.front()->env() : env;
          EvalConfig cfg;
          cfg.ranges = ranges_for(kind, preset);
          cfg.preset = preset;
          cfg.n_trials = n_trials;
          cfg.seed = seed;
          cfg.workers = workers;
          ExpertController expert_controller(env_kind_from_string(kind));
          std::vector<NamedController> methods;
          std::vector<std::string> names;
          for (std::size_t i = 0; i < policies.size(); ++i) names.push_back(policies[i]->method() + "_" + std::to_string(i));
          for (std::size_t i = 0; i < policies.size(); ++i) methods.push_back({names[i], &policies[i]->controller()});
          if (expert) methods.push_back({"expert", &expert_controller});
          Json report;
          {
            py::gil_scoped_release release;
            report = compare(methods, cfg).to_json();
          }
          return to_python(report);
        },
        py::arg("checkpoints") = std::vector<std::string>{}, py::arg("expert") = false, py::arg("env") = "",
        py::arg("preset") = "nominal", py::arg("n_trials") = 200, py::arg("seed") = 0, py::arg("workers") = 1);

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::vector<std::string> full{"genosil"};
          full.insert(full.end(), args.begin(), args.end());
          std::vector<const char*> argv;
          for (const auto& a : full) argv.push_back(a.c_str());
          std::ostringstream out, err;
          const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process. Returns (exit_code, stdout, stderr).");
}
