#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsop3d/cli/config.hpp"
#include "vsop3d/cli/harness.hpp"
#include "vsop3d/cli/selfcheck.hpp"
#include "vsop3d/envs/env.hpp"
#include "vsop3d/eval/stats.hpp"
#include "vsop3d/rl/agent.hpp"
#include "vsop3d/rl/rollout.hpp"

namespace py = pybind11;
using namespace vsop3d;

namespace {

// JSON crosses the boundary as text and is decoded by the json module.
py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array shaped(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

RunMatrix matrix_from(const Array& scores) {
  if (scores.ndim() != 2) throw py::value_error("scores must be a 2-D array (seeds x environments)");
  RunMatrix m;
  for (py::ssize_t s = 0; s < scores.shape(0); ++s) m.seed_ids.push_back(static_cast<std::uint64_t>(s));
  for (py::ssize_t e = 0; e < scores.shape(1); ++e) m.env_names.push_back("env" + std::to_string(e));
  m.scores = flat(scores);
  return m;
}

py::tuple gae(const Array& rewards, const Array& values, const Array& dones, const Array& bootstrap, double gamma,
              double lam) {
  if (rewards.ndim() != 2) throw py::value_error("rewards must be [T, E]");
  const auto T = rewards.shape(0), E = rewards.shape(1);
  const auto r = compute_gae(flat(rewards), flat(values), flat(dones), flat(bootstrap), T, E, gamma, lam);
  return py::make_tuple(shaped(r.advantages, {T, E}), shaped(r.returns, {T, E}));
}

py::dict aggregate_scores(const Array& scores) {
  const auto m = aggregate(matrix_from(scores));
  py::dict d;
  for (Metric metric : kAllMetrics) d[py::str(to_string(metric))] = m.get(metric);
  return d;
}

py::tuple bootstrap(const Array& scores, const std::string& metric, std::int64_t resamples, double confidence,
                    std::uint64_t seed, bool joint) {
  const auto ci = bootstrap_ci(matrix_from(scores), parse_metric(metric), resamples, confidence, Rng(seed),
                               joint ? BootstrapMode::kJoint : BootstrapMode::kStratified);
  return py::make_tuple(ci.low, ci.high, ci.degenerate);
}

class PyEnv {
 public:
  PyEnv(const std::string& name, std::int64_t height, std::int64_t width)
      : env_(make_env(name, EnvOptions{height, width})) {}

  Array reset(std::uint64_t level, bool test) {
    return image(env_->reset(LevelSeed{env_->spec().name, level, test ? Split::kTest : Split::kTrain}));
  }
  py::tuple step(std::int64_t action) {
    const auto r = env_->step(action);
    return py::make_tuple(image(r.observation), r.reward, r.done);
  }
  std::int64_t oracle_action() const { return env_->oracle_action(); }
  std::int64_t num_actions() const { return env_->spec().num_actions; }
  double normalize(double episodic_return) const { return normalized_return(env_->spec(), episodic_return); }

 private:
  Array image(const std::vector<double>& obs) const {
    return shaped(obs, {env_->spec().obs_height, env_->spec().obs_width, 3});
  }
  std::unique_ptr<Env> env_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the vsop3d training and evaluation library.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<HarnessError>(m, "HarnessError", PyExc_RuntimeError);
  py::register_exception<EnvError>(m, "EnvError", PyExc_ValueError);

  m.def("preset_names", &preset_names);
  m.def("preset", [](const std::string& name) { return to_python(to_json(preset(name))); }, py::arg("name"),
        "Hyperparameters of a named preset as a dict.");
  m.def("env_names", &env_names);

  m.def("compute_gae", &gae, py::arg("rewards"), py::arg("values"), py::arg("dones"), py::arg("bootstrap_value"),
        py::arg("gamma"), py::arg("lam"), "Advantages and returns for [T, E] rollouts.");

  m.def("median", [](std::vector<double> v) { return median(std::move(v)); });
  m.def("iqm", [](std::vector<double> v) { return iqm(std::move(v)); });
  m.def("optimality_gap", &optimality_gap);
  m.def("final_score", &final_score, py::arg("normalized_returns"), py::arg("window") = 100);
  m.def("aggregate", &aggregate_scores, py::arg("scores"), "Point metrics over a seeds x environments matrix.");
  m.def("bootstrap_ci", &bootstrap, py::arg("scores"), py::arg("metric"), py::arg("resamples") = 2000,
        py::arg("confidence") = 0.95, py::arg("seed") = 0, py::arg("joint") = false,
        "Percentile bootstrap interval as (low, high, degenerate).");

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, std::int64_t, std::int64_t>(), py::arg("name"), py::arg("height") = 32,
           py::arg("width") = 32)
      .def("reset", &PyEnv::reset, py::arg("level"), py::arg("test") = false)
      .def("step", &PyEnv::step, py::arg("action"))
      .def("oracle_action", &PyEnv::oracle_action)
      .def("normalize", &PyEnv::normalize)
      .def_property_readonly("num_actions", &PyEnv::num_actions);

  m.def("selfcheck", [] { return to_python(run_selfcheck().to_json()); });
  m.def(
      "train",
      [](const std::string& config_path, const std::map<std::string, std::string>& overrides, bool resume) {
        const auto config = load_run_config(config_path, overrides);
        py::gil_scoped_release release;
        const auto manifest = cmd_train(config, {resume, {}});
        py::gil_scoped_acquire acquire;
        return to_python(manifest.to_json());
      },
      py::arg("config_path"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("resume") = false,
      "Trains every (env, seed) run of a config and returns the manifest.");
  m.def(
      "aggregate_runs",
      [](const std::vector<std::string>& run_dirs, const std::string& output_dir, std::int64_t resamples,
         std::uint64_t seed) {
        AggregateOptions opts;
        opts.output_dir = output_dir;
        opts.resamples = resamples;
        opts.seed = seed;
        return to_python(cmd_aggregate(run_dirs, opts).report);
      },
      py::arg("run_dirs"), py::arg("output_dir") = "", py::arg("resamples") = 2000, py::arg("seed") = 0);
}
