#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "doa/collision_risk.hpp"
#include "doa/environment.hpp"
#include "doa/obstacle_dynamics.hpp"
#include "doa/rl_agents.hpp"
#include "doa/trajectory_predictor.hpp"

namespace py = pybind11;
using namespace doa;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

Points to_points(const std::vector<Vec2>& v) {
  Points p(static_cast<long>(v.size()), 2);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<long>(i)) = v[i].transpose();
  return p;
}

std::vector<Vec2> from_points(const Points& p) {
  std::vector<Vec2> v(static_cast<std::size_t>(p.rows()));
  for (long i = 0; i < p.rows(); ++i) v[static_cast<std::size_t>(i)] = p.row(i).transpose();
  return v;
}

// configs cross the boundary as JSON text so Python callers can use plain dicts
template <class T>
T config_from(const py::object& cfg) {
  if (cfg.is_none()) return T{};
  const auto text = py::module_::import("json").attr("dumps")(cfg).cast<std::string>();
  return nlohmann::json::parse(text).get<T>();
}

std::shared_ptr<const StepModel> model_or_cv(const std::shared_ptr<PredictorModel>& model) {
  if (model) return model;
  return std::make_shared<ConstantVelocityModel>();
}

py::dict event_dict(const PassingEvent& e) {
  py::dict d;
  d["obstacle_id"] = e.obstacle_id;
  d["step"] = e.step;
  d["side"] = std::string(to_string(e.side));
  d["violation"] = e.violation;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Obstacle dynamics, collision risk, the avoidance environment and trained models";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "simulate_trajectory",
      [](const std::string& behavior, const Vec2& initial_position, const Vec2& velocity,
         long steps, std::uint64_t seed) {
        ObstacleSpec spec;
        spec.initial_position = initial_position;
        spec.velocity = velocity;
        spec.behavior = behavior_from_string(behavior);
        spec.noise_seed = seed;
        return to_points(simulate_trajectory(spec, DynamicsParams{}, steps));
      },
      py::arg("behavior"), py::arg("initial_position"), py::arg("velocity"), py::arg("steps"),
      py::arg("seed") = 0, "Obstacle positions at steps 0..steps-1 as an (N, 2) array.");

  py::class_<PredictorModel, std::shared_ptr<PredictorModel>>(m, "Predictor")
      .def_static("load", [](const std::filesystem::path& p) {
        return std::make_shared<PredictorModel>(PredictorModel::load(p));
      })
      .def_property_readonly("behavior", [](const PredictorModel& p) { return std::string(to_string(p.behavior())); })
      .def_property_readonly("window", &PredictorModel::window)
      .def("predict_next", [](const PredictorModel& p, const Points& window) {
        const auto w = from_points(window);
        return Vec2(predict_next(p, w));
      })
      .def(
          "rollout",
          [](const PredictorModel& p, const Points& window, int horizon, bool backward) {
            const auto w = from_points(window);
            return to_points(rollout(p, w, horizon, backward ? Direction::backward : Direction::forward));
          },
          py::arg("window"), py::arg("horizon"), py::arg("backward") = false);

  m.def(
      "collision_risk",
      [](const Points& window, const Vec2& agent_position, const Vec2& agent_velocity,
         const std::shared_ptr<PredictorModel>& predictor, int smoothing) {
        CRConfig cfg;
        cfg.smoothing = smoothing;
        const AgentState agent{agent_position, agent_velocity, 0.0};
        const auto w = from_points(window);
        const auto detail = collision_risk_detail(*model_or_cv(predictor), w, agent, cfg);
        py::dict d;
        d["d_cpa"] = detail.cpa.d_cpa;
        d["t_cpa"] = detail.cpa.t_cpa;
        d["first_step"] = detail.raw.first_step;
        d["raw"] = detail.raw.values;
        d["smoothed"] = detail.smoothed.values;
        return d;
      },
      py::arg("window"), py::arg("agent_position"), py::arg("agent_velocity"),
      py::arg("predictor") = nullptr, py::arg("smoothing") = 10,
      "Estimated closest approach of one obstacle. Without a predictor the window is "
      "continued at constant velocity.");

  py::class_<Environment>(m, "Environment")
      .def(py::init([](const py::object& cfg, const std::shared_ptr<PredictorModel>& predictor) {
             return Environment(config_from<EnvConfig>(cfg), predictor);
           }),
           py::arg("config") = py::none(), py::arg("predictor") = nullptr)
      .def_property_readonly("observation_size", &Environment::observation_size)
      .def_property_readonly("step_index", &Environment::step_index)
      .def_property_readonly("done", &Environment::done)
      .def_property_readonly("agent_position", [](const Environment& e) { return Vec2(e.agent().position); })
      .def_property_readonly("obstacle_positions", [](const Environment& e) {
        std::vector<Vec2> p;
        for (const auto& o : e.obstacles()) p.push_back(o.position());
        return to_points(p);
      })
      .def_property_readonly("observation_order", &Environment::observation_order)
      .def("reset", &Environment::reset, py::arg("seed"))
      .def("step", [](Environment& e, double action) {
        const auto r = e.step(action);
        py::list events;
        for (const auto& ev : r.events) events.append(event_dict(ev));
        return py::make_tuple(r.observation, r.reward, r.done, events);
      });

  py::class_<Agent, std::shared_ptr<Agent>>(m, "Agent")
      .def_static("load", [](const std::filesystem::path& p) { return std::shared_ptr<Agent>(load_agent(p)); })
      .def_property_readonly("algorithm", [](const Agent& a) { return std::string(to_string(a.algorithm())); })
      .def_property_readonly("observation_size", &Agent::observation_size)
      .def_property_readonly("history_length", [](const Agent& a) { return a.config().history; })
      .def(
          "act",
          [](Agent& a, const std::vector<Observation>& episode, bool explore) {
            if (episode.empty()) throw py::value_error("episode must contain the current observation");
            const int t = static_cast<int>(episode.size()) - 1;
            const auto h = make_history(episode, t, a.config().history, a.observation_size());
            return a.act(episode.back(), h, explore);
          },
          py::arg("episode"), py::arg("explore") = false,
          "Action for the last observation of `episode`; earlier entries form the history.");
}
