#include "fsdp/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    const YAML::Mark m = node.Mark();
    std::ostringstream os;
    os << (file_.empty() ? "<scenario>" : file_);
    if (m.line >= 0) os << ':' << m.line + 1 << ':' << m.column + 1;
    os << ": " << msg;
    raise(ErrorKind::config, os.str());
  }

  void expect_map(const YAML::Node& node, const std::string& where, const std::set<std::string>& keys) const {
    if (!node.IsMap()) fail(node, where + " must be a mapping");
    for (const auto& kv : node) {
      const std::string k = kv.first.as<std::string>();
      if (!keys.contains(k)) fail(kv.first, "unknown key '" + k + "' in " + where);
    }
  }

  template <class T>
  void get(const YAML::Node& map, const std::string& key, T& out) const {
    const YAML::Node n = map[key];
    if (!n) return;
    if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, "'" + key + "' has the wrong type (" + n.Scalar() + ")");
    }
  }

  void number(const YAML::Node& map, const std::string& key, double& out, double lo, double hi,
              bool open_lo = false) const {
    get(map, key, out);
    const YAML::Node n = map[key];
    if (!n) return;
    if (!std::isfinite(out) || out < lo || out > hi || (open_lo && out == lo)) {
      std::ostringstream os;
      os << "'" << key << "' = " << out << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << "]";
      fail(n, os.str());
    }
  }

  void integer(const YAML::Node& map, const std::string& key, int& out, int lo, int hi) const {
    get(map, key, out);
    const YAML::Node n = map[key];
    if (n && (out < lo || out > hi)) {
      fail(n, "'" + key + "' = " + std::to_string(out) + " outside [" + std::to_string(lo) + ", " +
                  std::to_string(hi) + "]");
    }
  }

  void pair(const YAML::Node& map, const std::string& key, Eigen::Vector2d& out) const {
    const YAML::Node n = map[key];
    if (!n) return;
    if (!n.IsSequence() || n.size() != 2) fail(n, "'" + key + "' must be a list of two numbers [v, delta]");
    for (std::size_t i = 0; i < 2; ++i) {
      try {
        out[static_cast<Eigen::Index>(i)] = n[i].as<double>();
      } catch (const YAML::Exception&) {
        fail(n[i], "'" + key + "' entries must be numbers");
      }
    }
  }

 private:
  std::string file_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void ScenarioConfig::validate() const {
  episode.validate();
  setup.planner.mpc.validate();
  bench.validate();
  if (episodes < 1) raise(ErrorKind::config, "episodes must be >= 1");
  if (track.empty()) raise(ErrorKind::config, "no track file given");
  if (!std::filesystem::is_regular_file(track)) raise(ErrorKind::config, "track file not found: " + track.string());
  if (setup.fit.num_inducing < 1) raise(ErrorKind::config, "num_inducing must be >= 1");
  if (setup.selection.n_target < 2) raise(ErrorKind::config, "n_target must be >= 2");
  if (!(setup.selection.delta_s > 0.0)) raise(ErrorKind::config, "delta_s must be positive");
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& source) {
  const Reader r(source.string());
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << (source.empty() ? "<scenario>" : source.string()) << ':' << e.mark.line + 1 << ':' << e.mark.column + 1
       << ": " << e.msg;
    raise(ErrorKind::config, os.str());
  }
  if (!root || root.IsNull()) raise(ErrorKind::config, (source.empty() ? "<scenario>" : source.string()) + ": empty scenario");
  r.expect_map(root, "scenario",
               {"track", "output_dir", "episodes", "seed_base", "jobs", "episode", "planner", "predictor", "mpc",
                "selection", "sgp", "vehicle", "bench"});

  ScenarioConfig c;
  c.source = source;
  const std::filesystem::path base = source.empty() ? std::filesystem::path{} : source.parent_path();
  if (!root["track"]) r.fail(root, "missing required key 'track'");
  std::string track;
  r.get(root, "track", track);
  c.track = base / track;
  if (!std::filesystem::is_regular_file(c.track)) r.fail(root["track"], "track file not found: " + c.track.string());
  std::string out = c.output_dir.string();
  r.get(root, "output_dir", out);
  c.output_dir = std::filesystem::path(out).is_absolute() ? std::filesystem::path(out) : base / out;
  r.integer(root, "episodes", c.episodes, 1, 100000);
  r.get(root, "seed_base", c.seed_base);
  r.integer(root, "jobs", c.jobs, 0, 1024);

  if (const YAML::Node e = root["episode"]) {
    r.expect_map(e, "episode",
                 {"speed_scaler", "dt", "max_time", "opp_noise_std", "opp_noise_corr", "perception_std", "s_c",
                  "planner_hz", "start_gap", "opponent", "warmup_max", "rejoin_tol", "crash_inflation"});
    EpisodeConfig& ep = c.episode;
    r.number(e, "speed_scaler", ep.s_max, 0.0, 1.0);
    r.number(e, "dt", ep.dt, 0.0, 1.0, true);
    r.number(e, "max_time", ep.max_time, 0.0, 1e5, true);
    r.number(e, "opp_noise_std", ep.opp_noise_std, 0.0, 10.0);
    r.number(e, "opp_noise_corr", ep.opp_noise_corr, 0.0, 1e3, true);
    r.number(e, "perception_std", ep.perception_std, 0.0, 10.0);
    r.number(e, "s_c", ep.s_c, 0.0, 100.0, true);
    r.number(e, "planner_hz", ep.planner_hz, 0.0, 1e4, true);
    r.number(e, "start_gap", ep.start_gap, 0.0, 1e3, true);
    r.get(e, "opponent", ep.opponent);
    r.number(e, "warmup_max", ep.warmup_max, 0.0, 1e4);
    r.number(e, "rejoin_tol", ep.rejoin_tol, 0.0, 10.0, true);
    r.number(e, "crash_inflation", ep.crash_inflation, 0.0, 1.0);
    try {
      ep.validate();
    } catch (const Error& err) {
      r.fail(e, err.what());
    }
  }
  c.setup.planner.predictor.s_c = c.episode.s_c;

  PlannerConfig& pc = c.setup.planner;
  if (const YAML::Node p = root["planner"]) {
    r.expect_map(p, "planner",
                 {"keypoint_margin", "edge_margin", "corridor_margin", "lead_time", "lead_floor", "seed_ds",
                  "seed_v_min", "trailing_gap", "trailing_gain", "brake"});
    r.number(p, "keypoint_margin", pc.keypoints.margin, 0.0, 10.0);
    r.number(p, "edge_margin", pc.keypoints.edge_margin, 0.0, 10.0);
    pc.corridor.edge_margin = pc.keypoints.edge_margin;
    r.number(p, "corridor_margin", pc.corridor.margin, 0.0, 10.0);
    r.number(p, "lead_time", pc.keypoints.lead_time, 0.0, 100.0);
    r.number(p, "lead_floor", pc.keypoints.lead_floor, 0.0, 100.0);
    r.number(p, "seed_ds", pc.seed_ds, 0.0, 10.0, true);
    r.number(p, "seed_v_min", pc.seed_v_min, 0.0, 100.0, true);
    r.number(p, "trailing_gap", pc.trailing_gap, 0.0, 100.0);
    r.number(p, "trailing_gain", pc.trailing_gain, 0.0, 100.0, true);
    r.number(p, "brake", pc.brake, 0.0, 100.0, true);
  }
  if (const YAML::Node p = root["predictor"]) {
    r.expect_map(p, "predictor", {"dt", "horizon"});
    r.number(p, "dt", pc.predictor.dt, 0.0, 10.0, true);
    r.integer(p, "horizon", pc.predictor.horizon, 1, 100000);
  }
  if (const YAML::Node m = root["mpc"]) {
    r.expect_map(m, "mpc", {"N", "dt", "q1_n", "q2_n", "q3_n", "r", "u_min", "u_max", "du_min", "du_max", "max_iter"});
    MpcConfig& mc = pc.mpc;
    r.integer(m, "N", mc.N, 1, 1000);
    r.number(m, "dt", mc.dt, 0.0, 10.0, true);
    r.number(m, "q1_n", mc.q1[1], 0.0, kInf);
    r.number(m, "q2_n", mc.q2[1], 0.0, kInf);
    r.number(m, "q3_n", mc.q3[1], 0.0, kInf);
    r.pair(m, "r", mc.r);
    r.pair(m, "u_min", mc.u_min);
    r.pair(m, "u_max", mc.u_max);
    r.pair(m, "du_min", mc.du_min);
    r.pair(m, "du_max", mc.du_max);
    r.integer(m, "max_iter", mc.qp.max_iter, 1, 1000000);
    try {
      mc.validate();
    } catch (const Error& err) {
      r.fail(m, err.what());
    }
  }
  if (const YAML::Node s = root["selection"]) {
    r.expect_map(s, "selection", {"n_target", "delta_s"});
    int n = static_cast<int>(c.setup.selection.n_target);
    r.integer(s, "n_target", n, 2, 100000);
    c.setup.selection.n_target = static_cast<std::size_t>(n);
    r.number(s, "delta_s", c.setup.selection.delta_s, 0.0, 100.0, true);
  }
  if (const YAML::Node g = root["sgp"]) {
    r.expect_map(g, "sgp", {"num_inducing", "iters", "seed"});
    r.integer(g, "num_inducing", c.setup.fit.num_inducing, 1, 10000);
    r.integer(g, "iters", c.setup.fit.iters, 0, 100000);
    r.get(g, "seed", c.setup.fit.seed);
  }
  if (const YAML::Node v = root["vehicle"]) {
    r.expect_map(v, "vehicle",
                 {"width", "length", "wheelbase", "v_max", "delta_max", "delta_rate_max", "a_max", "a_min", "speed_tau"});
    VehicleParams& vp = c.setup.vehicle;
    r.number(v, "width", vp.width, 0.0, 10.0, true);
    r.number(v, "length", vp.length, 0.0, 10.0, true);
    r.number(v, "wheelbase", vp.wheelbase, 0.0, 10.0, true);
    r.number(v, "v_max", vp.v_max, 0.0, 100.0, true);
    r.number(v, "delta_max", vp.delta_max, 0.0, 1.5, true);
    r.number(v, "delta_rate_max", vp.delta_rate_max, 0.0, 100.0, true);
    r.number(v, "a_max", vp.a_max, 0.0, 100.0, true);
    r.number(v, "a_min", vp.a_min, -100.0, 0.0);
    r.number(v, "speed_tau", vp.speed_tau, 0.0, 10.0, true);
    pc.mpc.wheelbase = vp.wheelbase;
  }
  if (const YAML::Node b = root["bench"]) {
    r.expect_map(b, "bench",
                 {"laps", "speed_scaler", "amplitude", "line_std", "line_corr", "d_noise", "v_noise", "outlier_prob",
                  "outlier_span", "hidden_fraction", "hidden_mean", "rate_hz", "seed"});
    SyntheticOpponentConfig& sb = c.bench;
    r.integer(b, "laps", sb.laps, 1, 1000);
    r.number(b, "speed_scaler", sb.s_max, 0.0, 1.0, true);
    r.number(b, "amplitude", sb.amplitude, 0.0, 10.0);
    r.number(b, "line_std", sb.line_std, 0.0, 10.0);
    r.number(b, "line_corr", sb.line_corr, 0.0, 1e3, true);
    r.number(b, "d_noise", sb.d_noise, 0.0, 10.0);
    r.number(b, "v_noise", sb.v_noise, 0.0, 10.0);
    r.number(b, "outlier_prob", sb.outlier_prob, 0.0, 1.0);
    r.number(b, "outlier_span", sb.outlier_span, 0.0, 100.0);
    r.number(b, "hidden_fraction", sb.hidden_fraction, 0.0, 0.99);
    r.number(b, "hidden_mean", sb.hidden_mean, 0.0, 1e3, true);
    r.number(b, "rate_hz", sb.rate_hz, 0.0, 1e4, true);
    r.get(b, "seed", sb.seed);
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::config, "cannot open scenario " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace fsdp
