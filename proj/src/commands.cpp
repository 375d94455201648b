#include "fsdp/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fsdp/common.hpp"
#include "fsdp/gp.hpp"
#include "json.hpp"

namespace fsdp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string{}; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::io, "write failed: " + path.string());
}

std::filesystem::path output_dir(const CommandOptions& opt, const ScenarioConfig& sc) {
  if (opt.out) return *opt.out;
  if (const char* env = std::getenv("FSDP_OUT_DIR"); env && *env) return env;
  return sc.output_dir;
}

void to_xy(const std::vector<Observation>& obs, Eigen::VectorXd& x, Eigen::VectorXd& y) {
  x.resize(static_cast<Eigen::Index>(obs.size()));
  y.resize(x.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = obs[i].x;
    y[static_cast<Eigen::Index>(i)] = obs[i].y;
  }
}

// Mean wall time of `reps` calls [ms].
template <class F>
double time_ms(F&& f, int reps) {
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  return ms_since(t0) / reps;
}

template <class F>
int guarded(std::ostream& msg, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    msg << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    msg << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int episode_count(const CommandOptions& opt, const ScenarioConfig& sc) {
  const int n = opt.seeds.value_or(sc.episodes);
  if (n < 1) raise(ErrorKind::config, "--seeds must be >= 1");
  return n;
}

}  // namespace

std::vector<EpisodeRecord> run_batch(const Raceline& track, const ScenarioConfig& sc, double s_max, int count,
                                     std::vector<std::string>* logs) {
  std::vector<EpisodeRecord> out(static_cast<std::size_t>(count));
  if (logs) logs->assign(static_cast<std::size_t>(count), {});
  EpisodeConfig base = sc.episode;
  base.s_max = s_max;
  base.validate();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int jobs = std::min(count, sc.jobs > 0 ? sc.jobs : static_cast<int>(hw));
  std::atomic<int> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(count));
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) {
      const auto u = static_cast<std::size_t>(i);
      EpisodeConfig cfg = base;
      cfg.seed = sc.seed_base + static_cast<std::uint64_t>(i);
      try {
        std::ostringstream log;
        out[u] = {i, cfg.seed, s_max, run_episode(track, cfg, sc.setup, logs ? &log : nullptr)};
        if (logs) (*logs)[u] = log.str();
      } catch (const std::exception& e) {
        errors[u] = "episode seed " + std::to_string(cfg.seed) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) raise(ErrorKind::solver, e);
  return out;
}

std::string format_metrics(const std::vector<EpisodeRecord>& records) {
  std::string s =
      "episode,seed,speed_scaler,outcome,l_m,T_s,jerk_avg_m_per_s3,steer_rate_avg_rad_per_s,sim_time_s,"
      "max_abs_n_m,bound_violation,overtake_cycles,fallback_cycles\n";
  for (const auto& r : records) {
    const EpisodeResult& e = r.result;
    s += std::to_string(r.index) + ',' + std::to_string(r.seed) + ',' + num(r.s_max) + ',' + to_string(e.outcome) +
         ',' + num(e.l) + ',' + num(e.T) + ',' + num(e.jerk_avg) + ',' + num(e.steer_rate_avg) + ',' +
         num(e.sim_time) + ',' + num(e.max_abs_n) + ',' + (e.bound_violation ? "1" : "0") + ',' +
         std::to_string(e.overtake_cycles) + ',' + std::to_string(e.fallback_cycles) + '\n';
  }
  return s;
}

Aggregate aggregate(const std::vector<EpisodeRecord>& records) {
  Aggregate a;
  std::vector<double> ms;
  std::vector<EpisodeResult> results;
  for (const auto& r : records) {
    const EpisodeResult& e = r.result;
    a.s_max = r.s_max;
    ++a.episodes;
    a.bound_violations += e.bound_violation ? 1 : 0;
    if (e.outcome == Outcome::overtake) {
      ++a.overtakes;
      a.l += e.l;
      a.T += e.T;
      a.jerk += e.jerk_avg;
      a.steer_rate += e.steer_rate_avg;
    } else if (e.outcome == Outcome::crash) {
      ++a.crashes;
    } else {
      ++a.timeouts;
    }
    ms.insert(ms.end(), e.plan_ms.begin(), e.plan_ms.end());
    results.push_back(e);
  }
  a.success_rate = compute_success_rate(results);
  if (a.overtakes > 0) {
    a.l /= a.overtakes;
    a.T /= a.overtakes;
    a.jerk /= a.overtakes;
    a.steer_rate /= a.overtakes;
  }
  if (!ms.empty()) {
    double sum = 0.0;
    for (double v : ms) sum += v;
    a.compute_mean = sum / static_cast<double>(ms.size());
    double var = 0.0;
    for (double v : ms) var += (v - a.compute_mean) * (v - a.compute_mean);
    a.compute_std = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
    std::sort(ms.begin(), ms.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ms.size()))) - 1;
    a.compute_p95 = ms[std::min(k, ms.size() - 1)];
  }
  return a;
}

std::string format_aggregate(const std::vector<Aggregate>& rows) {
  std::string s =
      "speed_scaler,episodes,overtakes,crashes,timeouts,success_rate,l_mean_m,T_mean_s,jerk_mean_m_per_s3,"
      "steer_rate_mean_rad_per_s,compute_mean_ms,compute_std_ms,compute_p95_ms,bound_violations\n";
  for (const auto& a : rows) {
    s += num(a.s_max) + ',' + std::to_string(a.episodes) + ',' + std::to_string(a.overtakes) + ',' +
         std::to_string(a.crashes) + ',' + std::to_string(a.timeouts) + ',' + opt_num(a.success_rate) + ',' +
         num(a.l) + ',' + num(a.T) + ',' + num(a.jerk) + ',' + num(a.steer_rate) + ',' + num(a.compute_mean) + ',' +
         num(a.compute_std) + ',' + num(a.compute_p95) + ',' + std::to_string(a.bound_violations) + '\n';
  }
  return s;
}

std::vector<Observation> bench_training_set(const std::vector<Observation>& obs, double track_length, double delta_s,
                                            std::size_t n) {
  const std::vector<Observation> binned = spatial_time_filter(obs, track_length, delta_s);
  if (binned.size() <= n) return binned;
  std::vector<Observation> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back(binned[j * binned.size() / n]);
  return out;
}

std::vector<BenchRow> predict_bench(const SyntheticOpponentData& data, const SyntheticOpponentConfig& gen,
                                    double track_length, const std::vector<int>& ms, const ScenarioConfig& sc) {
  std::set<int> laps;
  for (const auto& o : data.lateral) laps.insert(o.lap);
  if (laps.size() < 3) raise(ErrorKind::invalid_input, "predict-bench needs at least 3 laps of observations");
  const auto train = bench_training_set(data.lateral, track_length, sc.setup.selection.delta_s, sc.setup.selection.n_target);
  Eigen::VectorXd x, y;
  to_xy(train, x, y);
  const auto N = static_cast<std::size_t>(x.size());

  constexpr int kQuery = 200;
  Eigen::VectorXd query(kQuery), grid(500), truth(500);
  for (int i = 0; i < kQuery; ++i) query[i] = track_length * (i + 0.5) / kQuery;
  for (int i = 0; i < 500; ++i) {
    grid[i] = track_length * (i + 0.5) / 500;
    truth[i] = synthetic_lateral_truth(grid[i], track_length, gen.amplitude);
  }
  auto rmse = [&](const Eigen::VectorXd& mean) { return std::sqrt((mean - truth).squaredNorm() / 500.0); };
  const int reps = 20;

  std::vector<BenchRow> rows;
  DenseFitOptions dopt;
  dopt.iters = sc.setup.fit.iters;
  auto t0 = Clock::now();
  const DenseGpModel dense = fit_dense_gp(x, y, dopt);
  BenchRow d{"dense", 0, N, ms_since(t0), 0.0, 0.0};
  d.predict_ms = time_ms([&] { (void)dense.predict(query); }, reps);
  d.rmse = rmse(dense.predict(grid).mean);
  rows.push_back(d);

  for (int m : ms) {
    if (m < 1) raise(ErrorKind::config, "--m entries must be >= 1");
    if (static_cast<std::size_t>(m) >= N) {
      // Z = X with the dense hyperparameters: the sparse model is exact.
      VfeParams p;
      p.kernel = dense.kernel();
      p.noise_variance = dense.noise_variance();
      p.inducing = x;
      t0 = Clock::now();
      const SgpModel exact = SgpModel::build(x, y, p);
      BenchRow r{"sgp_exact", static_cast<int>(N), N, ms_since(t0), 0.0, 0.0};
      r.predict_ms = time_ms([&] { (void)exact.predict(query); }, reps);
      r.rmse = rmse(exact.predict(grid).mean);
      rows.push_back(r);
      continue;
    }
    SgpFitOptions o;
    o.num_inducing = m;
    o.iters = sc.setup.fit.iters;
    o.seed = sc.setup.fit.seed;
    t0 = Clock::now();
    const SgpModel sgp = fit_sgp(x, y, o);
    BenchRow r{"sgp", m, N, ms_since(t0), 0.0, 0.0};
    r.predict_ms = time_ms([&] { (void)sgp.predict(query); }, reps);
    r.rmse = rmse(sgp.predict(grid).mean);
    rows.push_back(r);
  }
  return rows;
}

std::string buffer_snapshot_json(const SyntheticOpponentData& data, const SyntheticOpponentConfig& gen,
                                 double track_length) {
  using nlohmann::json;
  json j;
  j["track_length"] = track_length;
  j["generator"] = {{"laps", gen.laps},
                    {"speed_scaler", gen.s_max},
                    {"amplitude", gen.amplitude},
                    {"line_std", gen.line_std},
                    {"line_corr", gen.line_corr},
                    {"d_noise", gen.d_noise},
                    {"v_noise", gen.v_noise},
                    {"outlier_prob", gen.outlier_prob},
                    {"outlier_span", gen.outlier_span},
                    {"hidden_fraction", gen.hidden_fraction},
                    {"hidden_mean", gen.hidden_mean},
                    {"rate_hz", gen.rate_hz},
                    {"seed", gen.seed}};
  auto rows = [](const std::vector<Observation>& obs) {
    json a = json::array();
    for (const auto& o : obs) a.push_back({o.x, o.y, o.t, o.lap});
    return a;
  };
  j["lateral"] = rows(data.lateral);
  j["speed"] = rows(data.speed);
  return j.dump() + '\n';
}

SyntheticOpponentData load_buffer_snapshot(const std::filesystem::path& path, SyntheticOpponentConfig& gen,
                                           double& track_length) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) raise(ErrorKind::config, "cannot open buffer snapshot " + path.string());
  SyntheticOpponentData d;
  try {
    const json j = json::parse(in);
    track_length = j.at("track_length").get<double>();
    const json& g = j.at("generator");
    gen.laps = g.at("laps");
    gen.s_max = g.at("speed_scaler");
    gen.amplitude = g.at("amplitude");
    gen.line_std = g.at("line_std");
    gen.line_corr = g.at("line_corr");
    gen.d_noise = g.at("d_noise");
    gen.v_noise = g.at("v_noise");
    gen.outlier_prob = g.at("outlier_prob");
    gen.outlier_span = g.at("outlier_span");
    gen.hidden_fraction = g.at("hidden_fraction");
    gen.hidden_mean = g.at("hidden_mean");
    gen.rate_hz = g.at("rate_hz");
    gen.seed = g.at("seed");
    auto rows = [](const json& a) {
      std::vector<Observation> out;
      for (const auto& r : a) out.push_back({r.at(0), r.at(1), r.at(2), r.at(3)});
      return out;
    };
    d.lateral = rows(j.at("lateral"));
    d.speed = rows(j.at("speed"));
  } catch (const json::exception& e) {
    raise(ErrorKind::config, path.string() + ": malformed buffer snapshot: " + e.what());
  }
  return d;
}

int cmd_validate_config(const CommandOptions& opt, std::ostream& msg) {
  return guarded(msg, [&] {
    const ScenarioConfig sc = load_scenario(opt.scenario);
    (void)Raceline::load(sc.track);
    msg << "ok: " << opt.scenario.string() << '\n';
    return kExitOk;
  });
}

int cmd_run(const CommandOptions& opt, std::ostream& msg) {
  return guarded(msg, [&] {
    const ScenarioConfig sc = load_scenario(opt.scenario);
    const int n = episode_count(opt, sc);
    const std::filesystem::path out = output_dir(opt, sc);
    const Raceline track = Raceline::load(sc.track);
    std::filesystem::create_directories(out);
    std::vector<std::string> logs;
    const auto records = run_batch(track, sc, sc.episode.s_max, n, &logs);
    std::string all;
    for (std::size_t i = 0; i < logs.size(); ++i) {
      std::istringstream in(logs[i]);
      std::string line;
      while (std::getline(in, line)) {
        all += "{\"episode\":" + std::to_string(records[i].index) + ",\"seed\":" + std::to_string(records[i].seed) +
               ',' + line.substr(1) + '\n';
      }
    }
    write_file(out / "episodes.jsonl", all);
    write_file(out / "metrics.csv", format_metrics(records));
    const Aggregate a = aggregate(records);
    write_file(out / "aggregate.csv", format_aggregate({a}));
    msg << "episodes " << a.episodes << ": " << a.overtakes << " overtakes, " << a.crashes << " crashes, "
        << a.timeouts << " timeouts; success rate " << (a.success_rate ? num(*a.success_rate) : "n/a") << "; plan "
        << num(a.compute_mean) << " ms mean\n";
    return kExitOk;
  });
}

int cmd_sweep(const CommandOptions& opt, std::ostream& msg) {
  return guarded(msg, [&] {
    if (opt.smax.empty()) raise(ErrorKind::config, "--smax needs at least one speed scaler");
    for (double s : opt.smax)
      if (!(s >= 0.0 && s <= 1.0)) raise(ErrorKind::config, "speed scaler " + num(s) + " outside [0, 1]");
    const ScenarioConfig sc = load_scenario(opt.scenario);
    const int n = episode_count(opt, sc);
    const std::filesystem::path out = output_dir(opt, sc);
    const Raceline track = Raceline::load(sc.track);
    std::filesystem::create_directories(out);
    std::vector<EpisodeRecord> all;
    std::vector<Aggregate> rows;
    for (double s : opt.smax) {
      const auto records = run_batch(track, sc, s, n);
      all.insert(all.end(), records.begin(), records.end());
      rows.push_back(aggregate(records));
      msg << "speed_scaler " << num(s) << ": success rate "
          << (rows.back().success_rate ? num(*rows.back().success_rate) : "n/a") << '\n';
    }
    write_file(out / "sweep_metrics.csv", format_metrics(all));
    write_file(out / "sweep.csv", format_aggregate(rows));
    return kExitOk;
  });
}

int cmd_predict_bench(const CommandOptions& opt, std::ostream& msg) {
  return guarded(msg, [&] {
    const ScenarioConfig sc = load_scenario(opt.scenario);
    const std::filesystem::path out = output_dir(opt, sc);
    const Raceline track = Raceline::load(sc.track);
    std::vector<int> ms = opt.m.empty() ? std::vector<int>{10, 20, 40} : opt.m;
    SyntheticOpponentConfig gen = sc.bench;
    double L = track.length();
    SyntheticOpponentData data;
    std::filesystem::create_directories(out);
    if (opt.buffer) {
      data = load_buffer_snapshot(*opt.buffer, gen, L);
      if (std::abs(L - track.length()) > 1e-6 * L) {
        raise(ErrorKind::config, "buffer snapshot was recorded on a track of different length");
      }
    } else {
      data = generate_synthetic_opponent(track, gen);
      write_file(out / "buffer.json", buffer_snapshot_json(data, gen, L));
    }
    const auto rows = predict_bench(data, gen, L, ms, sc);
    std::string s = "model,M,N,fit_ms,predict_ms,rmse_m\n";
    for (const auto& r : rows) {
      s += r.model + ',' + std::to_string(r.M) + ',' + std::to_string(r.N) + ',' + num(r.fit_ms) + ',' +
           num(r.predict_ms) + ',' + num(r.rmse) + '\n';
    }
    write_file(out / "bench.csv", s);
    OpponentFitOptions fit = sc.setup.fit;
    const SelectionComparison c = compare_selection(track, data, gen, sc.setup.selection, fit);
    write_file(out / "selection.csv",
               "curated_rmse_m,latest_rmse_m,ratio,curated_size,latest_size\n" + num(c.rmse_curated) + ',' +
                   num(c.rmse_latest) + ',' + num(c.ratio) + ',' + std::to_string(c.curated_size) + ',' +
                   std::to_string(c.latest_size) + '\n');
    msg << s << "selection: curated " << num(c.rmse_curated) << " m, latest-lap " << num(c.rmse_latest)
        << " m, ratio " << num(c.ratio) << '\n';
    return kExitOk;
  });
}

}  // namespace fsdp
