#include "fsdp/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fsdp/common.hpp"
#include "fsdp/gp.hpp"

namespace fsdp {

void SyntheticOpponentConfig::validate() const {
  if (laps < 1) raise(ErrorKind::config, "synthetic data needs at least one lap");
  if (!(s_max > 0.0 && s_max <= 1.0)) raise(ErrorKind::config, "synthetic speed scaler must lie in (0, 1]");
  if (!(line_corr > 0.0)) raise(ErrorKind::config, "line correlation time must be positive");
  if (line_std < 0.0 || d_noise < 0.0 || v_noise < 0.0) raise(ErrorKind::config, "noise std must be >= 0");
  if (outlier_prob < 0.0 || outlier_prob > 1.0) raise(ErrorKind::config, "outlier probability must lie in [0, 1]");
  if (!(hidden_fraction >= 0.0 && hidden_fraction < 1.0)) raise(ErrorKind::config, "hidden fraction must lie in [0, 1)");
  if (!(hidden_mean > 0.0)) raise(ErrorKind::config, "hidden spell length must be positive");
  if (!(rate_hz > 0.0)) raise(ErrorKind::config, "sample rate must be positive");
}

double synthetic_lateral_truth(double s, double track_length, double amplitude) {
  return amplitude * std::sin(2.0 * std::numbers::pi * s / track_length);
}

SyntheticOpponentData generate_synthetic_opponent(const Raceline& track, const SyntheticOpponentConfig& cfg) {
  cfg.validate();
  const double L = track.length();
  const double dt = 1.0 / cfg.rate_hz;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> fault(-cfg.outlier_span, cfg.outlier_span);
  SyntheticOpponentData out;
  const double decay = std::exp(-dt / cfg.line_corr);
  double wander = cfg.line_std * nd(rng);
  const double p_show = std::min(1.0, dt / cfg.hidden_mean);
  const double p_hide =
      cfg.hidden_fraction > 0.0 ? std::min(1.0, dt / (cfg.hidden_mean * (1.0 - cfg.hidden_fraction) / cfg.hidden_fraction)) : 0.0;
  bool visible = true;
  double s = 0.0, t = 0.0;
  for (int lap = 0; lap < cfg.laps; ++lap) {
    while (s < L * (lap + 1)) {
      const double sw = wrap_periodic(s, L);
      const double v = cfg.s_max * track.sample(sw).v_ref;
      double d = synthetic_lateral_truth(sw, L, cfg.amplitude) + wander + cfg.d_noise * nd(rng);
      if (u01(rng) < cfg.outlier_prob) d = fault(rng);
      const double vn = v + cfg.v_noise * nd(rng);
      visible = visible ? u01(rng) >= p_hide : u01(rng) < p_show;
      if (visible) {
        out.lateral.push_back({sw, d, t, lap});
        out.speed.push_back({sw, vn, t, lap});
      }
      wander = wander * decay + cfg.line_std * std::sqrt(1.0 - decay * decay) * nd(rng);
      s += v * dt;
      t += dt;
    }
  }
  return out;
}

std::vector<Observation> lap_slice(const std::vector<Observation>& obs, int lap) {
  std::vector<Observation> out;
  for (const auto& o : obs)
    if (o.lap == lap) out.push_back(o);
  return out;
}

SelectionComparison compare_selection(const Raceline& track, const SyntheticOpponentData& data,
                                      const SyntheticOpponentConfig& cfg, const SelectionConfig& selection,
                                      const OpponentFitOptions& fit, int grid_points) {
  const double L = track.length();
  double bound = 0.0;
  for (const auto& w : track.waypoints()) bound = std::max({bound, w.d_left, w.d_right});
  SelectionConfig sel = selection;
  sel.track_length = L;
  sel.y_min = -bound;
  sel.y_max = bound;

  ObservationBuffer buffer(sel);
  std::optional<SgpModel> model;
  for (int lap = 0; lap < cfg.laps; ++lap) {
    buffer.update(lap_slice(data.lateral, lap), model ? &*model : nullptr);
    const auto& tr = buffer.train();
    Eigen::VectorXd x(static_cast<Eigen::Index>(tr.size())), y(x.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      x[static_cast<Eigen::Index>(i)] = tr[i].x;
      y[static_cast<Eigen::Index>(i)] = tr[i].y;
    }
    SgpFitOptions o;
    o.num_inducing = fit.num_inducing;
    o.iters = fit.iters;
    o.seed = fit.seed + static_cast<std::uint64_t>(lap);
    if (model) {
      o.kernel = model->kernel();
      o.noise_variance = model->noise_variance();
      if (model->inducing().size() == std::min<Eigen::Index>(fit.num_inducing, x.size())) o.inducing = model->inducing();
    }
    model = fit_sgp(x, y, o);
  }

  const std::vector<Observation> last =
      spatial_time_filter(lap_slice(data.lateral, cfg.laps - 1), L, sel.delta_s);
  Eigen::VectorXd lx(static_cast<Eigen::Index>(last.size())), ly(lx.size());
  for (std::size_t i = 0; i < last.size(); ++i) {
    lx[static_cast<Eigen::Index>(i)] = last[i].x;
    ly[static_cast<Eigen::Index>(i)] = last[i].y;
  }
  DenseFitOptions dopt;
  dopt.iters = fit.iters;
  const DenseGpModel latest = fit_dense_gp(lx, ly, dopt);

  Eigen::VectorXd grid(grid_points), truth(grid_points);
  for (int i = 0; i < grid_points; ++i) {
    grid[i] = L * (i + 0.5) / grid_points;
    truth[i] = synthetic_lateral_truth(grid[i], L, cfg.amplitude);
  }
  SelectionComparison r;
  r.rmse_curated = std::sqrt((model->predict(grid).mean - truth).squaredNorm() / grid_points);
  r.rmse_latest = std::sqrt((latest.predict(grid).mean - truth).squaredNorm() / grid_points);
  r.ratio = r.rmse_curated / r.rmse_latest;
  r.curated_size = buffer.size();
  r.latest_size = last.size();
  return r;
}

}  // namespace fsdp
