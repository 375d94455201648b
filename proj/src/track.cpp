#include "fsdp/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fsdp/common.hpp"

namespace fsdp {

namespace {

constexpr double kCloseTol = 1e-6;

double lerp(double a, double b, double t) { return a + t * (b - a); }

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
  }
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

char detect_delimiter(const std::string& header) {
  for (char c : {',', ';', '\t'}) {
    if (header.find(c) != std::string::npos) return c;
  }
  return ' ';
}

// Central-difference heading and smoothed curvature for tables that omit them.
void derive_heading_and_curvature(std::vector<Waypoint>& w, bool closed, bool need_psi,
                                  bool need_kappa) {
  const std::size_t n = w.size();
  auto idx = [&](long i) -> std::size_t {
    if (closed) return static_cast<std::size_t>((i % static_cast<long>(n) + static_cast<long>(n)) % static_cast<long>(n));
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
  };
  if (need_psi) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = w[idx(static_cast<long>(i) - 1)];
      const auto& b = w[idx(static_cast<long>(i) + 1)];
      w[i].psi = std::atan2(b.y - a.y, b.x - a.x);
    }
  }
  if (!need_kappa) return;
  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const long im = static_cast<long>(i) - 1;
    const long ip = static_cast<long>(i) + 1;
    const auto& a = w[idx(im)];
    const auto& b = w[idx(ip)];
    double ds = std::hypot(b.x - w[i].x, b.y - w[i].y) + std::hypot(w[i].x - a.x, w[i].y - a.y);
    if (ds <= 0.0) continue;
    raw[i] = wrap_angle(b.psi - a.psi) / ds;
  }
  constexpr int half = 2;  // 5-point window
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    int cnt = 0;
    for (int k = -half; k <= half; ++k) {
      long j = static_cast<long>(i) + k;
      if (!closed && (j < 0 || j >= static_cast<long>(n))) continue;
      acc += raw[idx(j)];
      ++cnt;
    }
    w[i].kappa = acc / cnt;
  }
}

void validate(const std::vector<Waypoint>& w, double length) {
  if (w.size() < 2) raise(ErrorKind::invalid_input, "raceline needs at least two waypoints");
  if (std::abs(w.front().s) > 1e-9) {
    raise(ErrorKind::invalid_input, "raceline row 1: s must start at 0");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& p = w[i];
    const std::string row = "raceline row " + std::to_string(i + 1) + ": ";
    for (double v : {p.s, p.x, p.y, p.psi, p.kappa, p.d_left, p.d_right, p.v_ref}) {
      if (!std::isfinite(v)) raise(ErrorKind::invalid_input, row + "non-finite value");
    }
    if (p.d_left <= 0.0 || p.d_right <= 0.0) {
      raise(ErrorKind::invalid_input, row + "lateral bounds must be positive");
    }
    if (i > 0 && !(p.s > w[i - 1].s)) {
      raise(ErrorKind::invalid_input, row + "s must be strictly increasing");
    }
  }
  if (!(length > w.back().s) && !(length == w.back().s)) {
    raise(ErrorKind::invalid_input, "raceline length shorter than last waypoint");
  }
}

}  // namespace

Raceline::Raceline(std::vector<Waypoint> waypoints, bool closed, double total_length)
    : waypoints_(std::move(waypoints)), closed_(closed), length_(total_length) {
  if (waypoints_.empty()) raise(ErrorKind::invalid_input, "empty raceline");
  validate(waypoints_, length_);
  if (closed_ && !(length_ > waypoints_.back().s)) {
    raise(ErrorKind::invalid_input, "closed raceline needs a closing segment of positive length");
  }
}

Raceline Raceline::from_waypoints(std::vector<Waypoint> waypoints, bool closed) {
  if (waypoints.empty()) raise(ErrorKind::invalid_input, "empty raceline");
  double length = waypoints.back().s;
  if (closed) {
    const auto& a = waypoints.back();
    const auto& b = waypoints.front();
    length += std::hypot(b.x - a.x, b.y - a.y);
  }
  return Raceline(std::move(waypoints), closed, length);
}

Raceline Raceline::parse(std::string_view text, std::optional<bool> closed) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  char delim = ',';
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    delim = detect_delimiter(line);
    header = split_fields(line, delim);
    break;
  }
  if (header.empty()) raise(ErrorKind::invalid_input, "empty raceline");

  auto col = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int cs = col("s"), cx = col("x"), cy = col("y"), cpsi = col("psi"), ck = col("kappa");
  const int cl = col("d_left"), cr = col("d_right"), cv = col("v_ref");
  for (auto [name, c] : {std::pair{"x", cx}, {"y", cy}, {"d_left", cl}, {"d_right", cr}, {"v_ref", cv}}) {
    if (c < 0) raise(ErrorKind::invalid_input, "raceline line " + std::to_string(line_no) +
                                                   ": missing column '" + name + "'");
  }

  std::vector<Waypoint> w;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto f = split_fields(line, delim);
    if (f.size() != header.size()) {
      raise(ErrorKind::invalid_input, "raceline line " + std::to_string(line_no) + ": expected " +
                                          std::to_string(header.size()) + " fields, got " +
                                          std::to_string(f.size()));
    }
    auto num = [&](int c) {
      if (c < 0) return 0.0;
      try {
        std::size_t used = 0;
        double v = std::stod(f[static_cast<std::size_t>(c)], &used);
        if (used != f[static_cast<std::size_t>(c)].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        raise(ErrorKind::invalid_input, "raceline line " + std::to_string(line_no) +
                                            ": cannot parse '" + f[static_cast<std::size_t>(c)] + "'");
      }
    };
    Waypoint p{num(cs), num(cx), num(cy), num(cpsi), num(ck), num(cl), num(cr), num(cv)};
    w.push_back(p);
    lines.push_back(line_no);
  }
  if (w.size() < 2) raise(ErrorKind::invalid_input, "raceline needs at least two waypoints");

  if (cs < 0) {
    w[0].s = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) {
      w[i].s = w[i - 1].s + std::hypot(w[i].x - w[i - 1].x, w[i].y - w[i - 1].y);
    }
  }
  // Row-level checks before deriving anything, so messages carry file lines.
  for (std::size_t i = 0; i < w.size(); ++i) {
    const std::string where = "raceline line " + std::to_string(lines[i]) + ": ";
    if (w[i].d_left <= 0.0 || w[i].d_right <= 0.0) {
      raise(ErrorKind::invalid_input, where + "lateral bounds must be positive");
    }
    if (i > 0 && !(w[i].s > w[i - 1].s)) {
      raise(ErrorKind::invalid_input, where + "s must be strictly increasing");
    }
    for (double v : {w[i].s, w[i].x, w[i].y, w[i].psi, w[i].kappa, w[i].v_ref}) {
      if (!std::isfinite(v)) raise(ErrorKind::invalid_input, where + "non-finite value");
    }
  }
  if (std::abs(w[0].s) > 1e-9) {
    raise(ErrorKind::invalid_input, "raceline line " + std::to_string(lines[0]) + ": s must start at 0");
  }

  const bool repeats_first = std::hypot(w.back().x - w.front().x, w.back().y - w.front().y) < kCloseTol;
  const bool is_closed = closed.value_or(repeats_first);
  double length = w.back().s;
  if (is_closed && repeats_first) {
    w.pop_back();
  } else if (is_closed) {
    length += std::hypot(w.front().x - w.back().x, w.front().y - w.back().y);
  }
  derive_heading_and_curvature(w, is_closed, cpsi < 0, ck < 0);
  return Raceline(std::move(w), is_closed, length);
}

Raceline Raceline::load(const std::filesystem::path& path, std::optional<bool> closed) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::io, "cannot open raceline file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), closed);
}

std::string Raceline::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "s,x,y,psi,kappa,d_left,d_right,v_ref\n";
  auto row = [&](const Waypoint& p, double s) {
    os << s << ',' << p.x << ',' << p.y << ',' << p.psi << ',' << p.kappa << ',' << p.d_left << ','
       << p.d_right << ',' << p.v_ref << '\n';
  };
  for (const auto& p : waypoints_) row(p, p.s);
  if (closed_) row(waypoints_.front(), length_);
  return os.str();
}

void Raceline::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) raise(ErrorKind::io, "cannot write raceline file " + path.string());
  f << to_text();
}

std::size_t Raceline::segment_count() const {
  return closed_ ? waypoints_.size() : waypoints_.size() - 1;
}

double Raceline::segment_start(std::size_t i) const { return waypoints_[i].s; }

double Raceline::segment_end(std::size_t i) const {
  return i + 1 < waypoints_.size() ? waypoints_[i + 1].s : length_;
}

const Waypoint& Raceline::segment_tail(std::size_t i) const {
  return i + 1 < waypoints_.size() ? waypoints_[i + 1] : waypoints_.front();
}

double Raceline::wrap(double s) const { return closed_ ? wrap_periodic(s, length_) : s; }

double Raceline::delta_s(double a, double b) const {
  return closed_ ? periodic_delta(a, b, length_) : b - a;
}

std::pair<std::size_t, double> Raceline::locate(double s) const {
  s = wrap(s);
  auto it = std::upper_bound(waypoints_.begin(), waypoints_.end(), s,
                             [](double v, const Waypoint& w) { return v < w.s; });
  std::size_t i = it == waypoints_.begin() ? 0 : static_cast<std::size_t>(it - waypoints_.begin()) - 1;
  if (!closed_ && i >= segment_count()) i = segment_count() - 1;
  const double a = segment_start(i);
  const double b = segment_end(i);
  return {i, (s - a) / (b - a)};
}

TrackSample Raceline::sample(double s) const {
  auto [i, t] = locate(s);
  const Waypoint& a = waypoints_[i];
  const Waypoint& b = segment_tail(i);
  const double tc = std::clamp(t, 0.0, 1.0);
  TrackSample out;
  // Open tracks extrapolate position beyond the ends; other fields hold.
  out.x = lerp(a.x, b.x, t);
  out.y = lerp(a.y, b.y, t);
  out.psi = wrap_angle(a.psi + tc * wrap_angle(b.psi - a.psi));
  out.kappa = lerp(a.kappa, b.kappa, tc);
  out.d_left = lerp(a.d_left, b.d_left, tc);
  out.d_right = lerp(a.d_right, b.d_right, tc);
  out.v_ref = lerp(a.v_ref, b.v_ref, tc);
  out.dkappa_ds = (b.kappa - a.kappa) / (segment_end(i) - segment_start(i));
  return out;
}

CartesianPose Raceline::frenet_to_cartesian(const FrenetPose& pose) const {
  const TrackSample c = sample(pose.s);
  if (c.kappa != 0.0 && std::abs(pose.n) > 0.99 / std::abs(c.kappa)) {
    raise(ErrorKind::geometry, "lateral offset folds over the centerline at s=" + std::to_string(pose.s));
  }
  return {c.x - pose.n * std::sin(c.psi), c.y + pose.n * std::cos(c.psi),
          wrap_angle(c.psi + pose.theta)};
}

FrenetPose Raceline::cartesian_to_frenet(double x, double y, double psi, double hint_s,
                                         double window) const {
  // Foot point: root of f(s) = (p - c(s)) . T(s), f decreasing through it.
  auto f_at = [&](std::size_t i, double t) {
    const Waypoint& a = waypoints_[i];
    const Waypoint& b = segment_tail(i);
    const double cx = lerp(a.x, b.x, t), cy = lerp(a.y, b.y, t);
    const double h = a.psi + t * wrap_angle(b.psi - a.psi);
    return (x - cx) * std::cos(h) + (y - cy) * std::sin(h);
  };

  double best_dist = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  bool found = false;
  auto consider = [&](double s_abs) {
    const TrackSample c = sample(s_abs);
    const double d = std::hypot(x - c.x, y - c.y);
    if (d < best_dist) {
      best_dist = d;
      best_s = s_abs;
      found = true;
    }
  };

  const std::size_t nseg = segment_count();
  double lo = hint_s - window;
  double hi = hint_s + window;
  if (!closed_) {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, length_);
  }
  if (lo <= hi) {
    auto [first, t0] = locate(lo);
    (void)t0;
    double covered_start = lo - (wrap(lo) - segment_start(first));
    std::size_t i = first;
    double base = covered_start;  // absolute s (unwrapped) of segment i start
    for (std::size_t count = 0; count <= nseg && base <= hi; ++count) {
      const double seg_len = segment_end(i) - segment_start(i);
      const double fa = f_at(i, 0.0);
      const double fb = f_at(i, 1.0);
      if (fa >= 0.0 && fb <= 0.0) {
        double a = 0.0, b = 1.0, flo = fa;
        for (int it = 0; it < 64; ++it) {
          const double m = 0.5 * (a + b);
          const double fm = f_at(i, m);
          if ((fm >= 0.0) == (flo >= 0.0)) {
            a = m;
            flo = fm;
          } else {
            b = m;
          }
        }
        const double t = 0.5 * (a + b);
        const double s_abs = base + t * seg_len;
        if (s_abs >= lo - 1e-9 && s_abs <= hi + 1e-9) consider(s_abs);
      }
      base += seg_len;
      ++i;
      if (i >= nseg) {
        if (!closed_) break;
        i = 0;
      }
    }
  }
  if (!closed_) {
    // Straight-line extensions beyond the ends.
    const Waypoint& a = waypoints_.front();
    const double s0 = (x - a.x) * std::cos(a.psi) + (y - a.y) * std::sin(a.psi);
    if (s0 < 0.0 && s0 >= hint_s - window) consider(s0);
    const TrackSample e = sample(length_);
    const double s1 = length_ + (x - e.x) * std::cos(e.psi) + (y - e.y) * std::sin(e.psi);
    if (s1 > length_ && s1 <= hint_s + window) consider(s1);
  }
  if (!found) {
    raise(ErrorKind::projection, "no centerline projection within window around s=" + std::to_string(hint_s));
  }

  const TrackSample c = sample(best_s);
  const double n = -(x - c.x) * std::sin(c.psi) + (y - c.y) * std::cos(c.psi);
  return {wrap(best_s), n, wrap_angle(psi - c.psi)};
}

}  // namespace fsdp
