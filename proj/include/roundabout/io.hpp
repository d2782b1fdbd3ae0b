#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "roundabout/sim.hpp"

namespace roundabout::io {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

using Setter = std::function<void(ScenarioConfig&, const json&)>;
using Getter = std::function<json(const ScenarioConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class T, class Ref>
Field field(Ref ref) {
  return {[ref](ScenarioConfig& c, const json& j) { ref(c) = j.get<T>(); },
          [ref](ScenarioConfig c) { return json(ref(c)); }};
}

#define RB_FIELD(T, expr) field<T>([](ScenarioConfig& c) -> T& { return expr; })

// Flat key space: nested structs are spelled out with their own field names
// (car-following parameters carry a cf_ prefix).
inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"n_cz", RB_FIELD(int, c.n_cz)},
      {"segment_length", RB_FIELD(double, c.segment_length)},
      {"arrival_rates", RB_FIELD(std::vector<double>, c.arrival_rates)},
      {"duration", RB_FIELD(double, c.duration)},
      {"td", RB_FIELD(double, c.td)},
      {"horizon", RB_FIELD(int, c.horizon)},
      {"controller",
       {[](ScenarioConfig& c, const json& j) {
          const auto s = j.get<std::string>();
          const auto k = parse_controller(s);
          if (!k) throw ConfigError("unknown controller '" + s + "'");
          c.controller = *k;
        },
        [](const ScenarioConfig& c) { return json(to_string(c.controller)); }}},
      {"alpha", RB_FIELD(double, c.alpha)},
      {"lambda", RB_FIELD(double, c.lambda)},
      {"v_min", RB_FIELD(double, c.limits.v_min)},
      {"v_max", RB_FIELD(double, c.limits.v_max)},
      {"u_min", RB_FIELD(double, c.limits.u_min)},
      {"u_max", RB_FIELD(double, c.limits.u_max)},
      {"phi", RB_FIELD(double, c.limits.phi)},
      {"delta", RB_FIELD(double, c.limits.delta)},
      {"gamma_vmax", RB_FIELD(double, c.gammas.gamma_vmax)},
      {"gamma_vmin", RB_FIELD(double, c.gammas.gamma_vmin)},
      {"gamma_rear", RB_FIELD(double, c.gammas.gamma_rear)},
      {"gamma_merge", RB_FIELD(double, c.gammas.gamma_merge)},
      {"p_default", RB_FIELD(double, c.p_default)},
      {"clbf_n", RB_FIELD(int, c.clbf_n)},
      {"sampled_data", RB_FIELD(bool, c.sampled_data)},
      {"seed", RB_FIELD(std::uint64_t, c.seed)},
      {"entry_speed", RB_FIELD(double, c.entry_speed)},
      {"allow_full_loop", RB_FIELD(bool, c.allow_full_loop)},
      {"sdf_pure_distance", RB_FIELD(bool, c.sdf_pure_distance)},
      {"ocbf_weight", RB_FIELD(double, c.ocbf_weight)},
      {"ocbf_sampled_data", RB_FIELD(bool, c.ocbf_sampled_data)},
      {"cf_a", RB_FIELD(double, c.car_following.a)},
      {"cf_b", RB_FIELD(double, c.car_following.b)},
      {"cf_s0", RB_FIELD(double, c.car_following.s0)},
      {"cf_headway", RB_FIELD(double, c.car_following.headway)},
      {"cf_exponent", RB_FIELD(double, c.car_following.exponent)},
      {"cf_critical_gap", RB_FIELD(double, c.car_following.critical_gap)},
      {"count_queue_time", RB_FIELD(bool, c.count_queue_time)},
  };
  return f;
}

#undef RB_FIELD

}  // namespace detail

// Overlays the keys of `doc` onto `cfg`. Unknown keys and wrong types are
// errors; the result is validated.
inline void apply_config(const json& doc, ScenarioConfig& cfg) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  const auto& f = detail::fields();
  for (const auto& [key, value] : doc.items()) {
    auto it = f.find(key);
    if (it == f.end()) throw ConfigError("config: unknown key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  apply_config(doc, base);
  return base;
}

inline json config_json(const ScenarioConfig& cfg) {
  json j = json::object();
  for (const auto& [key, f] : detail::fields()) j[key] = f.get(cfg);
  return j;
}

inline json summary_json(const MetricsSummary& s, const ScenarioConfig& cfg) {
  json j;
  j["controller"] = s.controller;
  j["horizon"] = s.horizon;
  j["seed"] = s.seed;
  j["duration"] = s.duration;
  j["td"] = s.td;
  j["beta"] = s.beta;
  j["total"] = {{"time", s.totals.time},
                {"energy", s.totals.energy},
                {"objective", s.totals.objective}};
  json per = json::array();
  for (std::size_t k = 0; k < s.totals.per_cz.size(); ++k) {
    const auto& z = s.totals.per_cz[k];
    per.push_back({{"cz", k + 1},
                   {"visits", z.visits},
                   {"avg_time", z.avg_time},
                   {"avg_energy", z.avg_energy},
                   {"avg_objective", z.avg_objective}});
  }
  j["per_cz"] = per;
  j["infeasible_count"] = s.infeasible_count;
  j["unsafe_count"] = s.unsafe_count;
  j["collision_count"] = s.collision_count;
  j["fallback_steps"] = s.fallback_steps;
  j["clamped_controls"] = s.clamped;
  j["throughput"] = {{"arrivals", s.arrivals},
                     {"entered", s.entered},
                     {"exited", s.exited},
                     {"in_system", s.in_system},
                     {"queued", s.queued},
                     {"queue_time", s.queue_time}};
  j["sequencing"] = {{"resequencings", s.resequencings},
                     {"sequences_evaluated", s.sequences_evaluated}};
  j["qp"] = {{"solves", s.qp_solves}, {"seconds", s.qp_seconds}, {"avg_ms", s.avg_qp_ms()}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.trace_hash));
  j["trace_hash"] = hash;
  j["wall_seconds"] = s.wall_seconds;
  j["config"] = config_json(cfg);
  return j;
}

// ------------------------------------------------------------------ files

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline const char* kTrajectoryHeader = "t,cav_id,cz,segment_class,x,v,u,sequence_id,unsafe,fallback\n";

inline std::string trajectories_csv(const std::vector<TrajectoryRow>& rows) {
  std::string s = kTrajectoryHeader;
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f,%d,%d,%d,%.17g,%.17g,%.17g,%d,%d,%d\n", r.t, r.cav_id, r.cz,
                  r.segment_class, r.x, r.v, r.u, r.sequence_id, r.unsafe ? 1 : 0,
                  r.fallback ? 1 : 0);
    s += buf;
  }
  return s;
}

inline void write_trajectories(const std::filesystem::path& path,
                               const std::vector<TrajectoryRow>& rows) {
  write_text(path, trajectories_csv(rows));
}

inline std::vector<TrajectoryRow> read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line + "\n" != kTrajectoryHeader) throw IoError("unexpected header in " + path.string());
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajectoryRow r;
    int unsafe = 0, fallback = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%d,%d,%lf,%lf,%lf,%d,%d,%d", &r.t, &r.cav_id, &r.cz,
                    &r.segment_class, &r.x, &r.v, &r.u, &r.sequence_id, &unsafe, &fallback) != 10)
      throw IoError("bad row in " + path.string() + ": " + line);
    r.unsafe = unsafe;
    r.fallback = fallback;
    rows.push_back(r);
  }
  return rows;
}

// ------------------------------------------------------------------ plots

struct ProfileSeries {
  std::string label;
  std::vector<double> t, v, u;
};

inline ProfileSeries profile_of(const std::vector<TrajectoryRow>& rows, int cav_id,
                                std::string label) {
  ProfileSeries s{std::move(label), {}, {}, {}};
  for (const auto& r : rows) {
    if (r.cav_id != cav_id) continue;
    s.t.push_back(r.t);
    s.v.push_back(r.v);
    s.u.push_back(r.u);
  }
  return s;
}

// Speed and control of one CAV over time, one line per series, as a
// standalone SVG.
inline std::string profile_svg(const std::string& title, const std::vector<ProfileSeries>& series) {
  const double W = 640, panel = 220, left = 60, top = 40, gap = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  double t0 = 1e18, t1 = -1e18, v0 = 0, v1 = 1, u0 = -1, u1 = 1;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      t0 = std::min(t0, s.t[i]);
      t1 = std::max(t1, s.t[i]);
      v1 = std::max(v1, s.v[i]);
      u0 = std::min(u0, s.u[i]);
      u1 = std::max(u1, s.u[i]);
    }
  if (!(t1 > t0)) {
    t0 = 0;
    t1 = 1;
  }
  const double pw = W - left - 20;
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
    << top + 2 * panel + gap + 40 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<text x=\"" << left << "\" y=\"20\">" << title << "</text>\n";
  auto draw = [&](double y0, double lo, double hi, const char* name,
                  const std::vector<double> ProfileSeries::*field) {
    o << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << panel
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
    o << "<text x=\"5\" y=\"" << y0 + panel / 2 << "\">" << name << "</text>\n";
    o << "<text x=\"" << left - 5 << "\" y=\"" << y0 + 10 << "\" text-anchor=\"end\">" << hi
      << "</text>\n";
    o << "<text x=\"" << left - 5 << "\" y=\"" << y0 + panel << "\" text-anchor=\"end\">" << lo
      << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      const auto& s = series[k];
      const auto& ys = s.*field;
      if (ys.empty()) continue;
      o << "<polyline fill=\"none\" stroke=\"" << colors[k % 5] << "\" points=\"";
      for (std::size_t i = 0; i < ys.size(); ++i) {
        const double x = left + pw * (s.t[i] - t0) / (t1 - t0);
        const double y = y0 + panel * (1.0 - (ys[i] - lo) / (hi - lo));
        o << x << "," << y << " ";
      }
      o << "\"/>\n";
    }
  };
  draw(top, v0, v1, "v [m/s]", &ProfileSeries::v);
  draw(top + panel + gap, u0, u1, "u [m/s2]", &ProfileSeries::u);
  const double ly = top + 2 * panel + gap + 25;
  o << "<text x=\"" << left << "\" y=\"" << ly << "\">t = " << t0 << " .. " << t1 << " s</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k)
    o << "<text x=\"" << left + 180 + 120 * k << "\" y=\"" << ly << "\" fill=\"" << colors[k % 5]
      << "\">" << series[k].label << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace roundabout::io
