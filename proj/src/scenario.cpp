#include "dcmg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "kv_reader.hpp"

namespace dcmg {

const char* to_string(LoadField f) {
  switch (f) {
    case LoadField::kYL: return "y_l";
    case LoadField::kIbar: return "i_bar";
    case LoadField::kPL: return "p_l";
  }
  return "?";
}

namespace {

LoadField parse_field(const std::string& s, int line) {
  if (s == "y_l") return LoadField::kYL;
  if (s == "i_bar") return LoadField::kIbar;
  if (s == "p_l") return LoadField::kPL;
  throw ParseError(line, "unknown load field '" + s + "' (expected y_l, i_bar or p_l)");
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  bool have_header = false;
  bool have_disturbance = false;
  std::map<int, LoadEvent> events;
  for (const auto& s : parse_kv_document(text)) {
    KeyReader r(s);
    if (s.kind == "scenario") {
      if (have_header) throw ParseError(s.line, "scenario defined twice");
      sc.duration = r.number("duration");
      sc.dt = r.number_or("dt", sc.dt);
      sc.decimation = r.has("decimation") ? r.index("decimation") : sc.decimation;
      have_header = true;
    } else if (s.kind == "event") {
      if (s.label.empty()) throw ParseError(s.line, "event section needs an index");
      const int k = parse_index(s.label, s.line, "event index");
      if (events.count(k)) throw ParseError(s.line, "event " + s.label + " defined twice");
      LoadEvent ev;
      ev.line = s.line;
      ev.time = r.number("time");
      const std::string target = r.text("target");
      if (target == "all") {
        ev.target = -1;
      } else {
        ev.target = parse_index(target, s.line, "event target") - 1;
        if (ev.target < 0) throw ParseError(s.line, "event target must be >= 1 or 'all'");
      }
      ev.field = parse_field(r.text("field"), s.line);
      const std::string value = r.text("value");
      if (value == "nominal") {
        ev.nominal = true;
      } else {
        ev.value = parse_number(value, s.line, "event value");
      }
      events[k] = ev;
    } else if (s.kind == "disturbance") {
      if (have_disturbance) throw ParseError(s.line, "disturbance defined twice");
      DisturbanceSpec& d = sc.disturbance;
      d.enabled = true;
      d.amplitude = r.number("amplitude");
      d.bandwidth = r.number_or("bandwidth", d.bandwidth);
      d.seed = r.has("seed") ? static_cast<unsigned>(r.index("seed")) : d.seed;
      d.t_on = r.number_or("t_on", d.t_on);
      d.t_off = r.number_or("t_off", d.t_off);
      have_disturbance = true;
    } else {
      throw ParseError(s.line, "unknown section '" + s.kind + "'");
    }
    r.finish();
  }
  if (!have_header) throw ParseError(0, "missing [scenario] section");
  for (const auto& [k, ev] : events) sc.events.push_back(ev);
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const LoadEvent& a, const LoadEvent& b) { return a.time < b.time; });
  return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_text_file(path)); }

std::vector<std::string> validate_scenario(const Scenario& sc, const NetworkSpec& spec) {
  std::vector<std::string> bad;
  if (!(sc.duration > 0)) bad.push_back("duration must be positive");
  if (!(sc.dt > 0)) bad.push_back("dt must be positive");
  if (sc.dt > 0 && sc.duration > 0 && sc.dt > sc.duration) bad.push_back("dt exceeds the duration");
  if (sc.decimation < 1) bad.push_back("decimation must be >= 1");
  for (const auto& ev : sc.events) {
    const std::string where = "event at line " + std::to_string(ev.line);
    if (!(ev.time >= 0 && ev.time <= sc.duration)) bad.push_back(where + ": time outside [0, duration]");
    if (ev.target >= spec.num_dgs()) bad.push_back(where + ": target DG does not exist");
    if (!ev.nominal && !(ev.value >= 0)) bad.push_back(where + ": load values must be non-negative");
  }
  const auto& d = sc.disturbance;
  if (d.enabled) {
    if (!(d.amplitude >= 0)) bad.push_back("disturbance amplitude must be non-negative");
    if (!(d.bandwidth > 0)) bad.push_back("disturbance bandwidth must be positive");
  }
  return bad;
}

void apply_event(const NetworkSpec& spec, const LoadEvent& ev, std::vector<ZipLoad>& loads) {
  const int n = static_cast<int>(loads.size());
  for (int i = 0; i < n; ++i) {
    if (ev.target >= 0 && ev.target != i) continue;
    const ZipLoad& nom = spec.loads[i];
    switch (ev.field) {
      case LoadField::kYL: loads[i].Y_L = ev.nominal ? nom.Y_L : ev.value; break;
      case LoadField::kIbar: loads[i].I_bar = ev.nominal ? nom.I_bar : ev.value; break;
      case LoadField::kPL: loads[i].P_L = ev.nominal ? nom.P_L : ev.value; break;
    }
  }
}

std::vector<LoadWindow> load_windows(const NetworkSpec& spec, const Scenario& sc) {
  std::vector<LoadWindow> out;
  std::vector<ZipLoad> loads = spec.loads;
  size_t k = 0;
  double t = 0.0;
  while (true) {
    while (k < sc.events.size() && sc.events[k].time <= t) apply_event(spec, sc.events[k++], loads);
    const double next = k < sc.events.size() ? sc.events[k].time : sc.duration;
    if (next > t || out.empty()) out.push_back({t, std::min(next, sc.duration), loads});
    if (k >= sc.events.size()) break;
    t = next;
  }
  return out;
}

DisturbanceSignal::DisturbanceSignal(const DisturbanceSpec& d, int channels, double duration)
    : enabled_(d.enabled && d.amplitude > 0), channels_(channels) {
  if (!enabled_) return;
  h_ = 1.0 / d.bandwidth;
  t_on_ = d.t_on;
  t_off_ = d.t_off < 0 ? duration : d.t_off;
  const int samples = static_cast<int>(std::ceil((t_off_ - t_on_) / h_)) + 2;
  std::mt19937_64 rng(d.seed);
  std::uniform_real_distribution<double> u(-d.amplitude, d.amplitude);
  knots_.resize(channels, std::max(samples, 2));
  for (int k = 0; k < knots_.cols(); ++k)
    for (int c = 0; c < channels; ++c) knots_(c, k) = u(rng);
}

Eigen::VectorXd DisturbanceSignal::at(double t) const {
  if (!enabled_ || t < t_on_ || t > t_off_) return Eigen::VectorXd::Zero(channels_);
  const double s = (t - t_on_) / h_;
  const auto k = std::min(static_cast<Eigen::Index>(s), knots_.cols() - 2);
  const double f = s - static_cast<double>(k);
  return (1.0 - f) * knots_.col(k) + f * knots_.col(k + 1);
}

}  // namespace dcmg
