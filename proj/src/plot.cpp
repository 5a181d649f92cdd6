#include "doa/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "doa/csv.hpp"

namespace doa::plot {
namespace {

constexpr double kMarginLeft = 70, kMarginRight = 170, kMarginTop = 40, kMarginBottom = 55;

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double pad = std::max(1.0, std::abs(lo) * 0.05);
      lo -= pad;
      hi += pad;
    }
  }
  double span() const { return hi - lo; }
};

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

std::string fmt(double v) {
  std::ostringstream os;
  if (std::abs(v) >= 1e5 || (std::abs(v) < 1e-3 && v != 0.0))
    os << std::setprecision(2) << std::scientific << v;
  else
    os << std::setprecision(6) << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return colors[k % 8];
}

std::string render_svg(const Figure& fig) {
  Range rx, ry;
  for (const auto& s : fig.series) {
    for (double v : s.x) rx.add(v);
    for (double v : s.y) ry.add(v);
  }
  for (const auto& b : fig.bands) {
    for (double v : b.x) rx.add(v);
    for (double v : b.lower) ry.add(v);
    for (double v : b.upper) ry.add(v);
  }
  for (const auto& m : fig.markers) {
    rx.add(m.x);
    ry.add(m.y);
  }
  rx.finish();
  ry.finish();

  const double pw = fig.width - kMarginLeft - kMarginRight;
  const double ph = fig.height - kMarginTop - kMarginBottom;
  if (fig.equal_aspect) {
    // widen whichever range is too narrow so one unit has the same length on both axes
    const double sx = rx.span() / pw, sy = ry.span() / ph;
    if (sx > sy) {
      const double mid = 0.5 * (ry.lo + ry.hi);
      ry.lo = mid - 0.5 * sx * ph;
      ry.hi = mid + 0.5 * sx * ph;
    } else {
      const double mid = 0.5 * (rx.lo + rx.hi);
      rx.lo = mid - 0.5 * sy * pw;
      rx.hi = mid + 0.5 * sy * pw;
    }
  }
  auto X = [&](double v) { return kMarginLeft + (v - rx.lo) / rx.span() * pw; };
  auto Y = [&](double v) { return kMarginTop + (ry.hi - v) / ry.span() * ph; };

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width << "\" height=\""
     << fig.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kMarginLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(fig.title) << "</text>\n";

  // grid and ticks
  const double xs = nice_step(rx.span(), 8), ys = nice_step(ry.span(), 6);
  for (double v = std::ceil(rx.lo / xs) * xs; v <= rx.hi + 1e-9 * xs; v += xs) {
    os << "<line x1=\"" << X(v) << "\" y1=\"" << kMarginTop << "\" x2=\"" << X(v) << "\" y2=\""
       << kMarginTop + ph << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << X(v) << "\" y=\"" << kMarginTop + ph + 16
       << "\" text-anchor=\"middle\">" << fmt(std::abs(v) < 1e-12 * xs ? 0.0 : v) << "</text>\n";
  }
  for (double v = std::ceil(ry.lo / ys) * ys; v <= ry.hi + 1e-9 * ys; v += ys) {
    os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << Y(v) << "\" x2=\"" << kMarginLeft + pw
       << "\" y2=\"" << Y(v) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">"
       << fmt(std::abs(v) < 1e-12 * ys ? 0.0 : v) << "</text>\n";
  }
  os << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kMarginLeft + pw / 2 << "\" y=\"" << fig.height - 12
     << "\" text-anchor=\"middle\">" << escape(fig.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << kMarginTop + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(fig.y_label) << "</text>\n";

  os << "<g clip-path=\"none\">\n";
  for (const auto& b : fig.bands) {
    if (b.x.empty()) continue;
    os << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.x.size(); ++i) os << X(b.x[i]) << ',' << Y(b.upper[i]) << ' ';
    for (std::size_t i = b.x.size(); i-- > 0;) os << X(b.x[i]) << ',' << Y(b.lower[i]) << ' ';
    os << "\"/>\n";
  }
  for (const auto& s : fig.series) {
    if (s.x.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) os << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
    os << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size(); ++i)
        os << "<circle cx=\"" << X(s.x[i]) << "\" cy=\"" << Y(s.y[i]) << "\" r=\"2.5\" fill=\""
           << s.color << "\"/>\n";
  }
  for (const auto& m : fig.markers) {
    const double cx = X(m.x), cy = Y(m.y), h = m.size / 2;
    if (m.shape == "circle")
      os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << h << "\" fill=\"" << m.color
         << "\"/>\n";
    else if (m.shape == "cross")
      os << "<path d=\"M" << cx - h << ',' << cy - h << " L" << cx + h << ',' << cy + h << " M"
         << cx - h << ',' << cy + h << " L" << cx + h << ',' << cy - h << "\" stroke=\"" << m.color
         << "\" stroke-width=\"2\"/>\n";
    else
      os << "<rect class=\"violation\" x=\"" << cx - h << "\" y=\"" << cy - h << "\" width=\""
         << m.size << "\" height=\"" << m.size << "\" fill=\"" << m.color << "\"/>\n";
  }
  os << "</g>\n";

  // legend: labelled series only, one entry per label
  double ly = kMarginTop + 10;
  std::vector<std::string> seen;
  for (const auto& s : fig.series) {
    if (s.label.empty() || std::find(seen.begin(), seen.end(), s.label) != seen.end()) continue;
    seen.push_back(s.label);
    const double lx = kMarginLeft + pw + 12;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
       << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    os << "<text x=\"" << lx + 28 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

void save_svg(const Figure& fig, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << render_svg(fig);
}

void loss_curve(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  Figure f;
  f.title = "Predictor training loss";
  f.x_label = "epoch";
  f.y_label = "MSE [m^2]";
  const auto epoch = t.column("epoch");
  f.series.push_back({"training", epoch, t.column("train_mse"), palette(0), false, true});
  f.series.push_back({"validation", epoch, t.column("validation_mse"), palette(1), false, true});
  save_svg(f, out);
}

void rmse_quantiles(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  Figure f;
  f.title = "Prediction error by forecast horizon";
  f.x_label = "forecast step";
  f.y_label = "error [m]";
  const auto h = t.column("horizon");
  const char* cols[] = {"q25", "q50", "q75", "q90"};
  const char* labels[] = {"25% quantile", "median", "75% quantile", "90% quantile"};
  for (int k = 0; k < 4; ++k) f.series.push_back({labels[k], h, t.column(cols[k]), palette(k)});
  save_svg(f, out);
}

void learning_curves(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  const auto labels = t.text_column("label");
  const auto step = t.column("env_step"), mean = t.column("mean"), lo = t.column("lower"),
             hi = t.column("upper");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!rows.count(labels[i])) order.push_back(labels[i]);
    rows[labels[i]].push_back(i);
  }
  Figure f;
  f.title = "Evaluation return (mean, 95% confidence band)";
  f.x_label = "environment steps";
  f.y_label = "test return";
  for (std::size_t k = 0; k < order.size(); ++k) {
    Series s{order[k], {}, {}, palette(k)};
    s.dashed = order[k].rfind("SL-", 0) != 0;
    Band b{{}, {}, {}, palette(k)};
    for (std::size_t i : rows[order[k]]) {
      s.x.push_back(step[i]);
      s.y.push_back(mean[i]);
      b.x.push_back(step[i]);
      b.lower.push_back(lo[i]);
      b.upper.push_back(hi[i]);
    }
    f.bands.push_back(b);
    f.series.push_back(s);
  }
  save_svg(f, out);
}

void episode_trajectories(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  const auto ax = t.column("x"), ay = t.column("y");
  const auto violations = t.text_column("violations");
  Figure f;
  f.title = "Episode trajectories";
  f.x_label = "x [m]";
  f.y_label = "y [m]";
  f.width = 960;
  f.height = 520;

  // obstacle columns come in groups o<id>_rule, _x, _y, _dcpa, _tcpa, _gen
  std::vector<std::string> ids;
  for (const auto& h : t.header)
    if (h.size() > 5 && h[0] == 'o' && h.ends_with("_rule")) ids.push_back(h.substr(1, h.size() - 6));
  bool right_labelled = false, left_labelled = false;
  for (const auto& id : ids) {
    const auto rule = t.text_column("o" + id + "_rule");
    const auto ox = t.column("o" + id + "_x"), oy = t.column("o" + id + "_y");
    const auto gen = t.column("o" + id + "_gen");
    std::size_t start = 0;
    for (std::size_t i = 1; i <= ox.size(); ++i) {
      if (i < ox.size() && gen[i] == gen[start]) continue;
      const bool right = rule[start] == "right";
      Series s{"", {ox.begin() + start, ox.begin() + i}, {oy.begin() + start, oy.begin() + i},
               right ? "#1f77b4" : "#ff7f0e"};
      if (right && !right_labelled) s.label = "obstacle, pass on right", right_labelled = true;
      if (!right && !left_labelled) s.label = "obstacle, pass on left", left_labelled = true;
      f.series.push_back(s);
      start = i;
    }
  }
  f.series.push_back({"agent", ax, ay, "#000000"});
  f.series.back().label = "agent";
  for (std::size_t i = 0; i < violations.size(); ++i)
    if (!violations[i].empty()) f.markers.push_back({ax[i], ay[i], "#000000", "square", 9.0});
  save_svg(f, out);
}

void prediction_overlay(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  const auto traj = t.column("trajectory");
  const auto kind = t.text_column("kind");
  const auto x = t.column("x"), y = t.column("y");
  std::map<std::pair<int, std::string>, Series> groups;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    auto& s = groups[{static_cast<int>(traj[i]), kind[i]}];
    s.x.push_back(x[i]);
    s.y.push_back(y[i]);
  }
  Figure f;
  f.title = "Predicted vs actual obstacle trajectories";
  f.x_label = "x [m]";
  f.y_label = "y [m]";
  f.equal_aspect = true;
  std::map<std::string, bool> labelled;
  for (auto& [key, s] : groups) {
    const std::string& k = key.second;
    s.color = k == "observed" ? "#000000" : k == "actual" ? "#2ca02c" : "#d62728";
    s.dashed = k == "predicted";
    if (!labelled[k]) s.label = k, labelled[k] = true;
    f.series.push_back(s);
  }
  save_svg(f, out);
}

void distance_curve(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  const auto id = t.column("obstacle_id"), j = t.column("j");
  const auto raw = t.column("raw_distance"), smooth = t.column("smoothed_distance");
  std::vector<int> order;
  for (double v : id)
    if (std::find(order.begin(), order.end(), static_cast<int>(v)) == order.end())
      order.push_back(static_cast<int>(v));
  Figure f;
  f.title = "Distance to obstacle and closest approach";
  f.x_label = "relative step j";
  f.y_label = "distance [m]";
  for (std::size_t k = 0; k < order.size(); ++k) {
    Series r{"raw, obstacle " + std::to_string(order[k]), {}, {}, palette(k), true};
    Series s{"smoothed, obstacle " + std::to_string(order[k]), {}, {}, palette(k)};
    std::size_t best = 0;
    bool any = false;
    for (std::size_t i = 0; i < id.size(); ++i) {
      if (static_cast<int>(id[i]) != order[k]) continue;
      r.x.push_back(j[i]);
      r.y.push_back(raw[i]);
      s.x.push_back(j[i]);
      s.y.push_back(smooth[i]);
      if (!any || smooth[i] < smooth[best]) best = i, any = true;
    }
    f.series.push_back(r);
    f.series.push_back(s);
    if (any) f.markers.push_back({j[best], smooth[best], palette(k), "cross", 12.0});
  }
  save_svg(f, out);
}

bool plot_data_file(const std::filesystem::path& data, const std::filesystem::path& out) {
  const auto t = CsvTable::read(data);
  if (t.has_column("train_mse")) loss_curve(data, out);
  else if (t.has_column("q50")) rmse_quantiles(data, out);
  else if (t.has_column("label") && t.has_column("lower")) learning_curves(data, out);
  else if (t.has_column("violations")) episode_trajectories(data, out);
  else if (t.has_column("kind") && t.has_column("trajectory")) prediction_overlay(data, out);
  else if (t.has_column("smoothed_distance")) distance_curve(data, out);
  else return false;
  return true;
}

}  // namespace doa::plot
