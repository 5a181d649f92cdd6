#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace doa::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;
  bool dashed = false;
  bool markers = false;
};

struct Band {
  std::vector<double> x, lower, upper;
  std::string color;
};

struct Marker {
  double x = 0.0, y = 0.0;
  std::string color = "#000000";
  std::string shape = "square";  // square | circle | cross
  double size = 6.0;
};

struct Figure {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  std::vector<Band> bands;
  std::vector<Marker> markers;
  bool equal_aspect = false;
  int width = 720, height = 480;
};

std::string render_svg(const Figure& fig);
void save_svg(const Figure& fig, const std::filesystem::path& path);

/// Color for the k-th series of a figure.
std::string palette(std::size_t k);

// Figures built from the data files written by the harness. Each takes the
// data file and writes the SVG to `out`.
/// epoch, train_mse, validation_mse
void loss_curve(const std::filesystem::path& data, const std::filesystem::path& out);
/// horizon, q25, q50, q75, q90, rmse
void rmse_quantiles(const std::filesystem::path& data, const std::filesystem::path& out);
/// label, env_step, mean, lower, upper, runs
void learning_curves(const std::filesystem::path& data, const std::filesystem::path& out);
/// episode trace with agent and per-obstacle columns
void episode_trajectories(const std::filesystem::path& data, const std::filesystem::path& out);
/// trajectory, kind, step, x, y  (kind: observed | actual | predicted)
void prediction_overlay(const std::filesystem::path& data, const std::filesystem::path& out);
/// obstacle_id, j, raw_distance, smoothed_distance
void distance_curve(const std::filesystem::path& data, const std::filesystem::path& out);

/// Chooses the figure from the header of `data`; returns false when unknown.
bool plot_data_file(const std::filesystem::path& data, const std::filesystem::path& out);

}  // namespace doa::plot
