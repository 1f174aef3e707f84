#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "synprobe/stats.hpp"

namespace synprobe {

// Run metadata stamped into every emitted artifact.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;

  // "# config_hash=<hash> seed=<seed>", the first line of every CSV.
  std::string csv_comment() const;
  void stamp(nlohmann::ordered_json& j) const;
  nlohmann::ordered_json object() const;
};

struct ScatterPanel {
  std::string title;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::string> labels;
  std::string annotation;
  // Fitted line y = intercept + slope * x, drawn when present.
  std::optional<double> intercept;
  std::optional<double> slope;
};

// "adj R2 = <v>, p(beta1) = <v>" built with format_stat from the simple fit.
std::string panel_annotation(const RegressionRow& row);

// One panel per fitted (status ok) row of the table.
std::vector<ScatterPanel> panels_from_table(const RegressionTable& table);

// Static small-multiples SVG, one circle per point.
std::string render_scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                               std::span<const ScatterPanel> panels, const Provenance& provenance);

std::string xml_escape(const std::string& s);

}  // namespace synprobe
