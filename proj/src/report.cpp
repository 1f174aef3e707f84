#include "synprobe/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace synprobe {

std::string Provenance::csv_comment() const {
  return "# config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

void Provenance::stamp(nlohmann::ordered_json& j) const {
  j["config_hash"] = config_hash;
  j["seed"] = seed;
}

nlohmann::ordered_json Provenance::object() const {
  nlohmann::ordered_json j;
  stamp(j);
  return j;
}

std::string panel_annotation(const RegressionRow& row) {
  if (!row.simple) return "insufficient data";
  return "adj R² = " + format_stat(row.simple->adj_r2) + ", p(β1) = " + format_stat(row.simple_p);
}

std::vector<ScatterPanel> panels_from_table(const RegressionTable& table) {
  std::vector<ScatterPanel> out;
  for (const auto& row : table.rows) {
    if (row.status != "ok" || !row.simple) continue;
    ScatterPanel p;
    p.title = row.cell;
    p.x = row.syntax_x;
    p.y = row.y;
    p.labels = row.models;
    p.annotation = panel_annotation(row);
    p.intercept = row.simple->coefficients(0);
    p.slope = row.simple->coefficients(1);
    out.push_back(std::move(p));
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::pair<double, double> padded_range(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 1.0};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double a = *lo, b = *hi;
  if (b - a < 1e-12) {
    a -= 0.5;
    b += 0.5;
  }
  const double pad = 0.05 * (b - a);
  return {a - pad, b + pad};
}

}  // namespace

std::string render_scatter_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                               std::span<const ScatterPanel> panels, const Provenance& provenance) {
  constexpr double kPanelW = 280, kPanelH = 240, kMargin = 45, kHeader = 40;
  const std::size_t cols = std::max<std::size_t>(1, std::min<std::size_t>(4, panels.size()));
  const std::size_t rows = std::max<std::size_t>(1, (panels.size() + cols - 1) / cols);
  const double width = double(cols) * kPanelW;
  const double height = kHeader + double(rows) * kPanelH;

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<!-- config_hash=" << provenance.config_hash << " seed=" << provenance.seed << " -->\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" font-family=\"sans-serif\">\n";
  s << "<metadata>config_hash=" << provenance.config_hash << " seed=" << provenance.seed << "</metadata>\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
    << "</text>\n";
  if (panels.empty()) {
    s << "<text x=\"" << num(width / 2) << "\" y=\"" << num(kHeader + 40)
      << "\" text-anchor=\"middle\" font-size=\"12\">no fitted cells</text>\n";
  }

  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    const double ox = double(k % cols) * kPanelW;
    const double oy = kHeader + double(k / cols) * kPanelH;
    const double pw = kPanelW - kMargin - 15;
    const double ph = kPanelH - kMargin - 40;
    const double px = ox + kMargin;
    const double py = oy + 30;
    const auto [x0, x1] = padded_range(p.x);
    const auto [y0, y1] = padded_range(p.y);
    auto sx = [&](double x) { return px + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return py + ph - (y - y0) / (y1 - y0) * ph; };

    s << "<g class=\"panel\">\n";
    s << "<text x=\"" << num(ox + kPanelW / 2) << "\" y=\"" << num(oy + 14)
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(p.title) << "</text>\n";
    s << "<text class=\"annotation\" x=\"" << num(ox + kPanelW / 2) << "\" y=\"" << num(oy + 26)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << xml_escape(p.annotation) << "</text>\n";
    s << "<rect x=\"" << num(px) << "\" y=\"" << num(py) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
    s << "<text x=\"" << num(px) << "\" y=\"" << num(py + ph + 12) << "\" font-size=\"9\">" << num(x0) << "</text>\n";
    s << "<text x=\"" << num(px + pw) << "\" y=\"" << num(py + ph + 12) << "\" font-size=\"9\" text-anchor=\"end\">"
      << num(x1) << "</text>\n";
    s << "<text x=\"" << num(px - 3) << "\" y=\"" << num(py + ph) << "\" font-size=\"9\" text-anchor=\"end\">"
      << num(y0) << "</text>\n";
    s << "<text x=\"" << num(px - 3) << "\" y=\"" << num(py + 8) << "\" font-size=\"9\" text-anchor=\"end\">"
      << num(y1) << "</text>\n";
    s << "<text x=\"" << num(px + pw / 2) << "\" y=\"" << num(py + ph + 26)
      << "\" text-anchor=\"middle\" font-size=\"10\">" << xml_escape(x_label) << "</text>\n";
    s << "<text x=\"" << num(ox + 10) << "\" y=\"" << num(py + ph / 2) << "\" font-size=\"10\" transform=\"rotate(-90 "
      << num(ox + 10) << ' ' << num(py + ph / 2) << ")\" text-anchor=\"middle\">" << xml_escape(y_label)
      << "</text>\n";
    if (p.intercept && p.slope) {
      const double ya = *p.intercept + *p.slope * x0;
      const double yb = *p.intercept + *p.slope * x1;
      s << "<line x1=\"" << num(sx(x0)) << "\" y1=\"" << num(std::clamp(sy(ya), py, py + ph)) << "\" x2=\""
        << num(sx(x1)) << "\" y2=\"" << num(std::clamp(sy(yb), py, py + ph))
        << "\" stroke=\"#c33\" stroke-width=\"1.5\"/>\n";
    }
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      s << "<circle cx=\"" << num(sx(p.x[i])) << "\" cy=\"" << num(sy(p.y[i])) << "\" r=\"3.5\" fill=\"#3366aa\">";
      if (i < p.labels.size()) s << "<title>" << xml_escape(p.labels[i]) << "</title>";
      s << "</circle>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace synprobe
