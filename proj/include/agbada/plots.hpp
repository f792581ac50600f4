#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "agbada/data/index.hpp"
#include "agbada/errors.hpp"
#include "agbada/eval.hpp"
#include "agbada/train.hpp"

namespace agbada {

// Standalone SVG renderings of the training curves, class distribution and
// confusion matrix. Data-bearing elements carry data-* attributes holding the
// exact values they draw.

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

struct Series {
  std::string name;
  std::string color;
  std::vector<double> values;
};

inline std::string line_chart(const std::string& title, const std::vector<int>& epochs, const std::vector<Series>& series) {
  constexpr int W = 640, H = 400, L = 60, R = 130, T = 40, B = 50;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& s : series)
    for (double v : s.values) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  lo = std::min(lo, 0.0);
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const int e0 = epochs.front(), e1 = epochs.back();
  auto px = [&](int e) { return e1 == e0 ? (L + (W - R)) / 2.0 : L + (W - R - L) * double(e - e0) / double(e1 - e0); };
  auto py = [&](double v) { return H - B - (H - B - T) * (v - lo) / (hi - lo); };

  std::ostringstream os;
  os << svg_open(W, H);
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">epoch</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << num(v).substr(0, 5)
       << "</text>\n";
  }
  os << "<text x=\"" << num(px(e0)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << e0 << "</text>\n";
  if (e1 != e0)
    os << "<text x=\"" << num(px(e1)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << e1 << "</text>\n";
  int legend_y = T + 10;
  for (const auto& s : series) {
    os << "<g class=\"series\" data-series=\"" << s.name << "\">\n";
    if (s.values.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.values.size(); ++i) os << (i ? " " : "") << num(px(epochs[i])) << "," << num(py(s.values[i]));
      os << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      os << "<circle class=\"point\" data-epoch=\"" << epochs[i] << "\" data-value=\"" << shortest(s.values[i])
         << "\" cx=\"" << num(px(epochs[i])) << "\" cy=\"" << num(py(s.values[i])) << "\" r=\"3\" fill=\"" << s.color
         << "\"/>\n";
    }
    os << "</g>\n";
    os << "<rect x=\"" << W - R + 12 << "\" y=\"" << legend_y - 9 << "\" width=\"12\" height=\"12\" fill=\"" << s.color
       << "\"/><text x=\"" << W - R + 30 << "\" y=\"" << legend_y + 1 << "\">" << s.name << "</text>\n";
    legend_y += 20;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace detail

struct HistoryPlots {
  std::string loss;
  std::string accuracy;
};

inline HistoryPlots render_history_plots(const std::vector<EpochRecord>& records) {
  if (records.empty()) throw ValidationError("cannot plot an empty history");
  std::vector<int> epochs;
  detail::Series tl{"train_loss", "#1f77b4", {}}, vl{"val_loss", "#ff7f0e", {}};
  detail::Series ta{"train_acc", "#1f77b4", {}}, va{"val_acc", "#ff7f0e", {}};
  for (const auto& r : records) {
    epochs.push_back(r.epoch);
    tl.values.push_back(r.train_loss);
    vl.values.push_back(r.val_loss);
    ta.values.push_back(r.train_acc);
    va.values.push_back(r.val_acc);
  }
  return {detail::line_chart("Loss", epochs, {tl, vl}), detail::line_chart("Accuracy", epochs, {ta, va})};
}

// One sector per class; sector angle = fraction * 360 degrees.
inline std::string render_distribution_pie(const std::map<std::string, data::ClassShare>& dist) {
  if (dist.empty()) throw ValidationError("cannot plot an empty distribution");
  constexpr int W = 420, H = 340;
  constexpr double cx = 170, cy = 180, r = 130;
  static const char* colors[] = {"#e377c2", "#1f77b4", "#2ca02c", "#ff7f0e"};
  std::ostringstream os;
  os << detail::svg_open(W, H);
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Gender distribution</text>\n";
  double start = 0.0;
  std::size_t i = 0;
  for (const auto& [name, share] : dist) {
    const double angle = share.fraction * 360.0;
    const char* color = colors[i % 4];
    os << "<g class=\"sector\" data-label=\"" << name << "\" data-count=\"" << share.count << "\" data-angle=\""
       << detail::shortest(angle) << "\">";
    if (angle >= 360.0 - 1e-9) {
      os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\"" << color << "\"/>";
    } else if (angle > 0.0) {
      const double a0 = (start - 90.0) * std::numbers::pi / 180.0;
      const double a1 = (start + angle - 90.0) * std::numbers::pi / 180.0;
      os << "<path d=\"M " << cx << " " << cy << " L " << detail::num(cx + r * std::cos(a0)) << " "
         << detail::num(cy + r * std::sin(a0)) << " A " << r << " " << r << " 0 " << (angle > 180.0 ? 1 : 0) << " 1 "
         << detail::num(cx + r * std::cos(a1)) << " " << detail::num(cy + r * std::sin(a1)) << " Z\" fill=\"" << color
         << "\" stroke=\"white\"/>";
    }
    os << "</g>\n";
    os << "<rect x=\"315\" y=\"" << 80 + 22 * i << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/><text x=\"332\" y=\""
       << 91 + 22 * i << "\">" << name << " " << detail::num(share.fraction * 100.0).substr(0, 4) << "%</text>\n";
    start += angle;
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string render_confusion_svg(const ConfusionMatrix& cm) {
  constexpr int W = 380, H = 340, cell = 110, ox = 110, oy = 70;
  const double peak = static_cast<double>(std::max({cm.counts[0][0], cm.counts[0][1], cm.counts[1][0], cm.counts[1][1],
                                                    std::size_t{1}}));
  std::ostringstream os;
  os << detail::svg_open(W, H);
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Confusion matrix</text>\n";
  os << "<text x=\"" << ox + cell << "\" y=\"" << oy - 24 << "\" text-anchor=\"middle\">predicted</text>\n";
  os << "<text x=\"20\" y=\"" << oy + cell << "\" transform=\"rotate(-90 20 " << oy + cell
     << ")\" text-anchor=\"middle\">true</text>\n";
  for (std::size_t t = 0; t < 2; ++t) {
    os << "<text x=\"" << ox - 8 << "\" y=\"" << oy + cell * t + cell / 2 + 4 << "\" text-anchor=\"end\">"
       << cm.class_names[t] << "</text>\n";
    os << "<text x=\"" << ox + cell * t + cell / 2 << "\" y=\"" << oy - 6 << "\" text-anchor=\"middle\">"
       << cm.class_names[t] << "</text>\n";
  }
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t p = 0; p < 2; ++p) {
      const double shade = static_cast<double>(cm.counts[t][p]) / peak;
      const int level = static_cast<int>(std::lround(235 - 180 * shade));
      const std::size_t x = ox + cell * p, y = oy + cell * t;
      os << "<g class=\"cell\" data-true=\"" << t << "\" data-pred=\"" << p << "\" data-count=\"" << cm.counts[t][p]
         << "\"><rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
         << level << "," << level << ",255)\" stroke=\"white\"/><text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 6
         << "\" text-anchor=\"middle\" font-size=\"18\">" << cm.counts[t][p] << "</text></g>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace agbada
