/*
 * Copyright 2026 The Steward Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "steward/plot.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace steward {

std::string antibiotic_slug(Antibiotic a) {
  std::string s = to_lower(antibiotic_name(a));
  for (char& c : s) {
    if (c == '/') c = '_';
  }
  return s;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr double kWidth = 520, kHeight = 560;
constexpr double kLeft = 60, kTop = 80, kPlot = 400;

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

struct Series {
  std::string representation;
  const CurvePoints* points;
  const MetricReport* report;
};

std::string render(const std::string& title, const std::string& x_label,
                   const std::string& y_label, const std::vector<Series>& series,
                   bool diagonal) {
  std::ostringstream svg;
  auto px = [](double x) { return fmt("%.3f", kLeft + x * kPlot); };
  auto py = [](double y) { return fmt("%.3f", kTop + (1 - y) * kPlot); };
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  double sub_y = 42;
  for (const auto& s : series) {
    if (!s.report) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %.4f [%.4f, %.4f]", s.representation.c_str(),
                  s.report->point, s.report->ci_low, s.report->ci_high);
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << sub_y
        << "\" text-anchor=\"middle\" font-size=\"11\">" << xml_escape(buf) << "</text>\n";
    sub_y += 13;
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlot << "\" height=\""
      << kPlot << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double t = i / 5.0;
    svg << "<text x=\"" << px(t) << "\" y=\"" << kTop + kPlot + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt("%.1f", t) << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(t)
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt("%.1f", t) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + kPlot / 2 << "\" y=\"" << kTop + kPlot + 34
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << kTop + kPlot / 2 << "\" text-anchor=\"middle\" font-size=\"12\""
      << " transform=\"rotate(-90 16 " << kTop + kPlot / 2 << ")\">" << xml_escape(y_label)
      << "</text>\n";
  if (diagonal) {
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(1) << "\" stroke=\"#999999\" stroke-dasharray=\"4 4\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : *series[i].points) {
      svg << (first ? "" : " ") << px(x) << ',' << py(y);
      first = false;
    }
    svg << "\"/>\n";
    const double ly = kTop + kPlot + 52 + 14 * static_cast<double>(i);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + 20
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + 26 << "\" y=\"" << ly << "\" font-size=\"11\">"
        << xml_escape(series[i].representation) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<CurveSet>& curves,
                                    const std::vector<MetricReport>& reports,
                                    const std::string& out_dir) {
  std::map<Antibiotic, std::vector<const CurveSet*>> by_antibiotic;
  for (const auto& c : curves) by_antibiotic[c.antibiotic].push_back(&c);
  auto find_report = [&](Antibiotic a, const std::string& rep, Metric m) -> const MetricReport* {
    for (const auto& r : reports) {
      if (r.antibiotic == a && r.representation == rep && r.metric == m) return &r;
    }
    return nullptr;
  };
  std::vector<std::string> written;
  if (by_antibiotic.empty()) return written;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  for (const auto& [a, sets] : by_antibiotic) {
    const std::string name(antibiotic_name(a));
    std::vector<Series> roc, pr;
    for (const CurveSet* c : sets) {
      roc.push_back({c->representation, &c->roc, find_report(a, c->representation, Metric::kRocAuc)});
      pr.push_back({c->representation, &c->pr, find_report(a, c->representation, Metric::kPrAuc)});
    }
    const std::string slug = antibiotic_slug(a);
    const std::pair<std::string, std::string> files[] = {
        {out_dir + "/roc_" + slug + ".svg",
         render(name + " ROC (AUROC)", "False positive rate", "True positive rate", roc, true)},
        {out_dir + "/pr_" + slug + ".svg",
         render(name + " precision-recall (AUPRC)", "Recall", "Precision", pr, false)},
    };
    for (const auto& [path, body] : files) {
      std::ofstream out(path, std::ios::binary);
      out << body;
      if (!out) throw IoError("cannot write " + path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace steward
