#include "hypermml/report.hpp"

#include "hypermml/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace hypermml {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::pair<double, double> subject_average(const std::vector<SubjectRow>& rows) {
  if (rows.empty()) return {0.0, 0.0};
  double acc = 0.0, f1 = 0.0;
  for (const auto& r : rows) {
    acc += r.accuracy;
    f1 += r.f1;
  }
  return {acc / static_cast<double>(rows.size()), f1 / static_cast<double>(rows.size())};
}

std::string format_subject_table(const std::vector<SubjectRow>& rows, int columns) {
  columns = std::max(1, columns);
  std::size_t w = 7;
  for (const auto& r : rows) w = std::max(w, r.subject.size());
  const auto per_col = (rows.size() + static_cast<std::size_t>(columns) - 1) / static_cast<std::size_t>(columns);
  std::ostringstream out;
  for (int c = 0; c < columns; ++c) {
    out << (c ? " | " : "") << pad("Subject", w) << " | " << pad("Acc", 6) << " | " << pad("F1", 6);
  }
  out << "\n";
  for (int c = 0; c < columns; ++c) {
    out << (c ? "-+-" : "") << std::string(w, '-') << "-+-" << std::string(6, '-') << "-+-" << std::string(6, '-');
  }
  out << "\n";
  for (std::size_t i = 0; i < per_col; ++i) {
    for (int c = 0; c < columns; ++c) {
      const std::size_t k = static_cast<std::size_t>(c) * per_col + i;
      if (c) out << " | ";
      if (k < rows.size()) {
        out << pad(rows[k].subject, w) << " | " << pad(pct(rows[k].accuracy), 6) << " | " << pad(pct(rows[k].f1), 6);
      } else {
        out << std::string(w, ' ') << " | " << std::string(6, ' ') << " | " << std::string(6, ' ');
      }
    }
    out << "\n";
  }
  const auto [acc, f1] = subject_average(rows);
  out << pad("Average", w) << " | " << pad(pct(acc), 6) << " | " << pad(pct(f1), 6) << "\n";
  return out.str();
}

std::string format_ablation_table(const AblationReport& report) {
  std::size_t w = 7;
  for (const auto& r : report.rows) w = std::max(w, r.variant.size());
  std::ostringstream out;
  out << pad("Variant", w) << " | " << pad("Acc", 6) << " | F1\n";
  out << std::string(w, '-') << "-+-" << std::string(6, '-') << "-+-" << std::string(6, '-') << "\n";
  for (const auto& r : report.rows) {
    out << pad(r.variant, w) << " | " << pad(pct(r.accuracy), 6) << " | " << pct(r.f1) << "\n";
  }
  return out.str();
}

std::string confusion_svg(const EvalReport& report) {
  const auto& cm = report.overall.confusion;
  const int k = static_cast<int>(cm.size());
  if (k == 0) throw ArgumentError("confusion_svg: empty confusion matrix");
  const int cell = 64, left = 110, top = 40;
  const int width = left + k * cell + 20, height = top + k * cell + 70;
  auto name = [&](int i) {
    return static_cast<std::size_t>(i) < report.class_names.size() ? report.class_names[static_cast<std::size_t>(i)]
                                                                     : std::to_string(i);
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"20\">Confusion matrix (" << escape_xml(report.dataset) << ")</text>\n";
  for (int t = 0; t < k; ++t) {
    long row_total = 0;
    for (int p = 0; p < k; ++p) row_total += cm[t][p];
    for (int p = 0; p < k; ++p) {
      const double rate = row_total ? static_cast<double>(cm[t][p]) / static_cast<double>(row_total) : 0.0;
      const int shade = static_cast<int>(255.0 * (1.0 - rate));
      const int x = left + p * cell, y = top + t * cell;
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
        << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n";
      s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
        << (rate > 0.5 ? "white" : "black") << "\">" << cm[t][p] << "</text>\n";
    }
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + t * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
      << escape_xml(name(t)) << "</text>\n";
    s << "<text x=\"" << left + t * cell + cell / 2 << "\" y=\"" << top + k * cell + 16
      << "\" text-anchor=\"middle\">" << escape_xml(name(t)) << "</text>\n";
  }
  s << "<text x=\"" << left + k * cell / 2 << "\" y=\"" << top + k * cell + 40
    << "\" text-anchor=\"middle\">Predicted</text>\n";
  s << "<text x=\"14\" y=\"" << top + k * cell / 2 << "\" transform=\"rotate(-90 14," << top + k * cell / 2
    << ")\" text-anchor=\"middle\">True</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace hypermml
