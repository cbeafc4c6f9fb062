#include "report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace evoprune {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <class T>
T parse_field(std::string_view field, std::size_t line_no, const char* name) {
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  require(ec == std::errc{} && ptr == end && !field.empty(), ErrorCode::parse,
          "line " + std::to_string(line_no) + ": invalid " + name + " value '" +
              std::string(field) + "'");
  return value;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

CurvePoint to_curve_point(const GenerationRecord& r) {
  return {r.generation, r.elite.fitness, r.elite.error, r.elite.computation, r.elite.sparsity,
          r.mean_fitness};
}

std::string format_curve_row(const CurvePoint& p) {
  return std::to_string(p.generation) + ',' + fixed6(p.fitness) + ',' + fixed6(p.error) + ',' +
         fixed6(p.computation) + ',' + fixed6(p.sparsity) + ',' + fixed6(p.mean_fitness);
}

CurvesWriter::CurvesWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::trunc) {
  if (!out_) fail(ErrorCode::io, "cannot write " + path.string());
  out_ << curves_header << '\n';
  out_.flush();
}

void CurvesWriter::append(const CurvePoint& point) {
  out_ << format_curve_row(point) << '\n';
  out_.flush();
  if (!out_) fail(ErrorCode::io, "failed writing " + path_.string());
}

std::vector<CurvePoint> parse_curves(std::string_view text) {
  std::vector<CurvePoint> points;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim_cr(text.substr(pos, nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!saw_header) {
      require(line == curves_header, ErrorCode::parse,
              "line 1: expected header '" + std::string(curves_header) + "'");
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    require(fields.size() == 6, ErrorCode::parse,
            "line " + std::to_string(line_no) + ": expected 6 fields, found " +
                std::to_string(fields.size()));
    CurvePoint p;
    p.generation = parse_field<std::size_t>(fields[0], line_no, "generation");
    p.fitness = parse_field<double>(fields[1], line_no, "elite_f");
    p.error = parse_field<double>(fields[2], line_no, "elite_e");
    p.computation = parse_field<double>(fields[3], line_no, "elite_c");
    p.sparsity = parse_field<double>(fields[4], line_no, "elite_s");
    p.mean_fitness = parse_field<double>(fields[5], line_no, "mean_f");
    points.push_back(p);
  }
  require(saw_header, ErrorCode::parse, "line 1: missing header");
  require(!points.empty(), ErrorCode::parse, "curves file has a header but no data rows");
  return points;
}

std::vector<CurvePoint> read_curves(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_curves(buffer.str());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

std::string render_curves_svg(const std::vector<CurvePoint>& points, const std::string& title) {
  require(!points.empty(), ErrorCode::invalid_argument, "nothing to plot");
  constexpr double width = 720, height = 440;
  constexpr double left = 70, right = 170, top = 50, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  const double g_min = static_cast<double>(points.front().generation);
  const double g_max = static_cast<double>(points.back().generation);
  const double span = std::max(g_max - g_min, 1.0);
  auto x_of = [&](double g) {
    return points.size() == 1 ? left + plot_w / 2 : left + (g - g_min) / span * plot_w;
  };
  auto y_of = [&](double v) { return top + (1.0 - std::clamp(v, 0.0, 1.0)) * plot_h; };

  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << escape_xml(title) << "</text>\n";

  // Grid and y ticks.
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    svg << "<line x1=\"" << left << "\" y1=\"" << y_of(v) << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << y_of(v) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y_of(v) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << v
        << "</text>\n";
  }
  // x ticks
  const std::size_t ticks = std::min<std::size_t>(points.size(), 6);
  for (std::size_t i = 0; i < ticks; ++i) {
    const double g = ticks == 1 ? g_min : g_min + span * static_cast<double>(i) / static_cast<double>(ticks - 1);
    const auto label = static_cast<long long>(g + 0.5);
    svg << "<text x=\"" << x_of(g) << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << label
        << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">generation</text>\n";
  svg << "<text transform=\"translate(20," << top + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">elite indicator</text>\n";

  struct Series {
    const char* name;
    const char* color;
    double CurvePoint::*field;
  };
  const Series series[] = {
      {"fitness", "#1f77b4", &CurvePoint::fitness},
      {"error", "#ff7f0e", &CurvePoint::error},
      {"sparsity", "#2ca02c", &CurvePoint::sparsity},
      {"FLOPs", "#d62728", &CurvePoint::computation},
  };
  int row = 0;
  for (const auto& s : series) {
    if (points.size() == 1) {
      svg << "<circle cx=\"" << x_of(g_min) << "\" cy=\"" << y_of(points[0].*s.field)
          << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
    } else {
      svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
      for (const auto& p : points)
        svg << x_of(static_cast<double>(p.generation)) << ',' << y_of(p.*s.field) << ' ';
      svg << "\"/>\n";
    }
    const double ly = top + 14 + row * 20;
    svg << "<line x1=\"" << left + plot_w + 15 << "\" y1=\"" << ly << "\" x2=\""
        << left + plot_w + 40 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + plot_w + 46 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    ++row;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_curves_svg(const std::filesystem::path& csv, const std::filesystem::path& svg,
                      const std::string& title) {
  const auto points = read_curves(csv);
  std::ofstream out(svg, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + svg.string());
  out << render_curves_svg(points, title);
  if (!out) fail(ErrorCode::io, "failed writing " + svg.string());
}

std::string format_summary_row(const SummaryRow& r) {
  return fixed6(r.weights.error) + ',' + fixed6(r.weights.computation) + ',' +
         fixed6(r.weights.sparsity) + ',' + fixed6(r.error) + ',' + fixed6(r.computation) + ',' +
         fixed6(r.sparsity) + ',' + fixed6(r.accuracy_change);
}

void write_summary(const std::filesystem::path& path, const SummaryRow& row) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << summary_header << '\n' << format_summary_row(row) << '\n';
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace evoprune
