#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cpath/errors.hpp"
#include "cpath/eval.hpp"

namespace cpath::eval {

namespace {

constexpr const char* kHeader = "init,mode,percent,run,split_seed,metric_name,value";

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) throw ParseError(where + ": '" + s + "' is not a number");
  return v;
}

std::string escape_xml(const std::string& s) {
  std::string out;
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

}  // namespace

void append_aggregates(std::vector<ResultRow>& rows, std::size_t first, std::size_t last) {
  if (first >= last || last > rows.size()) throw ContractError("aggregate range is empty or out of bounds");
  const ResultRow proto = rows[first];
  const double n = static_cast<double>(last - first);
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += rows[i].value;
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i = first; i < last; ++i) ss += (rows[i].value - mean) * (rows[i].value - mean);
  const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  ResultRow m = proto, s = proto;
  m.run = "mean";
  m.value = mean;
  s.run = "std";
  s.value = sd;
  rows.push_back(m);
  rows.push_back(s);
}

std::vector<ResultRow> sweep(const std::vector<NamedEncoder>& inits, const LabeledSet& set,
                             const std::vector<double>& percents, const EvalProtocol& protocol) {
  if (inits.empty() || percents.empty()) throw ContractError("sweep grid is empty");
  std::vector<ResultRow> rows;
  for (const auto& init : inits) {
    if (!init.model) throw ContractError("sweep init '" + init.name + "' has no model");
    for (double percent : percents) {
      EvalProtocol p = protocol;
      p.label_percent = percent;
      const std::size_t first = rows.size();
      for (int run = 0; run < p.repeats; ++run) {
        const EvalReport r = evaluate(*init.model, set, p, run);
        rows.push_back({init.name, p.mode, percent, std::to_string(run), p.seed, r.metric_name, r.test_metric});
      }
      append_aggregates(rows, first, rows.size());
    }
  }
  return rows;
}

std::string format_results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows) {
    if (r.init.find(',') != std::string::npos) throw ContractError("init name may not contain a comma");
    out += r.init + "," + to_string(r.mode) + "," + fmt("%g", r.percent) + "," + r.run + "," +
           std::to_string(r.split_seed) + "," + r.metric_name + "," + fmt("%.9g", r.value) + "\n";
  }
  return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_results_csv(rows);
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw ParseError("row 1: expected header '" + std::string(kHeader) + "'");
  std::vector<ResultRow> rows;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "row " + std::to_string(row_no);
    const auto f = split_fields(line);
    if (f.size() != 7) throw ParseError(where + ": expected 7 fields, found " + std::to_string(f.size()));
    ResultRow r;
    r.init = f[0];
    try {
      r.mode = parse_mode(f[1]);
    } catch (const ConfigError& e) {
      throw ParseError(where + ": " + e.what());
    }
    r.percent = parse_double(f[2], where);
    r.run = f[3];
    if (r.run.empty()) throw ParseError(where + ": empty run field");
    const double seed = parse_double(f[4], where);
    if (seed < 0 || seed != std::floor(seed)) throw ParseError(where + ": split_seed must be a non-negative integer");
    r.split_seed = std::stoull(f[4]);
    r.metric_name = f[5];
    r.value = parse_double(f[6], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_results_csv(ss.str());
}

std::string render_sweep_svg(const std::vector<ResultRow>& rows) {
  struct Point {
    double mean = 0.0;
    double sd = 0.0;
    bool has_mean = false;
  };
  // series key -> percent -> aggregate
  std::map<std::string, std::map<double, Point>> series;
  std::set<double> xs;
  std::string metric;
  for (const auto& r : rows) {
    if (r.run != "mean" && r.run != "std") continue;
    auto& pt = series[r.init + " (" + to_string(r.mode) + ")"][r.percent];
    if (r.run == "mean") {
      pt.mean = r.value;
      pt.has_mean = true;
    } else {
      pt.sd = r.value;
    }
    xs.insert(r.percent);
    metric = r.metric_name;
  }
  const double width = 640, height = 400, left = 70, right = 180, top = 30, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& [name, pts] : series)
    for (const auto& [x, p] : pts) {
      if (!p.has_mean) continue;
      if (first) lo = p.mean - p.sd, hi = p.mean + p.sd, first = false;
      lo = std::min(lo, p.mean - p.sd);
      hi = std::max(hi, p.mean + p.sd);
    }
  if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const std::vector<double> xv(xs.begin(), xs.end());
  auto x_of = [&](double percent) {
    const auto i = static_cast<double>(std::lower_bound(xv.begin(), xv.end(), percent) - xv.begin());
    return xv.size() <= 1 ? left + plot_w / 2 : left + plot_w * i / static_cast<double>(xv.size() - 1);
  };
  auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n";
  for (double x : xv) {
    svg << "<text x=\"" << fmt("%.2f", x_of(x)) << "\" y=\"" << top + plot_h + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << fmt("%g", x) << "%</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    svg << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.2f", y_of(v) + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt("%.3f", v) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"13\" text-anchor=\"middle\">labeled data (%)</text>\n";
  svg << "<text x=\"15\" y=\"" << top + plot_h / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << top + plot_h / 2 << ")\">" << escape_xml(metric.empty() ? "metric" : metric) << "</text>\n";
  std::size_t si = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[si % 6];
    std::string path;
    for (const auto& [x, p] : pts) {
      if (!p.has_mean) continue;
      path += (path.empty() ? "" : " ") + fmt("%.2f", x_of(x)) + "," + fmt("%.2f", y_of(p.mean));
    }
    if (!path.empty())
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
    for (const auto& [x, p] : pts) {
      if (!p.has_mean) continue;
      const std::string cx = fmt("%.2f", x_of(x));
      svg << "<line x1=\"" << cx << "\" y1=\"" << fmt("%.2f", y_of(p.mean - p.sd)) << "\" x2=\"" << cx << "\" y2=\""
          << fmt("%.2f", y_of(p.mean + p.sd)) << "\" stroke=\"" << color << "\"/>\n";
      svg << "<circle cx=\"" << cx << "\" cy=\"" << fmt("%.2f", y_of(p.mean)) << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = top + 15 + 20.0 * static_cast<double>(si);
    svg << "<rect x=\"" << left + plot_w + 15 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << color
        << "\"/>\n";
    svg << "<text x=\"" << left + plot_w + 30 << "\" y=\"" << ly << "\" font-size=\"12\">" << escape_xml(name)
        << "</text>\n";
    ++si;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cpath::eval
