#include "metsize/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "metsize/error.hpp"
#include "metsize/serialization.hpp"

namespace metsize {

namespace {

struct Cell {
  std::string text;
  std::size_t line = 0;    // 1-based file line
  std::size_t column = 0;  // 1-based field within the line
};

using Grid = std::vector<std::vector<Cell>>;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
    out = out.substr(1, out.size() - 2);
  return out;
}

std::string where(const Cell& c) {
  return "line " + std::to_string(c.line) + ", column " +
         std::to_string(c.column);
}

Grid read_grid(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  Grid grid;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<Cell> row;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(delimiter, start);
      const auto field = std::string_view(line).substr(
          start, pos == std::string::npos ? std::string::npos : pos - start);
      row.push_back({trim(field), line_no, row.size() + 1});
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (grid.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      fail(ErrorKind::Parse, path.string() + ": line " +
                                 std::to_string(line_no) + " has " +
                                 std::to_string(row.size()) +
                                 " fields, expected " + std::to_string(width));
    }
    grid.push_back(std::move(row));
  }
  if (grid.empty()) fail(ErrorKind::Parse, path.string() + ": file is empty");
  return grid;
}

Grid transpose(const Grid& g) {
  Grid t(g.front().size(), std::vector<Cell>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g[i].size(); ++j) t[j][i] = g[i][j];
  return t;
}

double parse_number(const Cell& c, const std::filesystem::path& path) {
  double v = 0.0;
  const char* b = c.text.data();
  const char* e = b + c.text.size();
  if (!c.text.empty() && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (c.text.empty() || ec != std::errc() || ptr != e || !std::isfinite(v))
    fail(ErrorKind::Parse, path.string() + ": non-numeric value '" + c.text +
                               "' at " + where(c));
  return v;
}

std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string parse_key(const std::string& s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(c));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string s = parse_key(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorKind::Validation, "schema " + key + ": expected true or false");
}

}  // namespace

void validate(const PilotFileSchema& schema) {
  if (schema.label_column.empty())
    fail(ErrorKind::Validation, "schema label_column is empty");
  for (const auto& c : schema.covariate_columns)
    if (c == schema.label_column)
      fail(ErrorKind::Validation,
           "schema label_column '" + c + "' is also listed as a covariate");
  if (schema.id_column && *schema.id_column == schema.label_column)
    fail(ErrorKind::Validation, "schema id_column equals label_column");
}

PilotFileSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open schema '" + path.string() + "'");
  PilotFileSchema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Parse, path.string() + ": line " +
                                 std::to_string(line_no) +
                                 " is not key=value");
    const std::string key = parse_key(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "label_column") {
      schema.label_column = value;
    } else if (key == "covariate_columns") {
      schema.covariate_columns.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!trim(item).empty()) schema.covariate_columns.push_back(trim(item));
    } else if (key == "id_column") {
      schema.id_column = value.empty() ? std::nullopt
                                       : std::optional<std::string>(value);
    } else if (key == "delimiter") {
      if (parse_key(value) == "tab") schema.delimiter = '\t';
      else if (value.size() == 1) schema.delimiter = value[0];
      else fail(ErrorKind::Validation, "schema delimiter must be one character or 'tab'");
    } else if (key == "has_header") {
      schema.has_header = parse_bool(key, value);
    } else if (key == "orientation") {
      const std::string v = parse_key(value);
      if (v == "rows" || v == "samples_as_rows") schema.orientation = Orientation::SamplesAsRows;
      else if (v == "columns" || v == "samples_as_columns") schema.orientation = Orientation::SamplesAsColumns;
      else fail(ErrorKind::Validation, "schema orientation must be rows or columns");
    } else {
      fail(ErrorKind::Validation, path.string() + ": unknown schema key '" + key + "'");
    }
  }
  validate(schema);
  return schema;
}

PilotMatrix load_pilot_csv(const std::filesystem::path& path,
                           const PilotFileSchema& schema) {
  validate(schema);
  Grid grid = read_grid(path, schema.delimiter);
  if (schema.orientation == Orientation::SamplesAsColumns) grid = transpose(grid);

  const std::size_t width = grid.front().size();
  std::vector<std::string> names(width);
  std::size_t first_row = 0;
  if (schema.has_header) {
    for (std::size_t j = 0; j < width; ++j) names[j] = grid.front()[j].text;
    first_row = 1;
  } else {
    for (std::size_t j = 0; j < width; ++j) names[j] = std::to_string(j);
  }

  auto resolve = [&](const std::string& ref, const char* role) {
    const auto it = std::find(names.begin(), names.end(), ref);
    if (it == names.end())
      fail(ErrorKind::Validation, path.string() + ": " + role + " column '" +
                                      ref + "' not found");
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t label_col = resolve(schema.label_column, "label");
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariate_columns)
    cov_cols.push_back(resolve(c, "covariate"));
  std::vector<char> skip(width, 0);
  skip[label_col] = 1;
  for (auto c : cov_cols) skip[c] = 1;
  if (schema.id_column) skip[resolve(*schema.id_column, "id")] = 1;
  std::vector<std::size_t> value_cols;
  for (std::size_t j = 0; j < width; ++j)
    if (!skip[j]) value_cols.push_back(j);

  const std::size_t n = grid.size() - first_row;
  if (n == 0) fail(ErrorKind::Parse, path.string() + ": no sample rows");
  if (value_cols.empty())
    fail(ErrorKind::Parse, path.string() + ": no intensity columns");

  PilotMatrix pilot;
  pilot.provenance = Provenance::Experimental;
  pilot.data.resize(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(value_cols.size()));
  if (!cov_cols.empty())
    pilot.covariates = Eigen::MatrixXd(static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(cov_cols.size()));

  std::vector<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = grid[first_row + i];
    const Cell& label = row[label_col];
    if (label.text.empty())
      fail(ErrorKind::Parse, path.string() + ": empty group label at " + where(label));
    auto it = std::find(seen.begin(), seen.end(), label.text);
    if (it == seen.end()) {
      seen.push_back(label.text);
      it = seen.end() - 1;
    }
    pilot.group.push_back(static_cast<int>(it - seen.begin()) + 1);
    for (std::size_t k = 0; k < cov_cols.size(); ++k)
      (*pilot.covariates)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          parse_number(row[cov_cols[k]], path);
    for (std::size_t k = 0; k < value_cols.size(); ++k)
      pilot.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          parse_number(row[value_cols[k]], path);
  }

  if (seen.size() != 2) {
    std::string list;
    for (const auto& s : seen) list += (list.empty() ? "" : ", ") + s;
    fail(ErrorKind::Validation, path.string() + ": expected exactly 2 group labels, found " +
                                    std::to_string(seen.size()) + " (" + list + ")");
  }
  const int n1 = pilot.count(1), n2 = pilot.count(2);
  if (n1 < 2 || n2 < 2)
    fail(ErrorKind::Validation,
         path.string() + ": each group needs at least 2 samples (" + seen[0] +
             ": " + std::to_string(n1) + ", " + seen[1] + ": " +
             std::to_string(n2) + ")");
  validate(pilot);
  return pilot;
}

void write_pilot_csv(const PilotMatrix& pilot, const std::filesystem::path& path,
                     const PilotFileSchema& schema) {
  const char d = schema.delimiter;
  const auto c = pilot.covariates ? pilot.covariates->cols() : 0;
  std::ostringstream os;
  if (schema.has_header) {
    os << schema.label_column;
    for (Eigen::Index k = 0; k < c; ++k)
      os << d << (static_cast<std::size_t>(k) < schema.covariate_columns.size()
                      ? schema.covariate_columns[static_cast<std::size_t>(k)]
                      : "cov" + std::to_string(k + 1));
    for (Eigen::Index j = 0; j < pilot.p(); ++j) os << d << "bin" << (j + 1);
    os << '\n';
  }
  for (Eigen::Index i = 0; i < pilot.n(); ++i) {
    os << pilot.group[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < c; ++k) os << d << shortest((*pilot.covariates)(i, k));
    for (Eigen::Index j = 0; j < pilot.p(); ++j) os << d << shortest(pilot.data(i, j));
    os << '\n';
  }
  write_text(path, os.str());
}

std::string curve_csv(const std::vector<FdrCurvePoint>& curve) {
  std::ostringstream os;
  os << kCurveCsvHeader << '\n';
  for (const auto& pt : curve)
    os << pt.n << ',' << pt.n1 << ',' << pt.n2 << ',' << shortest(pt.fdr10)
       << ',' << shortest(pt.fdr50) << ',' << shortest(pt.fdr90) << '\n';
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_result(const SampleSizeResult& result,
                  const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path) {
  write_text(json_path, dump(to_json(result)));
  write_text(csv_path, curve_csv(result.curve));
}

SampleSizeResult read_result(const std::filesystem::path& json_path) {
  const std::string text = read_text(json_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, json_path.string() + ": " + e.what());
  }
  return result_from_json(j);
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 800, kHeight = 600, kMargin = 10;
constexpr double kLeft = kMargin + 60, kRight = kWidth - kMargin;
constexpr double kTop = kMargin, kBottom = kHeight - kMargin - 50;
constexpr const char* kRed = "#d62728";

struct Axes {
  double x0, x1, y0, y1;
  double sx(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kRight - kLeft); }
  double sy(double y) const { return kBottom - (y - y0) / (y1 - y0) * (kBottom - kTop); }
};

double nice_ceiling(double v) {
  return std::clamp(std::ceil(v * 10.0 - 1e-9) / 10.0, 0.1, 1.0);
}

std::string polyline(const Axes& ax, const std::vector<std::pair<double, double>>& pts) {
  std::string d;
  for (std::size_t i = 0; i < pts.size(); ++i)
    d += (i ? " L" : "M") + fixed2(ax.sx(pts[i].first)) + "," + fixed2(ax.sy(pts[i].second));
  return d;
}

void frame(std::ostringstream& os, const Axes& ax, const std::string& xlabel,
           double xtick_step, bool integer_ticks) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
        "viewBox=\"0 0 800 600\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  os << "<rect class=\"frame\" x=\"" << fixed2(kLeft) << "\" y=\"" << fixed2(kTop)
     << "\" width=\"" << fixed2(kRight - kLeft) << "\" height=\"" << fixed2(kBottom - kTop)
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<g class=\"ticks\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double y = ax.y0 + (ax.y1 - ax.y0) * k / 5.0;
    os << "<text x=\"" << fixed2(kLeft - 6) << "\" y=\"" << fixed2(ax.sy(y) + 4)
       << "\" text-anchor=\"end\">" << fixed2(y) << "</text>\n";
  }
  const int steps = std::max(1, static_cast<int>(std::lround((ax.x1 - ax.x0) / xtick_step)));
  for (int k = 0; k <= steps && k <= 20; ++k) {
    const double x = ax.x0 + (ax.x1 - ax.x0) * k / steps;
    os << "<text x=\"" << fixed2(ax.sx(x)) << "\" y=\"" << fixed2(kBottom + 16)
       << "\" text-anchor=\"middle\">"
       << (integer_ticks ? std::to_string(std::lround(x)) : fixed2(x)) << "</text>\n";
  }
  os << "</g>\n";
  os << "<text class=\"xlabel\" x=\"" << fixed2((kLeft + kRight) / 2) << "\" y=\""
     << fixed2(kHeight - kMargin - 8) << "\" text-anchor=\"middle\" font-size=\"14\">"
     << xlabel << "</text>\n";
  os << "<text class=\"ylabel\" x=\"" << fixed2(kMargin + 8) << "\" y=\""
     << fixed2((kTop + kBottom) / 2) << "\" text-anchor=\"middle\" font-size=\"14\" "
        "transform=\"rotate(-90 " << fixed2(kMargin + 8) << " " << fixed2((kTop + kBottom) / 2)
     << ")\">FDR</text>\n";
}

void series(std::ostringstream& os, const char* id, const std::string& d,
            const char* colour, bool dashed, double width) {
  os << "<g class=\"series\" id=\"" << id << "\"><path d=\"" << d << "\" fill=\"none\" stroke=\""
     << colour << "\" stroke-width=\"" << fixed2(width) << "\""
     << (dashed ? " stroke-dasharray=\"6 4\"" : "") << "/></g>\n";
}

void target_line(std::ostringstream& os, const Axes& ax, double target) {
  os << "<g class=\"series\" id=\"target\"><line x1=\"" << fixed2(kLeft) << "\" y1=\""
     << fixed2(ax.sy(target)) << "\" x2=\"" << fixed2(kRight) << "\" y2=\""
     << fixed2(ax.sy(target)) << "\" stroke=\"black\" stroke-width=\"1.50\" "
        "stroke-dasharray=\"6 4\"/></g>\n";
}

}  // namespace

std::string curve_svg(const SampleSizeResult& result, double target_fdr) {
  require(!result.curve.empty(), "cannot plot an empty curve");
  const auto& curve = result.curve;
  double x0 = curve.front().n, x1 = curve.back().n;
  if (result.n_hat) {
    x0 = std::min<double>(x0, *result.n_hat);
    x1 = std::max<double>(x1, *result.n_hat);
  }
  if (x1 <= x0) {
    x0 -= 1;
    x1 += 1;
  }
  double ymax = target_fdr;
  for (const auto& pt : curve) ymax = std::max(ymax, pt.fdr90);
  const Axes ax{x0, x1, 0.0, nice_ceiling(ymax * 1.05)};

  std::ostringstream os;
  const double span = x1 - x0;
  frame(os, ax, "Sample size (n)", span <= 20 ? 2 : span <= 60 ? 5 : 10, true);

  std::vector<std::pair<double, double>> lo, mid, hi;
  for (const auto& pt : curve) {
    lo.emplace_back(pt.n, pt.fdr10);
    mid.emplace_back(pt.n, pt.fdr50);
    hi.emplace_back(pt.n, pt.fdr90);
  }
  series(os, "fdr50", polyline(ax, mid), kRed, false, 2.0);
  series(os, "fdr10", polyline(ax, lo), kRed, true, 1.5);
  series(os, "fdr90", polyline(ax, hi), kRed, true, 1.5);
  target_line(os, ax, target_fdr);
  if (result.n_hat) {
    const double x = ax.sx(*result.n_hat);
    os << "<g class=\"marker\" id=\"n-hat\"><line x1=\"" << fixed2(x) << "\" y1=\""
       << fixed2(kTop) << "\" x2=\"" << fixed2(x) << "\" y2=\"" << fixed2(kBottom)
       << "\" stroke=\"#1f77b4\" stroke-width=\"1.50\"/><text x=\"" << fixed2(x + 4)
       << "\" y=\"" << fixed2(kTop + 14) << "\" fill=\"#1f77b4\">n = " << *result.n_hat
       << " (" << result.n1_hat << " + " << result.n2_hat << ")</text></g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_curve_svg(const SampleSizeResult& result, double target_fdr,
                      const std::filesystem::path& path) {
  write_text(path, curve_svg(result, target_fdr));
}

std::string sweep_csv(const std::vector<SweepPoint>& sweep) {
  std::ostringstream os;
  os << "m," << kCurveCsvHeader << '\n';
  for (const auto& s : sweep)
    os << shortest(s.m) << ',' << s.point.n << ',' << s.point.n1 << ',' << s.point.n2
       << ',' << shortest(s.point.fdr10) << ',' << shortest(s.point.fdr50) << ','
       << shortest(s.point.fdr90) << '\n';
  return os.str();
}

std::string sweep_svg(const std::vector<SweepPoint>& sweep, double target_fdr) {
  require(!sweep.empty(), "cannot plot an empty sweep");
  std::map<int, std::vector<const SweepPoint*>> by_n;
  double x0 = sweep.front().m, x1 = x0, ymax = target_fdr;
  for (const auto& s : sweep) {
    by_n[s.point.n].push_back(&s);
    x0 = std::min(x0, s.m);
    x1 = std::max(x1, s.m);
    ymax = std::max(ymax, s.point.fdr90);
  }
  if (x1 <= x0) {
    x0 -= 0.05;
    x1 += 0.05;
  }
  const Axes ax{x0, x1, 0.0, nice_ceiling(ymax * 1.05)};
  std::ostringstream os;
  frame(os, ax, "Proportion of significant bins (m)", (x1 - x0) / 5.0, false);

  static constexpr const char* kColours[] = {"#d62728", "#1f77b4", "#2ca02c",
                                             "#9467bd", "#ff7f0e", "#8c564b"};
  std::size_t k = 0;
  for (const auto& [n, pts] : by_n) {
    const char* colour = kColours[k++ % std::size(kColours)];
    std::vector<std::pair<double, double>> lo, mid, hi;
    for (const auto* s : pts) {
      lo.emplace_back(s->m, s->point.fdr10);
      mid.emplace_back(s->m, s->point.fdr50);
      hi.emplace_back(s->m, s->point.fdr90);
    }
    const std::string id = "n" + std::to_string(n);
    series(os, (id + "-fdr50").c_str(), polyline(ax, mid), colour, false, 2.0);
    series(os, (id + "-fdr10").c_str(), polyline(ax, lo), colour, true, 1.5);
    series(os, (id + "-fdr90").c_str(), polyline(ax, hi), colour, true, 1.5);
    const auto& last = mid.back();
    os << "<text class=\"legend\" x=\"" << fixed2(ax.sx(last.first) - 4) << "\" y=\""
       << fixed2(ax.sy(last.second) - 6) << "\" text-anchor=\"end\" fill=\"" << colour
       << "\">n = " << n << "</text>\n";
  }
  target_line(os, ax, target_fdr);
  os << "</svg>\n";
  return os.str();
}

}  // namespace metsize
