#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scenario_detail.hpp"

namespace hjkit {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

namespace {

std::string line_of(const toml::node& n) {
  const auto& src = n.source();
  return " (line " + std::to_string(src.begin.line) + ")";
}

}  // namespace

bool Section::has(const std::string& key) const { return table_ && table_->contains(key); }

const toml::node* Section::node(const std::string& key, bool required) const {
  used_.insert(key);
  const toml::node* n = table_ ? table_->get(key) : nullptr;
  if (!n && required) throw ValidationError("missing required key '" + where(key) + "'");
  return n;
}

double Section::num(const std::string& key) const {
  const toml::node* n = node(key, true);
  const auto v = n->value<double>();
  if (!n->is_number() || !v) throw ValidationError("key '" + where(key) + "' must be a number" + line_of(*n));
  return *v;
}

double Section::num(const std::string& key, double fallback) const { return has(key) ? num(key) : (used_.insert(key), fallback); }

long long Section::integer(const std::string& key, long long fallback) const {
  const toml::node* n = node(key, false);
  if (!n) return fallback;
  if (!n->is_integer()) throw ValidationError("key '" + where(key) + "' must be an integer" + line_of(*n));
  return *n->value<long long>();
}

bool Section::flag(const std::string& key, bool fallback) const {
  const toml::node* n = node(key, false);
  if (!n) return fallback;
  if (!n->is_boolean()) throw ValidationError("key '" + where(key) + "' must be true or false" + line_of(*n));
  return *n->value<bool>();
}

std::string Section::str(const std::string& key) const {
  const toml::node* n = node(key, true);
  if (!n->is_string()) throw ValidationError("key '" + where(key) + "' must be a string" + line_of(*n));
  return *n->value<std::string>();
}

std::string Section::str(const std::string& key, const std::string& fallback) const {
  return has(key) ? str(key) : (used_.insert(key), fallback);
}

std::vector<double> Section::nums(const std::string& key) const {
  const toml::node* n = node(key, true);
  const toml::array* arr = n->as_array();
  if (!arr) throw ValidationError("key '" + where(key) + "' must be an array of numbers" + line_of(*n));
  std::vector<double> out;
  for (const toml::node& el : *arr) {
    const auto v = el.value<double>();
    if (!el.is_number() || !v) throw ValidationError("key '" + where(key) + "' must hold numbers" + line_of(el));
    out.push_back(*v);
  }
  return out;
}

std::vector<double> Section::nums(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? nums(key) : (used_.insert(key), std::move(fallback));
}

std::vector<std::string> Section::strs(const std::string& key) const {
  const toml::node* n = node(key, true);
  const toml::array* arr = n->as_array();
  if (!arr) throw ValidationError("key '" + where(key) + "' must be an array of strings" + line_of(*n));
  std::vector<std::string> out;
  for (const toml::node& el : *arr) {
    if (!el.is_string()) throw ValidationError("key '" + where(key) + "' must hold strings" + line_of(el));
    out.push_back(*el.value<std::string>());
  }
  return out;
}

Section Section::sub(const std::string& key) const {
  const toml::node* n = node(key, false);
  if (!n) return Section(nullptr, where(key));
  const toml::table* t = n->as_table();
  if (!t) throw ValidationError("key '" + where(key) + "' must be a table" + line_of(*n));
  return Section(t, where(key));
}

Section Section::require_sub(const std::string& key) const {
  Section s = sub(key);
  if (!s.present()) throw ValidationError("missing required table [" + where(key) + "]");
  return s;
}

void Section::finish() const {
  if (!table_) return;
  for (auto&& [k, v] : *table_) {
    const std::string key(k.str());
    if (!used_.count(key)) throw ValidationError("unknown key '" + where(key) + "'" + line_of(v));
  }
}

Expression expression(const Section& s, const std::string& key, const std::vector<std::string>& vars) {
  const std::string text = s.str(key);
  try {
    return Expression::parse(text, vars);
  } catch (const ExprError& e) {
    throw ValidationError("key '" + s.where(key) + "': " + e.what());
  }
}

Expression expression(const Section& s, const std::string& key, const std::string& fallback,
                      const std::vector<std::string>& vars) {
  if (s.has(key)) return expression(s, key, vars);
  s.ignore(key);
  return Expression::parse(fallback, vars);
}

std::vector<std::string> indexed(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& m : table.meta) f << "# " << m << '\n';
  for (std::size_t c = 0; c < table.columns.size(); ++c) f << (c ? "," : "") << table.columns[c];
  f << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) f << (c ? "," : "") << format_number(row[c]);
    f << '\n';
  }
}

void write_ndjson(const std::string& path, const std::vector<CheckRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  auto json_number = [](double v) { return std::isfinite(v) ? format_number(v) : std::string("null"); };
  for (const auto& r : records) {
    f << "{\"check\":\"" << r.check << "\",\"value\":" << json_number(r.value) << ",\"tol\":" << json_number(r.tol)
      << ",\"pass\":" << (r.pass ? "true" : "false") << "}\n";
  }
}

void write_svg(const std::string& path, const Plot& plot) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& l : plot.lines) {
    for (const auto& [x, y] : l.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double W = 640, H = 480, M = 50;
  auto px = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
  auto py = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto tick = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<rect x=\"" << M << "\" y=\"" << M << "\" width=\"" << W - 2 * M << "\" height=\"" << H - 2 * M
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"14\">" << plot.title << "</text>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">" << plot.xlabel
    << "</text>\n";
  f << "<text x=\"14\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
    << H / 2 << ")\">" << plot.ylabel << "</text>\n";
  f << "<text x=\"" << M << "\" y=\"" << H - M + 15 << "\" font-size=\"10\">" << tick(x0) << "</text>\n";
  f << "<text x=\"" << W - M << "\" y=\"" << H - M + 15 << "\" text-anchor=\"end\" font-size=\"10\">" << tick(x1)
    << "</text>\n";
  f << "<text x=\"" << M - 4 << "\" y=\"" << H - M << "\" text-anchor=\"end\" font-size=\"10\">" << tick(y0)
    << "</text>\n";
  f << "<text x=\"" << M - 4 << "\" y=\"" << M + 10 << "\" text-anchor=\"end\" font-size=\"10\">" << tick(y1)
    << "</text>\n";
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  for (std::size_t i = 0; i < plot.lines.size(); ++i) {
    f << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << colors[i % 6] << "\" points=\"";
    for (const auto& [x, y] : plot.lines[i].points) {
      if (std::isfinite(x) && std::isfinite(y)) f << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
    }
    f << "\"/>\n";
  }
  f << "</svg>\n";
}

}  // namespace detail
}  // namespace hjkit
