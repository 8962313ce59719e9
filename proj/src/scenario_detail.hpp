#pragma once

// Shared by the scenario runner: TOML sections that track which keys were
// read, and the CSV / NDJSON / SVG writers.

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hjkit/expr.hpp"
#include "hjkit/scenario.hpp"
#include "toml.hpp"

namespace hjkit::detail {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A TOML table whose reads are recorded so that leftover keys can be
/// rejected by finish().
class Section {
 public:
  Section(const toml::table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool present() const { return table_ != nullptr; }
  bool has(const std::string& key) const;
  double num(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string str(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  std::vector<double> nums(const std::string& key) const;
  std::vector<double> nums(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> strs(const std::string& key) const;
  /// Sub-table; an absent table yields a Section with present() false.
  Section sub(const std::string& key) const;
  Section require_sub(const std::string& key) const;
  /// Marks every key of the table as read without reading it.
  void ignore(const std::string& key) const { used_.insert(key); }

  /// Throws ValidationError naming the first unread key.
  void finish() const;

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const toml::node* node(const std::string& key, bool required) const;

  const toml::table* table_;
  std::string path_;
  mutable std::set<std::string> used_;
};

/// Parses an expression, turning syntax errors into validation errors.
Expression expression(const Section& s, const std::string& key, const std::vector<std::string>& vars);
Expression expression(const Section& s, const std::string& key, const std::string& fallback,
                      const std::vector<std::string>& vars);

/// Names x1..xn for a prefix and count.
std::vector<std::string> indexed(const std::string& prefix, int n);

struct Table {
  std::vector<std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Polyline {
  std::vector<std::pair<double, double>> points;
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Polyline> lines;
};

void write_csv(const std::string& path, const Table& table);
void write_ndjson(const std::string& path, const std::vector<CheckRecord>& records);
void write_svg(const std::string& path, const Plot& plot);

}  // namespace hjkit::detail
