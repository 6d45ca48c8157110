#pragma once

// Text interchange formats.
//
// Matrix CSV: one matrix row per line, one sample per column, comma
// separated. Lines starting with '#' are comments (save_matrix writes a
// "# D=<rows> N=<cols>" header). A first line that is not numeric is taken as
// a column header and skipped. Values are written with 17 significant digits,
// which round-trips IEEE doubles exactly.
//
// Label files: one 1-based integer per line.

#include "hetsub/core.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>

namespace hetsub::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline Matrix parse_matrix(std::istream& in, const std::string& name = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split(t, ',');
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      if (!detail::parse_double(fields[j], v)) {
        numeric = false;
        bad = j;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first_content) {
        first_content = false;
        continue;  // column header
      }
      throw DataError(name + ": line " + std::to_string(line_no) + ", column " +
                      std::to_string(bad + 1) + ": cannot parse '" + std::string(detail::trim(fields[bad])) + "'");
    }
    first_content = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw DataError(name + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(rows.front().size()) + " columns, found " +
                      std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(name + ": no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline Matrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_matrix(in, path.string());
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string format_matrix(const Matrix& m) {
  std::string s = "# D=" + std::to_string(m.rows()) + " N=" + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      s += format_double(m(i, j));
    }
    s += '\n';
  }
  return s;
}

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  write_atomic(path, format_matrix(m));
}

/// Reads 1-based labels and returns them 0-based.
inline Labels parse_labels(std::istream& in, const std::string& name = "<stream>") {
  Labels out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || v < 1)
      throw DataError(name + ": line " + std::to_string(line_no) + ": expected a label >= 1, found '" +
                      std::string(t) + "'");
    out.push_back(v - 1);
  }
  return out;
}

inline Labels load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_labels(in, path.string());
}

inline std::string format_labels(const Labels& labels) {
  std::string s;
  for (int c : labels) s += std::to_string(c + 1) + '\n';
  return s;
}

inline void save_labels(const std::filesystem::path& path, const Labels& labels) {
  write_atomic(path, format_labels(labels));
}

/// Plain integer list (noise groups), one per line, stored as-is.
inline std::vector<int> load_ints(const std::filesystem::path& path) {
  auto labels = load_labels(path);
  for (int& v : labels) ++v;
  return labels;
}

inline void save_ints(const std::filesystem::path& path, const std::vector<int>& values) {
  std::string s;
  for (int v : values) s += std::to_string(v) + '\n';
  write_atomic(path, s);
}

}  // namespace hetsub::io
