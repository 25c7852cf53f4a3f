#include "flamm/sparse_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

#include "flamm/error.hpp"

namespace flamm {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

int parse_label(std::string_view token, std::size_t line_no) {
  if (token == "+1" || token == "1") return 1;
  if (token == "-1" || token == "0") return -1;
  throw ParseError("bad label '" + std::string(token) + "'", line_no);
}

}  // namespace

LabeledSet SparseFile::labeled() const {
  if (!labels) throw InvalidInput("sparse file carries no labels");
  return {x, *labels};
}

SparseFile read_sparse(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 2 || tokens[0] != "#d" || !parse_number(tokens[1], dim) || dim < 1) {
      throw ParseError("expected header '#d <dimension>'", line_no);
    }
    break;
  }
  if (dim < 1) throw ParseError("missing '#d <dimension>' header", line_no);

  std::vector<std::vector<std::pair<Index, double>>> columns;
  std::vector<int> labels;
  std::optional<bool> has_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.front() == '#') continue;
    const auto tokens = split_ws(line);
    std::size_t first = 0;
    const bool labeled = !tokens.empty() && tokens[0].find(':') == std::string_view::npos;
    if (!has_labels) has_labels = labeled;
    if (labeled != *has_labels) {
      throw ParseError("labels must be given on every line or on none", line_no);
    }
    if (labeled) {
      labels.push_back(parse_label(tokens[0], line_no));
      first = 1;
    }
    std::vector<std::pair<Index, double>> entries;
    Index previous = 0;
    for (std::size_t t = first; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("expected index:value, got '" + std::string(tokens[t]) + "'", line_no);
      }
      long long index = 0;
      double value = 0.0;
      if (!parse_number(tokens[t].substr(0, colon), index) ||
          !parse_number(tokens[t].substr(colon + 1), value)) {
        throw ParseError("malformed pair '" + std::string(tokens[t]) + "'", line_no);
      }
      if (index < 1 || index > dim) {
        throw ParseError("index " + std::to_string(index) + " outside [1, " + std::to_string(dim) +
                             "]",
                         line_no);
      }
      if (index <= previous) throw ParseError("indices must be strictly ascending", line_no);
      if (!std::isfinite(value)) throw ParseError("non-finite value", line_no);
      previous = static_cast<Index>(index);
      entries.emplace_back(previous - 1, value);
    }
    columns.push_back(std::move(entries));
  }
  if (columns.empty()) throw ParseError("file contains no samples", line_no);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Index>(dim), static_cast<Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (const auto& [i, v] : columns[j]) x(i, static_cast<Index>(j)) = v;
  }
  SparseFile out{DataMatrix(std::move(x)), std::nullopt};
  if (has_labels.value_or(false)) out.labels = std::move(labels);
  return out;
}

SparseFile read_sparse(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return read_sparse(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_sparse(std::ostream& out, const DataMatrix& x, const std::vector<int>* labels) {
  if (labels && static_cast<Index>(labels->size()) != x.n()) {
    throw InvalidInput("label count does not match sample count");
  }
  out << "#d " << x.d() << '\n';
  char buffer[64];
  for (Index j = 0; j < x.n(); ++j) {
    bool first = true;
    if (labels) {
      out << ((*labels)[static_cast<std::size_t>(j)] > 0 ? "+1" : "-1");
      first = false;
    }
    for (Index i = 0; i < x.d(); ++i) {
      const double v = x.values()(i, j);
      if (v == 0.0) continue;
      std::snprintf(buffer, sizeof buffer, "%.17g", v);
      if (!first) out << ' ';
      out << (i + 1) << ':' << buffer;
      first = false;
    }
    out << '\n';
  }
  if (!out) throw Error("write failed");
}

void write_sparse(const std::string& path, const DataMatrix& x, const std::vector<int>* labels) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  write_sparse(out, x, labels);
}

}  // namespace flamm
