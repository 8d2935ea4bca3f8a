#include "csv.hpp"

#include "cli_error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace c2st::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add(std::vector<Cell> row) {
  if (row.size() != header_.size()) raise(C2ST_ERR_INTERNAL, "csv row width differs from the header");
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) body_ += ',';
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) {
            body_ += v;
          } else if constexpr (std::is_same_v<T, double>) {
            body_ += format_number(v);
          } else {
            body_ += std::to_string(v);
          }
        },
        row[i]);
  }
  body_ += '\n';
}

std::string CsvWriter::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  return out + body_;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  raise(C2ST_ERR_FORMAT, "csv has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  CsvTable t;
  if (!std::getline(in, line)) raise(C2ST_ERR_FORMAT, origin + ": empty csv");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      raise(C2ST_ERR_FORMAT, origin + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || errno == ERANGE) {
        raise(C2ST_ERR_FORMAT, origin + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(C2ST_ERR_IO, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

}  // namespace c2st::cli
