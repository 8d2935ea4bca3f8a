#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace c2st::cli {

using Cell = std::variant<std::string, double, std::int64_t, std::uint64_t>;

// Doubles at 17 significant digits so 64-bit values survive a round trip.
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add(std::vector<Cell> row);
  std::size_t columns() const { return header_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::string body_;
};

// Numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& origin);
CsvTable read_csv(const std::string& path);

}  // namespace c2st::cli
