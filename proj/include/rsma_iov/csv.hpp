#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsma_iov {

// RFC 4180 table: header row plus records, CRLF line ends on output, fields
// quoted when they contain a comma, quote, CR or LF.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws io when missing
  double number(std::size_t row, const std::string& name) const;
};

std::string csv_field(const std::string& value);
// Shortest round-trip decimal form.
std::string csv_number(double value);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv_file(const std::string& path, const CsvTable& table);

// Accepts CRLF or LF line ends; every record must have the header's width.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace rsma_iov
