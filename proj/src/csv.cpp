#include "rsma_iov/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rsma_iov/errors.hpp"

namespace rsma_iov {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw Error(ErrorKind::kIo, "CSV has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw Error(ErrorKind::kIo, "CSV field '" + s + "' in column " + name + " is not a number");
  }
  return v;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_number(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_field(fields[i]);
    }
    out << "\r\n";
  };
  line(table.header);
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size()) {
      throw Error(ErrorKind::kIo, "CSV record width differs from the header");
    }
    line(r);
  }
}

void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path);
  write_csv(f, table);
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path);
}

CsvTable read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, in_record = false, after_quote = false;
  char c;
  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(rec));
    rec.clear();
    in_record = false;
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == ',') {
      end_field();
      in_record = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && in.peek() == '\n') in.get(c);
      end_record();
    } else if (c == '"') {
      if (!field.empty() || after_quote) throw Error(ErrorKind::kIo, "stray quote in CSV field");
      quoted = true;
      in_record = true;
    } else {
      if (after_quote) throw Error(ErrorKind::kIo, "text after a closing quote in CSV");
      field += c;
      in_record = true;
    }
  }
  if (quoted) throw Error(ErrorKind::kIo, "unterminated quoted CSV field");
  if (in_record || !field.empty()) end_record();
  if (records.empty()) throw Error(ErrorKind::kIo, "CSV has no header");
  CsvTable t;
  t.header = std::move(records[0]);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size()) {
      throw Error(ErrorKind::kIo, "CSV record " + std::to_string(i) + " has " +
                                      std::to_string(records[i].size()) + " fields, header " +
                                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot read " + path);
  return read_csv(f);
}

}  // namespace rsma_iov
