#pragma once

#include <string>
#include <vector>

namespace synthgate {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style: quoted fields, doubled quotes, embedded separators and
// newlines inside quotes; first record is the header.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string csv_escape(const std::string& field);
std::string to_csv(const CsvTable& table);

}  // namespace synthgate
