#include "synthgate/csv.hpp"

#include <stdexcept>

#include "synthgate/util.hpp"

namespace synthgate {

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;  // stray quote inside unquoted field, keep literal
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  if (records.empty()) throw std::runtime_error("csv: no header row");
  CsvTable t;
  t.header = std::move(records.front());
  const std::size_t width = t.header.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && records[r][0].empty()) continue;  // trailing blank line
    if (records[r].size() != width)
      throw std::runtime_error("csv: row " + std::to_string(r) + " has " +
                               std::to_string(records[r].size()) + " fields, expected " +
                               std::to_string(width));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

std::string csv_escape(const std::string& field) {
  bool needs_quotes = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs_quotes = true;
      break;
    }
  }
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto emit_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += '\n';
  };
  emit_row(table.header);
  for (const auto& row : table.rows) emit_row(row);
  return out;
}

}  // namespace synthgate
