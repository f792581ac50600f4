#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "agbada/errors.hpp"
#include "agbada/model.hpp"

namespace agbada::data {

struct IndexRow {
  std::string image_id;
  std::string clothing;
  std::string gender;

  friend bool operator==(const IndexRow&, const IndexRow&) = default;
};

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// One CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

}  // namespace detail

// Canonical class name for a gender string (case-insensitive), if known.
inline std::optional<std::string> canonical_gender(const std::string& value) {
  const std::string v = detail::lower(detail::trim(value));
  for (const auto& name : default_class_names())
    if (detail::lower(name) == v) return name;
  return std::nullopt;
}

inline std::size_t class_index(const std::string& gender) {
  const auto& names = default_class_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == gender) return i;
  throw ValidationError("unknown gender '" + gender + "'");
}

// Parses a label index with header columns image_id, clothing, gender (any
// order; extra columns ignored). Row numbers in errors count data rows from 1.
// With require_gender off, a missing gender column leaves gender empty for
// derive_gender to fill.
inline std::vector<IndexRow> parse_index(std::istream& in, const std::string& source = "<index>",
                                         bool require_gender = true) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": missing header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  auto column = [&](const std::string& name, bool required) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::lower(header[i]) == name) return i;
    if (!required) return kAbsent;
    throw ValidationError(source + ": header lacks column '" + name + "'");
  };
  const std::size_t id_col = column("image_id", true);
  const std::size_t clothing_col = column("clothing", true);
  const std::size_t gender_col = column("gender", require_gender);
  const bool has_gender = gender_col != kAbsent;
  const std::size_t needed = std::max({id_col, clothing_col, has_gender ? gender_col : 0}) + 1;

  std::vector<IndexRow> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row_number;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() < needed) {
      throw ValidationError(source + ": row " + std::to_string(row_number) + " has " + std::to_string(fields.size()) +
                            " fields, expected at least " + std::to_string(needed));
    }
    IndexRow row{fields[id_col], fields[clothing_col], has_gender ? fields[gender_col] : std::string()};
    if (row.image_id.empty()) throw ValidationError(source + ": row " + std::to_string(row_number) + " has an empty image_id");
    if (!has_gender) {
      rows.push_back(std::move(row));
      continue;
    }
    const auto gender = canonical_gender(row.gender);
    if (!gender) {
      throw ValidationError(source + ": row " + std::to_string(row_number) + " has unknown gender '" + row.gender + "'");
    }
    row.gender = *gender;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<IndexRow> load_index(const std::string& path, bool require_gender = true) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read index file '" + path + "'");
  return parse_index(in, path, require_gender);
}

inline std::string format_index(const std::vector<IndexRow>& rows) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream os;
  os << "image_id,clothing,gender\n";
  for (const auto& r : rows) os << quote(r.image_id) << ',' << quote(r.clothing) << ',' << quote(r.gender) << '\n';
  return os.str();
}

struct ClassShare {
  std::size_t count = 0;
  double fraction = 0.0;
};

inline std::map<std::string, ClassShare> class_distribution(const std::vector<IndexRow>& rows) {
  std::map<std::string, ClassShare> out;
  for (const auto& r : rows) ++out[r.gender].count;
  for (auto& [_, share] : out)
    share.fraction = static_cast<double>(share.count) / static_cast<double>(rows.size());
  return out;
}

// Fills gender from a clothing -> gender mapping, for corpora that only carry
// style labels.
inline std::vector<IndexRow> derive_gender(std::vector<IndexRow> rows,
                                           const std::map<std::string, std::string>& mapping) {
  for (auto& r : rows) {
    auto it = mapping.find(r.clothing);
    if (it == mapping.end()) throw ValidationError("no gender mapping for clothing '" + r.clothing + "'");
    const auto gender = canonical_gender(it->second);
    if (!gender) throw ValidationError("mapping for '" + r.clothing + "' names unknown gender '" + it->second + "'");
    r.gender = *gender;
  }
  return rows;
}

}  // namespace agbada::data
