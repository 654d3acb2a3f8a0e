#include <charconv>

#include "mbda/faac.hpp"

namespace mbda {

namespace {

void put_field(std::string& out, std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) {
    out.append(f);
    return;
  }
  out.push_back('"');
  for (char c : f) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

// RFC 4180 subset: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_line(std::string_view line, const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw DataError(where + ": unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::string matrix_to_csv(const FeatureMatrix& m) {
  std::string out = "bin";
  for (const auto& c : m.columns()) {
    out.push_back(',');
    put_field(out, c);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < m.rows(); ++r) {
    put_field(out, m.labels()[r]);
    for (auto v : m.row(r)) {
      out.push_back(',');
      out += std::to_string(v);
    }
    out.push_back('\n');
  }
  return out;
}

FeatureMatrix matrix_from_csv(const std::string& text, const std::string& origin) {
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string::npos ? text.size() : nl;
    line = std::string_view(text).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) throw DataError(origin + ": empty file, expected header");
  auto header = split_line(line, origin + ":1");
  if (header.empty() || header[0] != "bin") throw DataError(origin + ":1: header must start with 'bin'");
  FeatureMatrix m(std::vector<std::string>(header.begin() + 1, header.end()));
  std::vector<std::int64_t> row(m.cols());
  while (next_line(line)) {
    if (line.empty()) continue;
    std::string where = origin + ":" + std::to_string(line_no);
    auto fields = split_line(line, where);
    if (fields.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto& f = fields[c];
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size() || v < 0)
        throw DataError(where + ": column " + std::to_string(c + 1) + " ('" + header[c] +
                        "') is not a non-negative integer: '" + f + "'");
      row[c - 1] = v;
    }
    try {
      m.append_row(fields[0], row);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return m;
}

void write_matrix(const FeatureMatrix& m, const std::string& path) { write_file(path, matrix_to_csv(m)); }

FeatureMatrix read_matrix(const std::string& path) { return matrix_from_csv(read_file(path), path); }

}  // namespace mbda
