#pragma once

// JSON model file:
//   { "format_version": 1, "n_states": N, "m_symbols": M,
//     "pi": [...], "trans": [[...], ...], "emit": [[...], ...] }
// Reals are printed with 17 significant digits so a save/load cycle
// reproduces every entry bit for bit.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "playseq/errors.hpp"
#include "playseq/hmm.hpp"

namespace playseq {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& os, std::span<const double> row) {
  os << '[';
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ", ";
    os << format_real(row[i]);
  }
  os << ']';
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << "[\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << "    ";
    write_row(os, m.row(r));
    os << (r + 1 < m.rows() ? ",\n" : "\n");
  }
  os << "  ]";
}

inline std::vector<double> read_row(const nlohmann::json& j, std::size_t size,
                                    const std::string& what) {
  if (!j.is_array() || j.size() != size)
    throw FormatError(what + " must be an array of " + std::to_string(size) +
                      " numbers");
  std::vector<double> row;
  row.reserve(size);
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(what + " contains a non-number");
    row.push_back(v.get<double>());
  }
  return row;
}

inline Matrix read_matrix(const nlohmann::json& j, std::size_t rows,
                          std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows)
    throw FormatError(what + " must have " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = read_row(j[r], cols, what + " row " + std::to_string(r));
    std::copy(row.begin(), row.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace detail

inline std::string model_to_json(const HmmModel& model) {
  std::ostringstream os;
  os << "{\n  \"format_version\": " << kModelFormatVersion << ",\n"
     << "  \"n_states\": " << model.n_states() << ",\n"
     << "  \"m_symbols\": " << model.vocab_size() << ",\n"
     << "  \"pi\": ";
  detail::write_row(os, model.pi);
  os << ",\n  \"trans\": ";
  detail::write_matrix(os, model.trans);
  os << ",\n  \"emit\": ";
  detail::write_matrix(os, model.emit);
  os << "\n}\n";
  return os.str();
}

// Throws FormatError on malformed documents, VersionError on an unknown
// format_version and ValidationError when rows are not stochastic.
inline HmmModel model_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("model file must be a JSON object");
  for (const char* key :
       {"format_version", "n_states", "m_symbols", "pi", "trans", "emit"})
    if (!doc.contains(key))
      throw FormatError(std::string("model file is missing \"") + key + "\"");
  if (!doc["format_version"].is_number_integer())
    throw FormatError("format_version must be an integer");
  const int version = doc["format_version"].get<int>();
  if (version != kModelFormatVersion)
    throw VersionError("unsupported model format_version " +
                       std::to_string(version) + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  if (!doc["n_states"].is_number_unsigned() ||
      !doc["m_symbols"].is_number_unsigned())
    throw FormatError("n_states and m_symbols must be non-negative integers");
  const auto n = doc["n_states"].get<std::size_t>();
  const auto m = doc["m_symbols"].get<std::size_t>();
  if (n == 0 || m == 0)
    throw FormatError("n_states and m_symbols must be >= 1");
  HmmModel model{detail::read_row(doc["pi"], n, "pi"),
                 detail::read_matrix(doc["trans"], n, n, "trans"),
                 detail::read_matrix(doc["emit"], n, m, "emit")};
  validate(model);
  return model;
}

inline void save_model(const HmmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << model_to_json(model);
  if (!out) throw ArgumentError("failed writing " + path);
}

inline HmmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace playseq
