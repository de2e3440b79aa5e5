#pragma once

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "icc/common.hpp"

namespace icc::jsonio {

using json = nlohmann::json;

inline json from_vector(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector to_vector(const json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

inline json from_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(from_vector(m.row(i)));
  return rows;
}

inline Matrix to_matrix(const json& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = to_vector(rows[i]).transpose();
  return m;
}

inline void write_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(1) << '\n';
}

inline json read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  return json::parse(f);
}

}  // namespace icc::jsonio
