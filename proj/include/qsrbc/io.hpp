#pragma once

// JSON file schemas for systems, supply rates, controllers, datasets and
// verdicts. Matrices are stored as nested row-major arrays alongside a
// dimension header; doubles round-trip bit-exactly through the shortest
// decimal representation.

#include <qsrbc/state_space.hpp>
#include <qsrbc/supply.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace qsrbc::io {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                               const std::string& name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw std::invalid_argument("io: field '" + name + "' must have " +
                                std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("io: field '" + name + "' must have " +
                                  std::to_string(cols) + " columns");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[k].get<double>();
  }
  return m;
}

inline json system_to_json(const systems::StateSpace& sys) {
  json j;
  j["type"] = "state_space";
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["p"] = sys.p();
  j["A"] = matrix_to_json(sys.A());
  j["B"] = matrix_to_json(sys.B());
  j["C"] = matrix_to_json(sys.C());
  j["D"] = matrix_to_json(sys.D());
  return j;
}

inline systems::StateSpace system_from_json(const json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  const auto p = j.at("p").get<Eigen::Index>();
  return systems::StateSpace(matrix_from_json(j.at("A"), n, n, "A"),
                             matrix_from_json(j.at("B"), n, m, "B"),
                             matrix_from_json(j.at("C"), p, n, "C"),
                             matrix_from_json(j.at("D"), p, m, "D"));
}

inline json qsr_to_json(const systems::QSRTriple& qsr) {
  json j;
  j["type"] = "qsr";
  j["p"] = qsr.output_dim();
  j["m"] = qsr.input_dim();
  j["Q"] = matrix_to_json(qsr.Q);
  j["S"] = matrix_to_json(qsr.S);
  j["R"] = matrix_to_json(qsr.R);
  return j;
}

inline systems::QSRTriple qsr_from_json(const json& j) {
  const auto p = j.at("p").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  return systems::QSRTriple(matrix_from_json(j.at("Q"), p, p, "Q"),
                            matrix_from_json(j.at("S"), p, m, "S"),
                            matrix_from_json(j.at("R"), m, m, "R"));
}

/// Dynamic output-feedback controller (Ahat, Bhat, Chat, 0). Observer files
/// use the same schema without the Chat field.
struct ControllerFile {
  Matrix Ahat, Bhat;
  std::optional<Matrix> Chat;
};

inline json controller_to_json(const ControllerFile& c) {
  json j;
  j["type"] = "controller";
  j["nhat"] = c.Ahat.rows();
  j["p"] = c.Bhat.cols();
  j["Ahat"] = matrix_to_json(c.Ahat);
  j["Bhat"] = matrix_to_json(c.Bhat);
  if (c.Chat) {
    j["m"] = c.Chat->rows();
    j["Chat"] = matrix_to_json(*c.Chat);
  }
  return j;
}

inline ControllerFile controller_from_json(const json& j) {
  const auto nhat = j.at("nhat").get<Eigen::Index>();
  const auto p = j.at("p").get<Eigen::Index>();
  ControllerFile c{matrix_from_json(j.at("Ahat"), nhat, nhat, "Ahat"),
                   matrix_from_json(j.at("Bhat"), nhat, p, "Bhat"), {}};
  if (j.contains("Chat")) {
    const auto m = j.at("m").get<Eigen::Index>();
    c.Chat = matrix_from_json(j.at("Chat"), m, nhat, "Chat");
  }
  return c;
}

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("io: cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

inline void save_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("io: cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("io: write failed for " + path.string());
}

}  // namespace qsrbc::io
