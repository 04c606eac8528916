#include "beable/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <unistd.h>

namespace beable {

namespace {

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from_json(const Json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ConfigError("expected a number or an [re, im] pair, got " + j.dump());
}

Index dim_of(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("data")) {
    throw ConfigError("expected an object with \"dim\" and \"data\"");
  }
  const auto dim = j.at("dim").get<long long>();
  if (dim < 1) throw ConfigError("\"dim\" must be positive");
  if (!j.at("data").is_array()) throw ConfigError("\"data\" must be an array");
  return static_cast<Index>(dim);
}

}  // namespace

Json matrix_to_json(const CMatrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("only square matrices are serialized");
  Json data = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(complex_to_json(m(r, c)));
  return Json{{"dim", m.rows()}, {"data", data}};
}

CMatrix matrix_from_json(const Json& j) {
  const Index n = dim_of(j);
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != n * n) {
    throw ConfigError("matrix data has " + std::to_string(data.size()) + " entries, expected " + std::to_string(n * n));
  }
  CMatrix m(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) m(r, c) = complex_from_json(data[static_cast<std::size_t>(r * n + c)]);
  return m;
}

HermitianOperator operator_from_json(const Json& j) {
  try {
    return HermitianOperator(matrix_from_json(j));
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("Hamiltonian is not Hermitian: ") + e.what());
  }
}

Json vector_to_json(const CVector& v) {
  Json data = Json::array();
  for (Index k = 0; k < v.size(); ++k) data.push_back(complex_to_json(v[k]));
  return Json{{"dim", v.size()}, {"data", data}};
}

CVector vector_from_json(const Json& j) {
  const Index n = dim_of(j);
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != n) {
    throw ConfigError("vector data has " + std::to_string(data.size()) + " entries, expected " + std::to_string(n));
  }
  CVector v(n);
  for (Index k = 0; k < n; ++k) v[k] = complex_from_json(data[static_cast<std::size_t>(k)]);
  return v;
}

StateVector state_from_json(const Json& j, bool normalize) {
  const CVector v = vector_from_json(j);
  if (normalize) {
    if (!(v.norm() > 0.0)) throw ConfigError("state vector is zero");
    return StateVector::normalized(v);
  }
  try {
    return StateVector(v);
  } catch (const Error& e) {
    throw ConfigError(std::string("state vector: ") + e.what());
  }
}

Json family_to_json(const ProjectorFamily& f) {
  Json cells = Json::array();
  Json labels = Json::array();
  for (Index i = 0; i < f.size(); ++i) {
    const auto& cell = f.cell(i);
    if (cell.is_index_set()) {
      cells.push_back(cell.indices());
    } else {
      Json cols = Json::array();
      const CMatrix b = cell.basis();
      for (Index c = 0; c < b.cols(); ++c) cols.push_back(vector_to_json(b.col(c)).at("data"));
      cells.push_back(cols);
    }
    labels.push_back(f.label(i).text);
  }
  return Json{{"dim", f.dim()},
              {"cells", cells},
              {"labels", labels},
              {"resolution", f.resolution()},
              {"exhaustive", f.exhaustive()}};
}

ProjectorFamily family_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("cells")) {
    throw ConfigError("family needs \"dim\" and \"cells\"");
  }
  const auto dim = static_cast<Index>(j.at("dim").get<long long>());
  std::vector<ProjectorCell> cells;
  std::vector<CellLabel> labels;
  const auto& jc = j.at("cells");
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const auto& c = jc[i];
    if (!c.is_array()) throw ConfigError("each cell must be an array");
    if (c.empty() || c[0].is_number_integer()) {
      std::vector<Index> idx;
      for (const auto& k : c) {
        const auto v = k.get<long long>();
        if (v < 0 || v >= dim) throw ConfigError("cell index " + std::to_string(v) + " outside the space");
        idx.push_back(static_cast<Index>(v));
      }
      cells.push_back(ProjectorCell::from_indices(dim, std::move(idx)));
    } else {
      CMatrix basis(dim, static_cast<Index>(c.size()));
      for (std::size_t col = 0; col < c.size(); ++col) {
        basis.col(static_cast<Index>(col)) = vector_from_json(Json{{"dim", dim}, {"data", c[col]}});
      }
      try {
        cells.push_back(ProjectorCell::from_basis(basis));
      } catch (const ShapeError& e) {
        throw ConfigError(std::string("cell basis: ") + e.what());
      }
    }
    std::string label = std::to_string(i);
    if (j.contains("labels") && i < j.at("labels").size()) label = j.at("labels")[i].get<std::string>();
    labels.push_back(CellLabel{label});
  }
  const double resolution = j.value("resolution", 1.0);
  ProjectorFamily f(dim, std::move(cells), std::move(labels), resolution);
  if (j.contains("exhaustive") && j.at("exhaustive").get<bool>() && !f.exhaustive()) {
    throw ConfigError("family is declared exhaustive but its cells do not sum to the identity");
  }
  return f;
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ConfigError("format must be csv or json, got '" + name + "'");
}

const char* extension(OutputFormat format) { return format == OutputFormat::Csv ? ".csv" : ".json"; }

std::string format_number(double x) { return fmt::format("{}", x); }

std::string table_text(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
                       OutputFormat format) {
  std::string out;
  if (format == OutputFormat::Csv) {
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        out += format_number(row[c]);
      }
      out += '\n';
    }
    return out;
  }
  Json j = Json::object();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    Json col = Json::array();
    for (const auto& row : rows) col.push_back(row.at(c));
    j[columns[c]] = col;
  }
  return j.dump(1) + "\n";
}

std::string trajectories_text(const std::vector<JumpTrajectory>& ensemble, OutputFormat format) {
  std::vector<std::vector<double>> rows;
  for (const auto& tr : ensemble) {
    const auto id = static_cast<double>(tr.trajectory_id);
    rows.push_back({id, tr.t0, -1.0, static_cast<double>(tr.initial_index)});
    for (const auto& e : tr.events) rows.push_back({id, e.time, static_cast<double>(e.from), static_cast<double>(e.to)});
  }
  return table_text({"trajectory_id", "event_time", "from_index", "to_index"}, rows, format);
}

std::string occupancy_text(const OccupancyStats& stats, OutputFormat format) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < stats.times.size(); ++k)
    for (std::size_t i = 0; i < stats.frequencies[k].size(); ++i)
      rows.push_back({stats.times[k], static_cast<double>(i), stats.frequencies[k][i]});
  return table_text({"time", "index", "frequency"}, rows, format);
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot move output into place at " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace beable
