#include "io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mnig::cli {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r\"");
    const auto last = cell.find_last_not_of(" \t\r\"");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Eigen::VectorXd json_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw SchemaError(std::string(what) + " must be a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw SchemaError(std::string(what) + " entries must be numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j, Eigen::Index d) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != d) {
    throw SchemaError("Delta must be a d x d nested array");
  }
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto row = json_vector(j[static_cast<std::size_t>(r)], "Delta row");
    if (row.size() != d) throw SchemaError("Delta must be a d x d nested array");
    m.row(r) = row.transpose();
  }
  return m;
}

double json_number(const nlohmann::json& c, const char* key) {
  if (!c.contains(key) || !c[key].is_number()) {
    throw SchemaError(std::string("component field '") + key + "' must be a number");
  }
  return c[key].get<double>();
}

}  // namespace

std::optional<std::size_t> Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw InputError(path.string() + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw InputError(path.string() + ": empty file");
  if (t.rows.empty()) throw InputError(path.string() + ": no data rows");
  return t;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InputError("non-numeric value '" + cell + "' in column '" + column + "', row " +
                     std::to_string(row + 1));
  }
  return v;
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& columns) {
  const Table t = read_csv(path);
  std::vector<std::size_t> use;
  if (columns.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (t.header[c] != "label") use.push_back(c);
    }
  } else {
    for (const auto& name : columns) {
      const auto c = t.column(name);
      if (!c) throw InputError("column '" + name + "' not found in " + path.string());
      use.push_back(*c);
    }
  }
  if (use.empty()) throw InputError(path.string() + ": no data columns");
  Dataset data;
  data.y.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(use.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < use.size(); ++j) {
      data.y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_number(t.rows[i][use[j]], i, t.header[use[j]]);
    }
  }
  if (const auto lc = t.column("label")) {
    Eigen::VectorXi labels(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double v = parse_number(t.rows[i][*lc], i, "label");
      labels[static_cast<Eigen::Index>(i)] = static_cast<int>(std::lround(v));
    }
    data.labels = std::move(labels);
  }
  return data;
}

Eigen::VectorXi load_labels(const std::filesystem::path& path) {
  const Table t = read_csv(path);
  auto c = t.column("label");
  if (!c) {
    if (t.header.size() != 1) throw SchemaError(path.string() + ": no 'label' column");
    c = 0;
  }
  Eigen::VectorXi labels(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double v = parse_number(t.rows[i][*c], i, t.header[*c]);
    if (v != std::round(v)) throw SchemaError(path.string() + ": labels must be integers");
    labels[static_cast<Eigen::Index>(i)] = static_cast<int>(v);
  }
  return labels;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

MixtureModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("model spec must be a JSON object");
  if (!j.contains("weights") || !j.contains("components")) {
    throw SchemaError("model spec needs 'weights' and 'components'");
  }
  const auto& comps = j["components"];
  if (!comps.is_array() || comps.empty()) throw SchemaError("'components' must be a non-empty array");
  MixtureModel m;
  m.weights = json_vector(j["weights"], "weights");
  if (m.weights.size() != static_cast<Eigen::Index>(comps.size())) {
    throw SchemaError("one weight per component required");
  }
  for (const auto& c : comps) {
    if (!c.is_object() || !c.contains("mu") || !c.contains("beta") || !c.contains("Delta")) {
      throw SchemaError("each component needs mu, beta, delta, gamma and Delta");
    }
    const auto mu = json_vector(c["mu"], "mu");
    const auto beta = json_vector(c["beta"], "beta");
    if (beta.size() != mu.size()) throw SchemaError("mu and beta must have equal length");
    const auto Delta = json_matrix(c["Delta"], mu.size());
    try {
      m.components.emplace_back(mu, beta, json_number(c, "delta"), json_number(c, "gamma"), Delta);
    } catch (const std::domain_error& e) {
      throw SchemaError(std::string("invalid component: ") + e.what());
    }
  }
  try {
    m.validate();
  } catch (const std::domain_error& e) {
    throw SchemaError(std::string("invalid model: ") + e.what());
  }
  return m;
}

nlohmann::json model_to_json(const MixtureModel& model) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["weights"] = vec(model.weights);
  j["components"] = nlohmann::json::array();
  for (const auto& c : model.components) {
    nlohmann::json Delta = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.dim(); ++r) Delta.push_back(vec(c.Delta().row(r).transpose()));
    j["components"].push_back({{"mu", vec(c.mu())},
                               {"beta", vec(c.beta())},
                               {"delta", c.delta()},
                               {"gamma", c.gamma()},
                               {"Delta", Delta}});
  }
  return j;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace mnig::cli
