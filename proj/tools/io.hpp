#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "mnig/mnig_core.hpp"

namespace mnig::cli {

/// Unreadable or malformed input data (exit code 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid model specification or label file (exit code 4).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

/// Comma-separated with a header row. Throws InputError on an unreadable or
/// empty file and on ragged rows.
Table read_csv(const std::filesystem::path& path);

double parse_number(const std::string& cell, std::size_t row, const std::string& column);

/// Numeric observation matrix. With no explicit column list, every column
/// except `label` is used; a `label` column becomes the dataset labels.
Dataset load_dataset(const std::filesystem::path& path,
                     const std::vector<std::string>& columns = {});

/// The `label` column, or the only column of a single-column file.
Eigen::VectorXi load_labels(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Model specification:
/// {"weights": [...], "components": [{"mu", "beta", "delta", "gamma", "Delta"}]}.
MixtureModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const MixtureModel& model);

nlohmann::json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mnig::cli
