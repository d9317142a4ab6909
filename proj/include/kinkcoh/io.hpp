#pragma once
// Artifact I/O: JSON with fixed 17-significant-digit floats, CSV, hashing.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace kinkcoh::io {

using Json = nlohmann::ordered_json;

/// printf("%.17g"), with "nan"/"inf" spelled out.
std::string format_double(double v);

/// Serializes with every floating value printed by format_double, so equal
/// documents produce byte-identical files.
std::string dump_json(const Json& doc, int indent = 2);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& doc);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Incremental CSV builder; cells are comma separated, no quoting needed
/// for the numeric/label content produced here.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header);
  Csv& cell(double v);
  Csv& cell(long long v);
  Csv& cell(int v) { return cell(static_cast<long long>(v)); }
  Csv& cell(const std::string& v);
  Csv& cell(const char* v) { return cell(std::string(v)); }
  void end_row();
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::size_t current_ = 0;
  std::string text_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

Json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);
/// Column-major list of columns.
Json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);

}  // namespace kinkcoh::io
