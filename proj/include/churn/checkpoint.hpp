#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "churn/common.hpp"

namespace churn {

/// Binary container shared by model checkpoints and alignment transforms:
///
///   "CHKV1" | u64 LE manifest length | manifest (UTF-8 JSON) | f32 LE arrays
///
/// The manifest holds {"format_version", "kind", "meta", "arrays": [{name,
/// shape, offset, count}]} with offsets in bytes from the start of the data
/// section.
struct NamedArray {
  std::string name;
  std::vector<Index> shape;
  std::vector<float> data;
};

struct Container {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& array(const std::string& name) const;
  void add(std::string name, std::vector<Index> shape, std::vector<float> data);

  template <typename Derived>
  void add_matrix(std::string name, const Eigen::MatrixBase<Derived>& m) {
    RowMatrix<float> rm = m.template cast<float>();
    add(std::move(name), {rm.rows(), rm.cols()},
        std::vector<float>(rm.data(), rm.data() + rm.size()));
  }

  /// Reads a 2-D array back; a 1-D array comes back as a column.
  Matrix<float> matrix(const std::string& name) const;
};

inline constexpr char kContainerMagic[] = "CHKV1";
inline constexpr int kContainerVersion = 1;

void write_container(const Container& c, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace churn
