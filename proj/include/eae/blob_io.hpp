#ifndef EAE_BLOB_IO_HPP
#define EAE_BLOB_IO_HPP

// Container used for checkpoints, ensembles and dataset caches:
//
//   line 1: the magic "EAEBLOB1"
//   line 2: a single-line JSON header; "payload_count" gives the number of
//           doubles that follow
//   rest:   payload_count little-endian IEEE-754 binary64 values
//
// Named arrays inside the payload are described by a "blocks" list of
// {name, offset, rows, cols} records in the header.

#include "eae/core.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace eae::io {

struct Blob {
  nlohmann::json header = nlohmann::json::object();
  std::vector<double> payload;

  /// Appends a rows x cols row-major array and records it in header["blocks"].
  void add_block(const std::string& name, const double* data, Index rows, Index cols);
  void add_block(const std::string& name, const BatchXd& m);
  void add_block(const std::string& name, const VectorXd& v);

  bool has_block(const std::string& name) const;
  BatchXd matrix(const std::string& name) const;
  VectorXd vector(const std::string& name) const;
};

void write_blob(const std::filesystem::path& path, const Blob& blob);
Blob read_blob(const std::filesystem::path& path);

}  // namespace eae::io

#endif  // EAE_BLOB_IO_HPP
