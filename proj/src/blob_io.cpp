#include "eae/blob_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace eae::io {

namespace {

constexpr const char* kMagic = "EAEBLOB1";

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

const nlohmann::json& find_block(const nlohmann::json& header, const std::string& name) {
  if (header.contains("blocks")) {
    for (const auto& b : header["blocks"]) {
      if (b.at("name") == name) return b;
    }
  }
  throw FormatError("blob has no block named '" + name + "'", 0);
}

}  // namespace

void Blob::add_block(const std::string& name, const double* data, Index rows, Index cols) {
  if (!header.contains("blocks")) header["blocks"] = nlohmann::json::array();
  header["blocks"].push_back(
      {{"name", name}, {"offset", payload.size()}, {"rows", rows}, {"cols", cols}});
  payload.insert(payload.end(), data, data + rows * cols);
}

void Blob::add_block(const std::string& name, const BatchXd& m) {
  add_block(name, m.data(), m.rows(), m.cols());
}

void Blob::add_block(const std::string& name, const VectorXd& v) {
  add_block(name, v.data(), v.size(), 1);
}

bool Blob::has_block(const std::string& name) const {
  if (!header.contains("blocks")) return false;
  for (const auto& b : header["blocks"]) {
    if (b.at("name") == name) return true;
  }
  return false;
}

BatchXd Blob::matrix(const std::string& name) const {
  const auto& b = find_block(header, name);
  const auto offset = b.at("offset").get<std::size_t>();
  const auto rows = b.at("rows").get<Index>();
  const auto cols = b.at("cols").get<Index>();
  if (offset + static_cast<std::size_t>(rows * cols) > payload.size()) {
    throw FormatError("block '" + name + "' extends past the payload", 0);
  }
  return Eigen::Map<const BatchXd>(payload.data() + offset, rows, cols);
}

VectorXd Blob::vector(const std::string& name) const {
  const BatchXd m = matrix(name);
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

void write_blob(const std::filesystem::path& path, const Blob& blob) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  nlohmann::json header = blob.header;
  header["payload_count"] = blob.payload.size();
  out << kMagic << '\n' << header.dump() << '\n';
  for (double v : blob.payload) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

Blob read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw FormatError("bad blob magic in '" + path.string() + "'", 0);
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw FormatError("missing blob header in '" + path.string() + "'",
                      static_cast<std::int64_t>(magic.size() + 1));
  }
  Blob blob;
  try {
    blob.header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed blob header: ") + e.what(),
                      static_cast<std::int64_t>(magic.size() + 1));
  }
  const auto count = blob.header.value("payload_count", std::size_t{0});
  const auto payload_start = static_cast<std::int64_t>(in.tellg());
  blob.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    if (!in) {
      throw FormatError("truncated blob payload in '" + path.string() + "'",
                        payload_start + static_cast<std::int64_t>(8 * i));
    }
    blob.payload[i] = std::bit_cast<double>(to_little_endian(bits));
  }
  blob.header.erase("payload_count");
  return blob;
}

}  // namespace eae::io
