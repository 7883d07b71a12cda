#include "churn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace churn {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

constexpr std::size_t kMagicLen = sizeof(kContainerMagic) - 1;

std::size_t element_count(const std::vector<Index>& shape) {
  std::size_t n = 1;
  for (Index d : shape) {
    if (d < 0) throw Error("negative array dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

const NamedArray& Container::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw Error("container has no array named '" + name + "'");
}

void Container::add(std::string name, std::vector<Index> shape, std::vector<float> data) {
  if (element_count(shape) != data.size())
    throw DimensionError("array '" + name + "' shape does not match its data length");
  arrays.push_back({std::move(name), std::move(shape), std::move(data)});
}

Matrix<float> Container::matrix(const std::string& name) const {
  const auto& a = array(name);
  Index rows = a.shape.empty() ? 1 : a.shape[0];
  Index cols = a.shape.size() >= 2 ? a.shape[1] : 1;
  if (a.shape.size() > 2) throw DimensionError("array '" + name + "' is not 2-D");
  return Eigen::Map<const RowMatrix<float>>(a.data.data(), rows, cols);
}

std::string encode_container(const Container& c) {
  nlohmann::json manifest;
  manifest["format_version"] = kContainerVersion;
  manifest["kind"] = c.kind;
  manifest["meta"] = c.meta;
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : c.arrays) {
    manifest["arrays"].push_back(
        {{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.data.size()}});
    offset += a.data.size() * sizeof(float);
  }
  std::string text = manifest.dump();

  std::string out(kContainerMagic, kMagicLen);
  std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += text;
  for (const auto& a : c.arrays)
    out.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
  return out;
}

Container decode_container(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < kMagicLen || bytes.compare(0, 4, kContainerMagic, 4) != 0)
    throw ParseError(origin + ": not a CHKV container (bad magic bytes)");
  if (bytes.compare(0, kMagicLen, kContainerMagic, kMagicLen) != 0)
    throw ParseError(origin + ": unsupported container version '" + bytes.substr(0, kMagicLen) +
                     "', expected '" + kContainerMagic + "'");
  std::size_t pos = kMagicLen;
  std::uint64_t len = 0;
  if (bytes.size() < pos + sizeof(len)) throw ParseError(origin + ": truncated container header");
  std::memcpy(&len, bytes.data() + pos, sizeof(len));
  pos += sizeof(len);
  if (bytes.size() - pos < len) throw ParseError(origin + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(origin + ": malformed manifest: " + e.what());
  }
  pos += len;
  if (manifest.value("format_version", 0) != kContainerVersion)
    throw ParseError(origin + ": manifest format_version mismatch");

  Container c;
  c.kind = manifest.value("kind", "");
  c.meta = manifest.value("meta", nlohmann::json::object());
  const std::size_t data_start = pos;
  for (const auto& entry : manifest.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.shape = entry.at("shape").get<std::vector<Index>>();
    auto offset = entry.at("offset").get<std::uint64_t>();
    auto count = entry.at("count").get<std::uint64_t>();
    if (element_count(a.shape) != count)
      throw ParseError(origin + ": array '" + a.name + "' shape disagrees with manifest count");
    if (bytes.size() < data_start + offset + count * sizeof(float))
      throw ParseError(origin + ": truncated data for array '" + a.name + "'");
    a.data.resize(count);
    std::memcpy(a.data.data(), bytes.data() + data_start + offset, count * sizeof(float));
    c.arrays.push_back(std::move(a));
  }
  return c;
}

void write_container(const Container& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto bytes = encode_container(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str(), path.string());
}

}  // namespace churn
