// SPDX-License-Identifier: Apache-2.0
#include "lmot/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "lmot/common.hpp"

namespace lmot::nn {

namespace {

constexpr char kMagic[8] = {'L', 'M', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// All numeric fields little-endian; this build targets LE hosts only.
static_assert(std::endian::native == std::endian::little, "little-endian host required");

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ValidationError("checkpoint '" + path + "': bad magic");
  std::uint32_t version = 0;
  std::uint64_t json_len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
  if (!in || version != kVersion)
    throw ValidationError("checkpoint '" + path + "': unsupported version");
  std::string raw(json_len, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(json_len));
  if (!in) throw ValidationError("checkpoint '" + path + "': truncated header");
  nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded()) throw ValidationError("checkpoint '" + path + "': malformed index");
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const nlohmann::json& meta) {
  nlohmann::json index;
  index["meta"] = meta;
  index["params"] = nlohmann::json::array();
  std::uint64_t offset = 0;  // in doubles, relative to payload start
  for (const auto& p : params.all()) {
    index["params"].push_back({{"name", p.name()},
                               {"rows", p.rows()},
                               {"cols", p.cols()},
                               {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value().size());
  }
  const std::string raw = index.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("checkpoint '" + path + "': cannot open for writing");
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t json_len = raw.size();
  out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  for (const auto& p : params.all()) {
    const auto& v = p.value();
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const double x = v(r, c);
        out.write(reinterpret_cast<const char*>(&x), sizeof(x));
      }
  }
  if (!out) throw ValidationError("checkpoint '" + path + "': write failed");
}

nlohmann::json load_checkpoint(const std::string& path, ParameterStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint '" + path + "': cannot open");
  nlohmann::json index = read_header(in, path);
  const std::streampos payload_start = in.tellg();

  for (auto p : params.all()) {
    const nlohmann::json* entry = nullptr;
    for (const auto& e : index["params"])
      if (e["name"].get<std::string>() == p.name()) {
        entry = &e;
        break;
      }
    if (!entry)
      throw ValidationError("checkpoint '" + path + "': missing parameter '" + p.name() + "'");
    const auto rows = (*entry)["rows"].get<Eigen::Index>();
    const auto cols = (*entry)["cols"].get<Eigen::Index>();
    if (rows != p.rows() || cols != p.cols())
      throw ValidationError("checkpoint '" + path + "': shape mismatch for '" + p.name() + "'");
    const auto offset = (*entry)["offset"].get<std::uint64_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(double)));
    auto& v = p.mutable_value();
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double x = 0;
        in.read(reinterpret_cast<char*>(&x), sizeof(x));
        v(r, c) = x;
      }
    if (!in) throw ValidationError("checkpoint '" + path + "': truncated payload");
  }
  return index["meta"];
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("checkpoint '" + path + "': cannot open");
  return read_header(in, path)["meta"];
}

}  // namespace lmot::nn
