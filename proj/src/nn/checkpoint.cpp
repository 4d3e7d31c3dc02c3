#include "contextnav/nn/checkpoint.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace contextnav::nn {

namespace {

constexpr uint32_t kMagic = 0x434e4350;  // "CNCP"
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::string manifest_path(const std::string& path) {
  return std::filesystem::path(path).replace_extension(".json").string();
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path,
                     const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(params.names().size()));
  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape}});
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);

  manifest["meta"] = meta_json.empty() ? nlohmann::json() : nlohmann::json::parse(meta_json);
  std::ofstream mout(manifest_path(path));
  if (!mout) throw std::runtime_error("checkpoint: cannot write manifest for " + path);
  mout << manifest.dump(2) << "\n";
}

std::string load_checkpoint(ParamStore& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  if (read_u32(in) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  if (read_u32(in) != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const uint32_t count = read_u32(in);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndim = read_u32(in);
    std::vector<int> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(read_u32(in));
    Tensor& t = params.contains(name) ? params.at(name) : params.create(name, shape);
    if (t.shape != shape)
      throw std::runtime_error("checkpoint: shape mismatch for tensor " + name);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
  }
  return read_checkpoint_meta(path);
}

std::string read_checkpoint_meta(const std::string& path) {
  std::ifstream min(manifest_path(path));
  if (!min) throw std::runtime_error("checkpoint: missing manifest for " + path);
  nlohmann::json manifest;
  min >> manifest;
  if (!manifest.contains("meta") || manifest["meta"].is_null()) return "";
  return manifest["meta"].dump();
}

}  // namespace contextnav::nn
