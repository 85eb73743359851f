#include "ced/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ced::nn {

namespace {

constexpr char kMagic[8] = {'C', 'E', 'D', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta) {
  nlohmann::json header;
  header["meta"] = meta;
  nlohmann::json plist = nlohmann::json::array();
  const auto all = params.all();
  for (const Parameter* p : all) {
    nlohmann::json e;
    e["name"] = p->name;
    e["shape"] = p->value.shape();
    e["trainable"] = p->trainable;
    plist.push_back(std::move(e));
  }
  header["params"] = std::move(plist);
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Parameter* p : all)
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.numel() * sizeof(double)));
  if (!os) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

nlohmann::json load_checkpoint(const std::string& path, ParamStore& params) {
  if (params.size() != 0)
    throw std::invalid_argument("load_checkpoint: target ParamStore must be empty");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
  const std::uint64_t hlen = read_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("load_checkpoint: truncated header in '" + path + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: bad header in '" + path + "': " + e.what());
  }
  for (const auto& e : header.at("params")) {
    const std::string name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    const bool trainable = e.at("trainable").get<bool>();
    Parameter& p = params.create(name, Tensor::zeros(shape), trainable);
    is.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() * sizeof(double)));
    if (!is)
      throw std::runtime_error("load_checkpoint: truncated payload for '" + name + "' in '" +
                               path + "'");
  }
  return header.at("meta");
}

}  // namespace ced::nn
