#pragma once

#include <string>

#include <json.hpp>

#include "ced/tape.hpp"

namespace ced::nn {

// Checkpoint file layout:
//   bytes 0..7   magic "CEDCKPT1"
//   u64 (LE)     header length in bytes
//   header       UTF-8 JSON: {"meta": {...}, "params": [{name, shape,
//                trainable}, ...]} with params listed in store order
//   payload      for each listed param, its entries as little-endian
//                64-bit floats, row-major, concatenated in list order
//
// `meta` is caller-defined (resolved config, vocabularies, step counter,
// config hash). Serialization is deterministic: params in sorted name order,
// JSON keys sorted.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta);

// Populates `params` (must be empty) from the file and returns the meta
// object.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& params);

}  // namespace ced::nn
