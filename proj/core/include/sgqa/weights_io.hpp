#pragma once
// Versioned flat-binary weight files with a JSON shape sidecar. Blocks are
// written in name order, so identical parameter stores produce identical
// bytes. Layout: magic "SGQAWB01", u32 format version, u32 block count,
// then per block u32 name length, name bytes, u32 rows, u32 cols, and
// row-major little-endian f64 data.

#include <string>

#include <nlohmann/json.hpp>

#include "sgqa/autodiff.hpp"

namespace sgqa {

inline constexpr char kWeightsMagic[9] = "SGQAWB01";
inline constexpr uint32_t kWeightsVersion = 1;

// Writes the binary at `path` and a shape sidecar at `path` + ".json".
// A non-null `header` is embedded first in the sidecar for provenance.
void save_weights(const ParamStore& params, const std::string& path,
                  const nlohmann::ordered_json& header = nullptr);

// Fills `params` from the file. An empty store takes the file's blocks; a
// populated store must match block names and shapes exactly.
// Throws MalformedDocument on format or shape problems.
void load_weights(ParamStore& params, const std::string& path);

}  // namespace sgqa
