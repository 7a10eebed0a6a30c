#pragma once
// Artifact persistence conventions shared by every tool output: a header
// object embedding the configuration hash, seed, and tool version sits at the
// top of each file (first line of JSON-lines files, "header" field of JSON
// documents), so any artifact can be traced back to the run that produced it.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgqa/errors.hpp"
#include "sgqa/version.hpp"

namespace sgqa {

using Json = nlohmann::ordered_json;

// 16 lowercase hex digits of the FNV-1a hash of the canonical (sorted-key,
// compact) dump, so key order in the source document does not matter.
std::string config_hash(const Json& config);

Json artifact_header(const std::string& kind, const std::string& cfg_hash,
                     uint64_t seed);

// JSON-lines file: header line followed by one record per line.
void write_jsonl(const std::string& path, const Json& header,
                 const std::vector<Json>& records);
// Reads all record lines; the header line (if present) is returned separately.
std::vector<Json> read_jsonl(const std::string& path, Json* header = nullptr);

// Whole-document JSON with a newline-terminated 2-space dump.
void save_json_file(const std::string& path, const Json& doc);
Json load_json_file(const std::string& path);

}  // namespace sgqa
