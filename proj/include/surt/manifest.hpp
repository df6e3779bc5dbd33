#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace surt {

const char* library_version();

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::string& path);

struct InputDigest {
  std::string path;
  std::string sha256;
};

// Provenance record written as manifest.json into every command's output
// directory. The timestamps live here and nowhere else, so every other
// artifact of a rerun is byte-comparable.
struct RunManifest {
  std::string command;
  nlohmann::json resolved_config;
  std::vector<InputDigest> inputs;
  std::uint64_t seed = 0;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;
  std::vector<std::string> artifacts;  // file names inside the output dir
  std::string version;
  std::string error;  // empty on success
};

std::string iso_utc_now();

nlohmann::json manifest_json(const RunManifest& m);

void write_manifest(const std::string& outdir, const RunManifest& m);

}  // namespace surt
