#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "persistnet/errors.hpp"

namespace persistnet::cli {

/// A rerun produced artifacts that differ from the ones its manifest recorded.
class ReproducibilityMismatch : public Error {
 public:
  using Error::Error;
};

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

struct Manifest {
  std::string command;
  nlohmann::ordered_json config;  // effective config plus command arguments
  nlohmann::ordered_json seeds;
  std::map<std::string, std::string> inputs;     // path -> sha256
  std::map<std::string, std::string> artifacts;  // path -> sha256

  std::string config_hash() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config"] = config;
    j["inputs"] = inputs;
    return sha256_hex(j.dump());
  }
};

enum class ManifestStatus { written, verified };

/// Writes the manifest. When one already exists for the same config hash, its
/// artifact checksums must match the new ones (ReproducibilityMismatch otherwise).
inline ManifestStatus write_manifest(const Manifest& m, const std::string& path) {
  const std::string hash = m.config_hash();
  ManifestStatus status = ManifestStatus::written;
  if (std::filesystem::exists(path)) {
    nlohmann::json old;
    try {
      old = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception&) {
      old = nullptr;
    }
    if (old.is_object() && old.value("config_hash", "") == hash && old.contains("artifacts")) {
      const auto recorded = old.at("artifacts").get<std::map<std::string, std::string>>();
      for (const auto& [name, sum] : m.artifacts) {
        auto it = recorded.find(name);
        if (it != recorded.end() && it->second != sum) {
          throw ReproducibilityMismatch("artifact " + name + " differs from the checksum recorded in " +
                                        path);
        }
      }
      status = ManifestStatus::verified;
    }
  }
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_hash"] = hash;
  j["seeds"] = m.seeds;
  j["inputs"] = m.inputs;
  j["artifacts"] = m.artifacts;
  j["config"] = m.config;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path);
  return status;
}

}  // namespace persistnet::cli
