#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace voiceloop {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a 64 over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

struct Provenance {
  std::string tool_version = kToolVersion;
  std::uint64_t master_seed = 0;
  std::map<std::string, std::string> input_digests;

  void add_input(const std::string& name, std::string_view bytes) { input_digests[name] = hex64(fnv1a64(bytes)); }
};

}  // namespace voiceloop
