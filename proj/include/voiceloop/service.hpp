#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "voiceloop/error.hpp"
#include "voiceloop/serialization.hpp"

namespace voiceloop {

struct ServiceConfig {
  std::string data_dir = "voiceloop-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t seed = 20240601;
  int population_count = 50;
  std::string group = "low-f0";
  int n_components = kDefaultComponents;
  int frames = kDefaultFrames;
  std::string media_mode = "inline";  // "inline" | "url"
  std::string directions_path;        // precomputed export; empty: discover on first request
  int http_threads = 4;
};

using EnvLookup = std::function<const char*(const char*)>;

/// Reads an optional JSON config file, then applies VOICELOOP_* overrides.
ServiceConfig load_service_config(const std::string& path, const EnvLookup& env);

int http_status(ErrorCode code);

class VoiceService {
 public:
  explicit VoiceService(ServiceConfig config);

  Json create_session(const Json& request);
  Json get_session(const std::string& id);
  Json post_choice(const std::string& id, const std::string& candidate_id);
  Json satisfy(const std::string& id);
  Json get_trajectory(const std::string& id);
  Json list_targets() const;
  const std::string& basis_text() const { return basis_text_; }
  std::string directions_text();
  Json healthz() const;

  struct Media {
    std::string content_type;
    std::string bytes;
  };
  /// `file` is "<candidate_id>.wav|.png|.mel1" for the current query, or
  /// "reference.<ext>".
  Media media(const std::string& id, const std::string& file);

  const ServiceConfig& config() const { return config_; }
  const ToyPopulation& population() const { return *population_; }
  BasisPtr basis() const { return basis_; }
  std::size_t session_count() const;

 private:
  struct Slot {
    std::mutex mutex;
    std::string id;
    std::string mode;
    std::string target_id;
    std::uint64_t seed = 0;
    SearchSession session;
    SpeechFeatures features;
    std::optional<MelSpectrogram> reference;
    std::array<std::string, 5> candidate_ids;  // canonical offset order
    std::array<int, 5> display;                // display position -> canonical index
    std::string created_at;
    std::string updated_at;
  };

  std::shared_ptr<Slot> find(const std::string& id) const;
  void issue(Slot& slot);
  Json bundle(const Slot& slot) const;
  Json terminal(const Slot& slot) const;
  Json media_block(const Slot& slot, const SpeakerEmbedding& z, const std::string& name) const;
  void append_event(const Json& event);
  void replay_log();
  std::shared_ptr<Slot> build_slot(const Json& created);

  ServiceConfig config_;
  std::shared_ptr<const ToyPopulation> population_;
  BasisPtr basis_;
  std::string basis_text_;
  std::string log_path_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t counter_ = 0;

  std::mutex log_mutex_;
  std::ofstream log_;

  std::mutex directions_mutex_;
  std::optional<std::string> directions_text_;
};

}  // namespace voiceloop
