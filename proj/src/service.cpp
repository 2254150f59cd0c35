#include "voiceloop/service.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <numeric>

#include "voiceloop/error.hpp"
#include "voiceloop/media.hpp"
#include "voiceloop/random.hpp"

namespace voiceloop {

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::array<std::string, 3> kModes{"practice", "evaluation", "freeform"};

template <typename T>
T parse_number(const std::string& name, const char* text) {
  try {
    std::size_t used = 0;
    const std::string s(text);
    T v{};
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      v = std::stoull(s, &used);
    } else {
      v = static_cast<T>(std::stoll(s, &used));
    }
    require(used == s.size(), ErrorCode::InvalidConfig, name + ": trailing characters");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidConfig, name + ": not a number '" + std::string(text) + "'");
  }
}

}  // namespace

ServiceConfig load_service_config(const std::string& path, const EnvLookup& env) {
  ServiceConfig c;
  if (!path.empty()) {
    const Json j = parse_json(read_file(path));
    try {
      c.data_dir = j.value("data_dir", c.data_dir);
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.seed = j.value("seed", c.seed);
      c.population_count = j.value("population_count", c.population_count);
      c.group = j.value("group", c.group);
      c.n_components = j.value("n_components", c.n_components);
      c.frames = j.value("frames", c.frames);
      c.media_mode = j.value("media_mode", c.media_mode);
      c.directions_path = j.value("directions_path", c.directions_path);
      c.http_threads = j.value("http_threads", c.http_threads);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, e.what());
    }
  }
  if (env) {
    if (const char* v = env("VOICELOOP_DATA_DIR")) c.data_dir = v;
    if (const char* v = env("VOICELOOP_HOST")) c.host = v;
    if (const char* v = env("VOICELOOP_PORT")) c.port = parse_number<int>("VOICELOOP_PORT", v);
    if (const char* v = env("VOICELOOP_SEED")) c.seed = parse_number<std::uint64_t>("VOICELOOP_SEED", v);
    if (const char* v = env("VOICELOOP_POPULATION_COUNT"))
      c.population_count = parse_number<int>("VOICELOOP_POPULATION_COUNT", v);
    if (const char* v = env("VOICELOOP_GROUP")) c.group = v;
    if (const char* v = env("VOICELOOP_N_COMPONENTS")) c.n_components = parse_number<int>("VOICELOOP_N_COMPONENTS", v);
    if (const char* v = env("VOICELOOP_FRAMES")) c.frames = parse_number<int>("VOICELOOP_FRAMES", v);
    if (const char* v = env("VOICELOOP_MEDIA_MODE")) c.media_mode = v;
    if (const char* v = env("VOICELOOP_DIRECTIONS_PATH")) c.directions_path = v;
    if (const char* v = env("VOICELOOP_HTTP_THREADS")) c.http_threads = parse_number<int>("VOICELOOP_HTTP_THREADS", v);
  }
  require(c.group == "low-f0" || c.group == "high-f0", ErrorCode::InvalidConfig, "group must be low-f0 or high-f0");
  require(c.media_mode == "inline" || c.media_mode == "url", ErrorCode::InvalidConfig, "media_mode must be inline or url");
  require(c.port >= 0 && c.port < 65536, ErrorCode::InvalidConfig, "port out of range");
  require(c.http_threads >= 1, ErrorCode::InvalidConfig, "http_threads must be positive");
  return c;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownTarget: return 404;
    case ErrorCode::StaleCandidate:
    case ErrorCode::SessionNotActive: return 409;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

VoiceService::VoiceService(ServiceConfig config) : config_(std::move(config)) {
  auto [low, high] = build_population(config_.population_count, config_.seed);
  population_ = std::make_shared<const ToyPopulation>(config_.group == "low-f0" ? std::move(low) : std::move(high));
  PcaBasis basis = fit_pca(population_->embeddings, config_.n_components);
  Provenance prov;
  prov.master_seed = config_.seed;
  basis.provenance = prov;
  basis_ = std::make_shared<const PcaBasis>(std::move(basis));
  basis_text_ = dump(basis_to_json(*basis_));

  std::filesystem::create_directories(config_.data_dir);
  log_path_ = (std::filesystem::path(config_.data_dir) / "events.jsonl").string();
  replay_log();
  log_.open(log_path_, std::ios::app);
  require(static_cast<bool>(log_), ErrorCode::IoError, "cannot open event log '" + log_path_ + "'");
}

std::size_t VoiceService::session_count() const {
  std::shared_lock lock(sessions_mutex_);
  return sessions_.size();
}

void VoiceService::append_event(const Json& event) {
  std::lock_guard lock(log_mutex_);
  log_ << event.dump() << '\n';
  log_.flush();
  require(static_cast<bool>(log_), ErrorCode::IoError, "event log write failed");
}

std::shared_ptr<VoiceService::Slot> VoiceService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorCode::UnknownSession, "no session '" + id + "'");
  return it->second;
}

std::shared_ptr<VoiceService::Slot> VoiceService::build_slot(const Json& created) {
  auto slot = std::make_shared<Slot>();
  slot->id = created.at("session_id").get<std::string>();
  slot->mode = created.at("mode").get<std::string>();
  slot->target_id = created.value("target_id", std::string());
  slot->seed = created.value("seed", std::uint64_t{0});
  slot->created_at = created.value("at", std::string());
  slot->updated_at = slot->created_at;
  const VoiceContext voice = population_->context();
  if (!slot->target_id.empty()) {
    const int t = population_->index_of(slot->target_id);
    require(t >= 0, ErrorCode::UnknownTarget, "unknown target '" + slot->target_id + "'");
    slot->features = target_features(config_.seed, slot->target_id, config_.frames);
    if (slot->mode != "freeform") slot->reference = synthesize(slot->features, population_->embeddings[t], voice);
  } else {
    slot->features = target_features(config_.seed, "freeform:" + std::to_string(slot->seed), config_.frames);
  }
  slot->session = start_session(basis_, config_from_json(created.at("config")), {vector_from_json(created.at("init"))});
  return slot;
}

void VoiceService::issue(Slot& slot) {
  const int q = slot.session.iteration;
  const std::uint64_t sid = hash_string(slot.id);
  for (int j = 0; j < 5; ++j)
    slot.candidate_ids[j] =
        "c" + hex64(derive_seed({sid, static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(j)})).substr(0, 15);
  std::iota(slot.display.begin(), slot.display.end(), 0);
  Rng rng(derive_seed({sid, static_cast<std::uint64_t>(q), 0x646973706c6179ULL}));
  for (int i = 4; i > 0; --i) std::swap(slot.display[i], slot.display[rng.below(i + 1)]);
}

Json VoiceService::media_block(const Slot& slot, const SpeakerEmbedding& z, const std::string& name) const {
  if (config_.media_mode == "url") {
    const std::string base = "/sessions/" + slot.id + "/media/" + name;
    return {{"spectrogram", {{"mel1_url", base + ".mel1"}, {"png_url", base + ".png"}}}, {"audio", {{"url", base + ".wav"}}}};
  }
  const VoiceContext voice = population_->context();
  const MelSpectrogram mel = synthesize(slot.features, z, voice);
  const Eigen::VectorXd f0 = f0_track(slot.features, embed_to_params(z, *voice.mixing_map), voice.base_f0_hz);
  return {{"spectrogram", {{"mel1_base64", base64_encode(encode_mel1(mel.frames))}, {"png_base64", base64_encode(spectrogram_png(mel))}}},
          {"audio", {{"wav_base64", base64_encode(encode_wav(render_waveform(mel, f0)))}}}};
}

Json VoiceService::bundle(const Slot& slot) const {
  const CandidateSet set = next_candidates(slot.session);
  Json cands = Json::array();
  for (int pos = 0; pos < 5; ++pos) {
    const int j = slot.display[pos];
    Json c = {{"candidate_id", slot.candidate_ids[j]}, {"position", pos}};
    c.update(media_block(slot, set.candidates[j], slot.candidate_ids[j]));
    cands.push_back(std::move(c));
  }
  Json b = {{"session_id", slot.id},
            {"mode", slot.mode},
            {"status", to_string(slot.session.status)},
            {"query_index", set.query_index},
            {"max_queries", slot.session.config.max_queries},
            {"direction_index", set.direction_index},
            {"scale", set.scale},
            {"keep_current_candidate_id", slot.candidate_ids[offset_index(0)]},
            {"candidates", cands}};
  if (slot.reference) {
    const int t = population_->index_of(slot.target_id);
    Json ref = {{"target_id", slot.target_id}};
    ref.update(media_block(slot, population_->embeddings[t], "reference"));
    b["reference"] = ref;
  }
  return b;
}

Json VoiceService::terminal(const Slot& slot) const {
  return {{"session_id", slot.id},
          {"mode", slot.mode},
          {"status", to_string(slot.session.status)},
          {"queries_completed", slot.session.iteration},
          {"final_embedding", vector_to_json(slot.session.current.values)},
          {"trajectory", trajectory_to_json(trajectory(slot.session))}};
}

Json VoiceService::create_session(const Json& request) {
  require(request.is_object(), ErrorCode::InvalidArgument, "request body must be a JSON object");
  const std::string mode = request.value("mode", std::string());
  require(std::find(kModes.begin(), kModes.end(), mode) != kModes.end(), ErrorCode::InvalidConfig,
          "mode must be practice, evaluation or freeform");
  const std::string target = request.contains("target_id") && !request["target_id"].is_null()
                                 ? request["target_id"].get<std::string>()
                                 : std::string();
  require(mode != "evaluation" || !target.empty(), ErrorCode::InvalidConfig, "evaluation mode needs a target_id");
  int target_index = -1;
  if (!target.empty()) {
    target_index = population_->index_of(target);
    require(target_index >= 0, ErrorCode::UnknownTarget, "unknown target '" + target + "'");
  }
  const std::uint64_t seed = request.value("seed", std::uint64_t{0});

  SpeakerEmbedding init;
  if (request.contains("init")) {
    init = {vector_from_json(request["init"])};
    require(init.dimension() == basis_->dimension(), ErrorCode::DimensionMismatch, "init has wrong dimension");
  } else if (request.contains("init_id")) {
    const int i = population_->index_of(request["init_id"].get<std::string>());
    require(i >= 0, ErrorCode::UnknownTarget, "unknown init_id");
    init = population_->embeddings[i];
  } else {
    Rng rng(derive_seed({config_.seed, seed, hash_string(target), 0x696e6974ULL}));
    int i = static_cast<int>(rng.below(population_->size() - (target_index >= 0 ? 1 : 0)));
    if (target_index >= 0 && i >= target_index) ++i;
    init = population_->embeddings[i];
  }
  SearchConfig overrides;
  overrides.n_directions = basis_->n_components();
  if (request.contains("config")) {
    const Json& c = request["config"];
    require(c.is_object(), ErrorCode::InvalidConfig, "config must be an object");
    overrides = config_from_json(c);
    if (!c.contains("n_directions")) overrides.n_directions = basis_->n_components();
  }
  const SearchConfig resolved = resolve_config(*basis_, overrides);

  Json created = {{"type", "created"},     {"mode", mode},
                  {"target_id", target},   {"seed", seed},
                  {"init", vector_to_json(init.values)}, {"config", config_to_json(resolved)},
                  {"at", now_iso()}};
  std::shared_ptr<Slot> slot;
  {
    std::unique_lock lock(sessions_mutex_);
    std::string id;
    do {
      const auto stamp = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
      id = "s" + hex64(derive_seed({config_.seed, ++counter_, stamp})).substr(0, 15);
    } while (sessions_.count(id) != 0);
    created["session_id"] = id;
    slot = build_slot(created);
    issue(*slot);
    sessions_[id] = slot;
  }
  std::lock_guard slot_lock(slot->mutex);
  append_event(created);
  Json issued = {{"type", "candidates_issued"}, {"session_id", slot->id}, {"query_index", 0}, {"candidate_ids", Json::array()}};
  for (int pos = 0; pos < 5; ++pos) issued["candidate_ids"].push_back(slot->candidate_ids[slot->display[pos]]);
  append_event(issued);
  return bundle(*slot);
}

Json VoiceService::get_session(const std::string& id) {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  Json j = {{"session_id", slot->id},
            {"mode", slot->mode},
            {"target_id", slot->target_id},
            {"status", to_string(slot->session.status)},
            {"query_index", slot->session.iteration},
            {"created_at", slot->created_at},
            {"updated_at", slot->updated_at},
            {"snapshot", session_to_json(slot->session)}};
  if (slot->session.status == SessionStatus::AwaitingChoice) j["bundle"] = bundle(*slot);
  return j;
}

Json VoiceService::post_choice(const std::string& id, const std::string& candidate_id) {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  require(slot->session.status == SessionStatus::AwaitingChoice, ErrorCode::SessionNotActive,
          "session is " + to_string(slot->session.status));
  const auto it = std::find(slot->candidate_ids.begin(), slot->candidate_ids.end(), candidate_id);
  require(it != slot->candidate_ids.end(), ErrorCode::StaleCandidate,
          "candidate '" + candidate_id + "' is not part of query " + std::to_string(slot->session.iteration));
  const int offset = kOffsets[it - slot->candidate_ids.begin()];
  const int query = slot->session.iteration;
  slot->session = submit_choice(slot->session, offset);
  slot->updated_at = now_iso();
  append_event({{"type", "choice"},
                {"session_id", slot->id},
                {"query_index", query},
                {"offset", offset},
                {"candidate_id", candidate_id},
                {"at", slot->updated_at}});
  if (slot->session.status != SessionStatus::AwaitingChoice) return terminal(*slot);
  issue(*slot);
  Json issued = {{"type", "candidates_issued"}, {"session_id", slot->id}, {"query_index", slot->session.iteration},
                 {"candidate_ids", Json::array()}};
  for (int pos = 0; pos < 5; ++pos) issued["candidate_ids"].push_back(slot->candidate_ids[slot->display[pos]]);
  append_event(issued);
  return bundle(*slot);
}

Json VoiceService::satisfy(const std::string& id) {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  slot->session = mark_satisfied(slot->session);
  slot->updated_at = now_iso();
  append_event({{"type", "satisfied"}, {"session_id", slot->id}, {"at", slot->updated_at}});
  return terminal(*slot);
}

Json VoiceService::get_trajectory(const std::string& id) {
  auto slot = find(id);
  SearchSession session;
  {
    std::lock_guard lock(slot->mutex);
    session = slot->session;
  }
  const auto points = trajectory(session);
  Json j = {{"session_id", slot->id}, {"mode", slot->mode}, {"status", to_string(session.status)},
            {"points", trajectory_to_json(points)}};
  if (slot->mode == "evaluation" && slot->reference) {
    SurrogateContext ctx;
    ctx.reference_mel = *slot->reference;
    ctx.features = slot->features;
    ctx.voice = population_->context();
    Json sims = Json::array();
    Json scores = Json::array();
    for (const auto& p : points) {
      const SurrogateTerms t = surrogate_terms(p.embedding, ctx);
      sims.push_back(t.similarity);
      scores.push_back(t.score);
    }
    j["similarity"] = sims;
    j["surrogate"] = scores;
  }
  return j;
}

Json VoiceService::list_targets() const {
  Json ids = Json::array();
  for (const auto& id : population_->ids) ids.push_back(id);
  return {{"group", population_->group}, {"base_f0_hz", population_->base_f0_hz}, {"targets", ids}};
}

std::string VoiceService::directions_text() {
  std::lock_guard lock(directions_mutex_);
  if (!directions_text_) {
    if (!config_.directions_path.empty()) {
      directions_text_ = read_file(config_.directions_path);
    } else {
      DiscoveryOptions opts;
      opts.seed = config_.seed;
      auto dirs = discover(*population_, discovery_features(*population_, config_.seed, config_.frames), opts);
      label_planted_axes(dirs, *population_->mixing_map);
      Provenance prov;
      prov.master_seed = config_.seed;
      directions_text_ = dump(directions_to_json(dirs, prov));
    }
  }
  return *directions_text_;
}

Json VoiceService::healthz() const {
  return {{"status", "ok"}, {"tool_version", kToolVersion}, {"sessions", session_count()}};
}

VoiceService::Media VoiceService::media(const std::string& id, const std::string& file) {
  auto slot = find(id);
  const auto dot = file.rfind('.');
  require(dot != std::string::npos, ErrorCode::InvalidArgument, "media name needs an extension");
  const std::string name = file.substr(0, dot);
  const std::string ext = file.substr(dot + 1);
  SpeakerEmbedding z;
  {
    std::lock_guard lock(slot->mutex);
    if (name == "reference") {
      require(slot->reference.has_value(), ErrorCode::InvalidArgument, "session has no reference");
      z = population_->embeddings[population_->index_of(slot->target_id)];
    } else {
      require(slot->session.status == SessionStatus::AwaitingChoice, ErrorCode::SessionNotActive, "session is not active");
      const auto it = std::find(slot->candidate_ids.begin(), slot->candidate_ids.end(), name);
      require(it != slot->candidate_ids.end(), ErrorCode::StaleCandidate, "candidate is not part of the current query");
      z = next_candidates(slot->session).candidates[it - slot->candidate_ids.begin()];
    }
  }
  const VoiceContext voice = population_->context();
  const MelSpectrogram mel = synthesize(slot->features, z, voice);
  if (ext == "mel1") return {"application/octet-stream", encode_mel1(mel.frames)};
  if (ext == "png") return {"image/png", spectrogram_png(mel)};
  if (ext == "wav") {
    const Eigen::VectorXd f0 = f0_track(slot->features, embed_to_params(z, *voice.mixing_map), voice.base_f0_hz);
    return {"audio/wav", encode_wav(render_waveform(mel, f0))};
  }
  fail(ErrorCode::InvalidArgument, "unknown media type '" + ext + "'");
}

void VoiceService::replay_log() {
  if (!std::filesystem::exists(log_path_)) return;
  std::ifstream in(log_path_);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json e;
    try {
      e = Json::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A torn final line from a crash mid-write is dropped.
      continue;
    }
    const std::string type = e.value("type", std::string());
    const std::string id = e.value("session_id", std::string());
    if (type == "created") {
      auto slot = build_slot(e);
      issue(*slot);
      sessions_[id] = slot;
      ++counter_;
      continue;
    }
    auto it = sessions_.find(id);
    require(it != sessions_.end(), ErrorCode::ParseError,
            "event log line " + std::to_string(line_no) + " references unknown session");
    Slot& slot = *it->second;
    if (type == "choice") {
      slot.session = submit_choice(slot.session, e.at("offset").get<int>());
      slot.updated_at = e.value("at", slot.updated_at);
      if (slot.session.status == SessionStatus::AwaitingChoice) issue(slot);
    } else if (type == "satisfied") {
      slot.session = mark_satisfied(slot.session);
      slot.updated_at = e.value("at", slot.updated_at);
    }
  }
}

}  // namespace voiceloop
