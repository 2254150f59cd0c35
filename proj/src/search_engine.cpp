#include "voiceloop/search_engine.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "voiceloop/error.hpp"
#include "voiceloop/provenance.hpp"

namespace voiceloop {

std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::AwaitingChoice: return "awaiting_choice";
    case SessionStatus::Satisfied: return "satisfied";
    case SessionStatus::Exhausted: return "exhausted";
  }
  return "unknown";
}

SessionStatus parse_status(const std::string& s) {
  if (s == "awaiting_choice") return SessionStatus::AwaitingChoice;
  if (s == "satisfied") return SessionStatus::Satisfied;
  if (s == "exhausted") return SessionStatus::Exhausted;
  fail(ErrorCode::ParseError, "unknown session status '" + s + "'");
}

int offset_index(int offset) {
  for (int j = 0; j < 5; ++j)
    if (kOffsets[j] == offset) return j;
  fail(ErrorCode::InvalidOffset, "offset must be one of -2, -1, 0, 1, 2 (got " + std::to_string(offset) + ")");
}

SearchConfig resolve_config(const PcaBasis& basis, SearchConfig config) {
  require(config.n_directions >= 1 && config.n_directions <= basis.n_components(), ErrorCode::InvalidConfig,
          "n_directions must lie in [1, " + std::to_string(basis.n_components()) + "]");
  if (config.step_sizes.empty())
    for (int i = 0; i < config.n_directions; ++i) config.step_sizes.push_back(basis.component_stds(i));
  require(static_cast<int>(config.step_sizes.size()) == config.n_directions, ErrorCode::InvalidConfig,
          "step_sizes must have one entry per direction");
  for (double d : config.step_sizes)
    require(std::isfinite(d) && d > 0.0, ErrorCode::InvalidConfig, "step sizes must be positive");
  require(config.max_queries >= 1, ErrorCode::InvalidConfig, "max_queries must be at least 1");
  require(config.offsets == kOffsets, ErrorCode::InvalidConfig, "offsets are fixed to -2, -1, 0, +1, +2");
  return config;
}

namespace {

CandidateSet make_candidates(const SearchSession& s) {
  const int i = s.iteration;
  const int n = s.config.n_directions;
  CandidateSet set;
  set.query_index = i;
  set.direction_index = i % n + 1;
  set.scale = std::ldexp(s.config.step_sizes[set.direction_index - 1], -(i / n));
  const Eigen::VectorXd w = s.basis->directions.col(set.direction_index - 1);
  for (int j = 0; j < 5; ++j) {
    const int k = s.config.offsets[j];
    if (k == 0) {
      set.candidates[j] = s.current;
    } else {
      set.candidates[j] = {s.current.values + (k * set.scale) * w};
    }
  }
  return set;
}

void require_active(const SearchSession& s) {
  require(s.status == SessionStatus::AwaitingChoice, ErrorCode::SessionNotActive,
          "session is " + to_string(s.status));
}

}  // namespace

SearchSession start_session(BasisPtr basis, SearchConfig config, SpeakerEmbedding initial) {
  require(basis != nullptr, ErrorCode::InvalidConfig, "no basis");
  require(initial.dimension() == basis->dimension(), ErrorCode::DimensionMismatch,
          "initial embedding dimension differs from basis");
  require(initial.values.allFinite(), ErrorCode::InvalidArgument, "initial embedding has non-finite entries");
  SearchSession s;
  s.config = resolve_config(*basis, std::move(config));
  s.basis = std::move(basis);
  s.initial = initial;
  s.current = std::move(initial);
  s.pending = make_candidates(s);
  return s;
}

CandidateSet next_candidates(const SearchSession& session) {
  require_active(session);
  return session.pending ? *session.pending : make_candidates(session);
}

SearchSession submit_choice(const SearchSession& session, int chosen_offset) {
  require_active(session);
  const int j = offset_index(chosen_offset);
  const CandidateSet set = next_candidates(session);
  SearchSession next = session;
  next.current = set.candidates[j];
  next.history.push_back({session.iteration, set.direction_index, chosen_offset, next.current});
  next.iteration = session.iteration + 1;
  if (next.iteration >= next.config.max_queries) {
    next.status = SessionStatus::Exhausted;
    next.pending.reset();
  } else {
    next.pending = make_candidates(next);
  }
  return next;
}

SearchSession mark_satisfied(const SearchSession& session) {
  require_active(session);
  SearchSession next = session;
  next.status = SessionStatus::Satisfied;
  next.pending.reset();
  return next;
}

std::vector<TrajectoryPoint> trajectory(const SearchSession& session) {
  std::vector<TrajectoryPoint> out;
  auto add = [&](int iteration, const SpeakerEmbedding& z) {
    TrajectoryPoint p;
    p.iteration = iteration;
    p.alpha = project(z, *session.basis);
    p.x = p.alpha.alpha(0);
    p.y = p.alpha.alpha.size() > 1 ? p.alpha.alpha(1) : 0.0;
    p.embedding = z;
    out.push_back(std::move(p));
  };
  add(0, session.initial);
  for (const auto& h : session.history) add(h.iteration + 1, h.embedding);
  return out;
}

std::uint64_t trajectory_hash(const SearchSession& session) {
  std::uint64_t h = fnv1a64("voiceloop-trajectory");
  auto mix_bytes = [&](const void* p, std::size_t n) {
    h = fnv1a64(std::string_view(static_cast<const char*>(p), n), h);
  };
  auto mix_vec = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(v(i));
      mix_bytes(&bits, sizeof bits);
    }
  };
  mix_vec(session.initial.values);
  for (const auto& e : session.history) {
    const std::int64_t head[3] = {e.iteration, e.direction_index, e.offset};
    mix_bytes(head, sizeof head);
    mix_vec(e.embedding.values);
  }
  return h;
}

}  // namespace voiceloop
