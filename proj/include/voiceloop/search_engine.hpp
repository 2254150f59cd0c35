#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voiceloop/embedding_space.hpp"

namespace voiceloop {

inline constexpr std::array<int, 5> kOffsets{-2, -1, 0, 1, 2};
inline constexpr int kDefaultMaxQueries = 32;

struct SearchConfig {
  int n_directions = kDefaultComponents;
  std::vector<double> step_sizes;  // empty: component stds of the basis
  int max_queries = kDefaultMaxQueries;
  std::array<int, 5> offsets = kOffsets;
};

enum class SessionStatus { AwaitingChoice, Satisfied, Exhausted };

std::string to_string(SessionStatus s);
SessionStatus parse_status(const std::string& s);

/// Index in canonical order (-2, -1, 0, +1, +2); throws InvalidOffset.
int offset_index(int offset);

struct CandidateSet {
  int query_index = 0;
  int direction_index = 1;  // 1-based
  double scale = 0.0;
  std::array<SpeakerEmbedding, 5> candidates;
};

struct HistoryEntry {
  int iteration = 0;
  int direction_index = 1;
  int offset = 0;
  SpeakerEmbedding embedding;
};

struct SearchSession {
  BasisPtr basis;
  SearchConfig config;
  SpeakerEmbedding initial;
  SpeakerEmbedding current;
  int iteration = 0;
  SessionStatus status = SessionStatus::AwaitingChoice;
  std::optional<CandidateSet> pending;
  std::vector<HistoryEntry> history;
};

/// Fills in default step sizes and checks the configuration against the basis.
SearchConfig resolve_config(const PcaBasis& basis, SearchConfig config);

SearchSession start_session(BasisPtr basis, SearchConfig config, SpeakerEmbedding initial);
CandidateSet next_candidates(const SearchSession& session);
SearchSession submit_choice(const SearchSession& session, int chosen_offset);
SearchSession mark_satisfied(const SearchSession& session);

struct TrajectoryPoint {
  int iteration = 0;
  Coefficients alpha;
  double x = 0.0;
  double y = 0.0;
  SpeakerEmbedding embedding;
};

std::vector<TrajectoryPoint> trajectory(const SearchSession& session);

/// FNV-1a over iterations, offsets and embedding bit patterns.
std::uint64_t trajectory_hash(const SearchSession& session);

}  // namespace voiceloop
