#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "voiceloop/random.hpp"
#include "voiceloop/search_engine.hpp"
#include "voiceloop/toy_voice_model.hpp"

namespace voiceloop {

inline constexpr double kDefaultNoiseStd = 0.01;

struct SurrogateContext {
  MelSpectrogram reference_mel;
  SpeechFeatures features;
  VoiceContext voice;
  double noise_std = kDefaultNoiseStd;
  std::uint64_t rng_seed = 0;
};

struct SurrogateTerms {
  double similarity = 0.0;
  double mse = 0.0;
  double score = 0.0;  // similarity - mse
};

SurrogateTerms surrogate_terms(const SpeakerEmbedding& z, const SurrogateContext& ctx);
double surrogate_score(const SpeakerEmbedding& z, const SurrogateContext& ctx);

/// Noisy argmax over scores given in canonical offset order. Draws five
/// normals from `rng` when noise_std > 0. Ties go to the smaller |offset|,
/// then to the negative side.
int select_offset(const std::array<double, 5>& scores, double noise_std, Rng& rng);

int select(const CandidateSet& candidates, const SurrogateContext& ctx, Rng& rng);

struct SessionRun {
  SearchSession session;
  double best_similarity = -1.0;
  SpeakerEmbedding best_embedding;
  std::vector<double> selected_surrogate;   // noiseless score of each selected candidate
  std::vector<double> selected_similarity;  // similarity term of each selected candidate
};

/// Drives a session to exhaustion with a selector seeded from ctx.rng_seed.
SessionRun run_session(BasisPtr basis, SearchConfig config, SpeakerEmbedding initial, const SurrogateContext& ctx);

bool non_decreasing(const std::vector<double>& series);

}  // namespace voiceloop
