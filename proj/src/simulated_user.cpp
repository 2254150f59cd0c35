#include "voiceloop/simulated_user.hpp"

namespace voiceloop {

SurrogateTerms surrogate_terms(const SpeakerEmbedding& z, const SurrogateContext& ctx) {
  const MelSpectrogram m = synthesize(ctx.features, z, ctx.voice);
  SurrogateTerms t;
  t.similarity = similarity(m, ctx.reference_mel);
  t.mse = mel_mse(m, ctx.reference_mel);
  t.score = t.similarity - t.mse;
  return t;
}

double surrogate_score(const SpeakerEmbedding& z, const SurrogateContext& ctx) { return surrogate_terms(z, ctx).score; }

int select_offset(const std::array<double, 5>& scores, double noise_std, Rng& rng) {
  std::array<double, 5> noisy = scores;
  if (noise_std > 0.0)
    for (double& s : noisy) s += noise_std * rng.normal();
  static constexpr std::array<int, 5> kPreference{2, 1, 3, 0, 4};  // offsets 0, -1, +1, -2, +2
  int best = kPreference[0];
  for (int j : kPreference)
    if (noisy[j] > noisy[best]) best = j;
  return kOffsets[best];
}

int select(const CandidateSet& candidates, const SurrogateContext& ctx, Rng& rng) {
  std::array<double, 5> scores{};
  for (int j = 0; j < 5; ++j) scores[j] = surrogate_score(candidates.candidates[j], ctx);
  return select_offset(scores, ctx.noise_std, rng);
}

SessionRun run_session(BasisPtr basis, SearchConfig config, SpeakerEmbedding initial, const SurrogateContext& ctx) {
  SessionRun run;
  run.session = start_session(std::move(basis), std::move(config), std::move(initial));
  Rng rng(ctx.rng_seed);
  SurrogateTerms current = surrogate_terms(run.session.current, ctx);
  while (run.session.status == SessionStatus::AwaitingChoice) {
    const CandidateSet set = next_candidates(run.session);
    std::array<SurrogateTerms, 5> terms{};
    std::array<double, 5> scores{};
    for (int j = 0; j < 5; ++j) {
      // The offset-0 candidate is the current point, already scored.
      terms[j] = kOffsets[j] == 0 ? current : surrogate_terms(set.candidates[j], ctx);
      scores[j] = terms[j].score;
    }
    const int offset = select_offset(scores, ctx.noise_std, rng);
    current = terms[offset_index(offset)];
    run.session = submit_choice(run.session, offset);
    run.selected_surrogate.push_back(current.score);
    run.selected_similarity.push_back(current.similarity);
    if (current.similarity > run.best_similarity) {
      run.best_similarity = current.similarity;
      run.best_embedding = run.session.current;
    }
  }
  return run;
}

bool non_decreasing(const std::vector<double>& series) {
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i] < series[i - 1]) return false;
  return true;
}

}  // namespace voiceloop
