#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "voiceloop/provenance.hpp"
#include "voiceloop/simulated_user.hpp"
#include "voiceloop/toy_voice_model.hpp"

namespace voiceloop {

inline constexpr int kDefaultInits = 20;
inline constexpr int kDefaultTracks = 8;
inline constexpr double kDefaultPercentile = 75.0;

/// Linear-interpolation percentile (the common "linear" definition).
double percentile(std::vector<double> values, double pct);

struct CalibrationResult {
  double threshold = 0.0;
  double mean_intra = 0.0;
  std::size_t n_pairs = 0;
};

CalibrationResult calibrate(const ToyPopulation& population, int n_tracks, double pct, std::uint64_t seed,
                            int frames = kDefaultFrames);
double calibrate_threshold(const ToyPopulation& population, int n_tracks = kDefaultTracks,
                           double pct = kDefaultPercentile, std::uint64_t seed = 0);

/// Mean similarity between distinct speakers rendered with shared features.
double mean_inter_speaker_similarity(const ToyPopulation& population, int n_pairs, std::uint64_t seed);

/// The fixed utterance used for a target in experiments and sessions.
SpeechFeatures target_features(std::uint64_t master_seed, const std::string& target_id, int frames = kDefaultFrames);

struct ExperimentSpec {
  std::shared_ptr<const ToyPopulation> population;
  BasisPtr basis;  // null: fit on the population with 16 components
  std::vector<std::string> target_ids;
  int n_inits = kDefaultInits;
  int max_queries = kDefaultMaxQueries;
  double noise_std = kDefaultNoiseStd;
  std::uint64_t master_seed = 0;
  double success_threshold = 0.0;
  bool self_init = false;  // diagnostic: start every run at the target
  unsigned threads = 0;    // 0: hardware concurrency
  int frames = kDefaultFrames;
};

struct RunRecord {
  std::string target_id;
  int init_index = 0;
  std::string init_id;
  std::uint64_t seed = 0;
  double best_similarity = 0.0;
  int first_success_query = -1;
  bool success = false;
  bool monotone = true;
  std::vector<double> surrogate_series;
  std::uint64_t trajectory_hash = 0;
};

struct TargetSummary {
  std::string target_id;
  double success_rate = 0.0;  // percent
  double mean_best_similarity = 0.0;
  std::string tag;  // "easy", "hard" or empty
};

struct ExperimentReport {
  std::vector<TargetSummary> targets;
  std::vector<RunRecord> runs;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over targets
  double max = 0.0;
  double min = 0.0;
  double aggregate_success_rate = 0.0;
  double threshold = 0.0;
  double noise_std = 0.0;
  int n_inits = 0;
  int max_queries = 0;
  Provenance provenance;
};

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& target_id, int init_index);

ExperimentReport run_experiment(const ExperimentSpec& spec);

struct SingleRun {
  SessionRun run;
  std::string init_id;
  std::uint64_t seed = 0;
};

/// One run exactly as run_experiment performs it, returning the full session.
SingleRun run_single(const ExperimentSpec& spec, BasisPtr basis, const std::string& target_id, int init_index);

}  // namespace voiceloop
