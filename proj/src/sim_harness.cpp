#include "voiceloop/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "voiceloop/error.hpp"
#include "voiceloop/random.hpp"

namespace voiceloop {

double percentile(std::vector<double> values, double pct) {
  require(!values.empty(), ErrorCode::InvalidArgument, "percentile of empty set");
  require(pct >= 0.0 && pct <= 100.0, ErrorCode::InvalidArgument, "percentile outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CalibrationResult calibrate(const ToyPopulation& population, int n_tracks, double pct, std::uint64_t seed, int frames) {
  require(n_tracks >= 2, ErrorCode::TooFewTracks, "need at least two tracks per speaker");
  require(population.size() > 0, ErrorCode::InvalidArgument, "empty population");
  const VoiceContext voice = population.context();
  std::vector<double> sims;
  for (std::size_t s = 0; s < population.size(); ++s) {
    std::vector<MelSpectrogram> mels;
    for (int k = 0; k < n_tracks; ++k) {
      const auto f = make_features(derive_seed({seed, 0x63616cULL, s, static_cast<std::uint64_t>(k)}), frames);
      mels.push_back(synthesize(f, population.embeddings[s], voice));
    }
    for (int i = 0; i < n_tracks; ++i)
      for (int j = i + 1; j < n_tracks; ++j) sims.push_back(similarity(mels[i], mels[j]));
  }
  CalibrationResult r;
  r.n_pairs = sims.size();
  r.mean_intra = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
  r.threshold = percentile(std::move(sims), pct);
  return r;
}

double calibrate_threshold(const ToyPopulation& population, int n_tracks, double pct, std::uint64_t seed) {
  return calibrate(population, n_tracks, pct, seed).threshold;
}

double mean_inter_speaker_similarity(const ToyPopulation& population, int n_pairs, std::uint64_t seed) {
  require(population.size() >= 2, ErrorCode::InvalidArgument, "need two speakers");
  const VoiceContext voice = population.context();
  Rng rng(derive_seed({seed, 0x696e746572ULL}));
  double total = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const auto a = rng.below(population.size());
    auto b = rng.below(population.size() - 1);
    if (b >= a) ++b;
    const auto f = make_features(rng.next_u64());
    total += similarity(synthesize(f, population.embeddings[a], voice), synthesize(f, population.embeddings[b], voice));
  }
  return total / n_pairs;
}

SpeechFeatures target_features(std::uint64_t master_seed, const std::string& target_id, int frames) {
  return make_features(derive_seed({master_seed, hash_string(target_id), 0x757474ULL}), frames);
}

std::uint64_t run_seed(std::uint64_t master_seed, const std::string& target_id, int init_index) {
  return derive_seed({master_seed, hash_string(target_id), static_cast<std::uint64_t>(init_index)});
}

namespace {

void validate(const ExperimentSpec& spec) {
  require(spec.population != nullptr && spec.population->size() >= 2, ErrorCode::InvalidConfig,
          "experiment needs a population of at least two speakers");
  require(spec.n_inits >= 1, ErrorCode::InvalidConfig, "n_inits must be at least 1");
  require(spec.max_queries >= 1, ErrorCode::InvalidConfig, "max_queries must be at least 1");
  require(spec.noise_std >= 0.0, ErrorCode::InvalidConfig, "noise_std must be nonnegative");
  require(spec.success_threshold > -1.0 && spec.success_threshold < 1.0, ErrorCode::InvalidConfig,
          "threshold must lie in (-1, 1)");
  for (const auto& id : spec.target_ids)
    require(spec.population->index_of(id) >= 0, ErrorCode::UnknownTarget, "unknown target '" + id + "'");
}

BasisPtr resolve_basis(const ExperimentSpec& spec) {
  if (spec.basis) return spec.basis;
  return std::make_shared<const PcaBasis>(fit_pca(spec.population->embeddings, kDefaultComponents));
}

}  // namespace

SingleRun run_single(const ExperimentSpec& spec, BasisPtr basis, const std::string& target_id, int init_index) {
  const ToyPopulation& pop = *spec.population;
  const int target = pop.index_of(target_id);
  require(target >= 0, ErrorCode::UnknownTarget, "unknown target '" + target_id + "'");

  SingleRun out;
  out.seed = run_seed(spec.master_seed, target_id, init_index);
  Rng rng(out.seed);
  int init = target;
  if (!spec.self_init) {
    init = static_cast<int>(rng.below(pop.size() - 1));
    if (init >= target) ++init;
  }
  out.init_id = pop.ids[init];

  SurrogateContext ctx;
  ctx.features = target_features(spec.master_seed, target_id, spec.frames);
  ctx.voice = pop.context();
  ctx.reference_mel = synthesize(ctx.features, pop.embeddings[target], ctx.voice);
  ctx.noise_std = spec.noise_std;
  ctx.rng_seed = rng.next_u64();

  SearchConfig config;
  config.n_directions = basis->n_components();
  config.max_queries = spec.max_queries;
  out.run = run_session(std::move(basis), config, pop.embeddings[init], ctx);
  return out;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  validate(spec);
  const BasisPtr basis = resolve_basis(spec);
  const std::size_t n_targets = spec.target_ids.size();
  const std::size_t n_runs = n_targets * static_cast<std::size_t>(spec.n_inits);

  std::vector<RunRecord> records(n_runs);
  auto work = [&](std::size_t r) {
    const auto& target_id = spec.target_ids[r / spec.n_inits];
    const int init_index = static_cast<int>(r % spec.n_inits);
    const SingleRun single = run_single(spec, basis, target_id, init_index);
    RunRecord& rec = records[r];
    rec.target_id = target_id;
    rec.init_index = init_index;
    rec.init_id = single.init_id;
    rec.seed = single.seed;
    rec.best_similarity = single.run.best_similarity;
    rec.surrogate_series = single.run.selected_surrogate;
    rec.monotone = non_decreasing(single.run.selected_surrogate);
    rec.trajectory_hash = trajectory_hash(single.run.session);
    const auto& sims = single.run.selected_similarity;
    for (std::size_t q = 0; q < sims.size(); ++q)
      if (sims[q] > spec.success_threshold) {
        rec.first_success_query = static_cast<int>(q);
        break;
      }
    rec.success = rec.first_success_query >= 0;
  };

  unsigned threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_runs, 1)));
  if (threads <= 1) {
    for (std::size_t r = 0; r < n_runs; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t r = next++; r < n_runs; r = next++) work(r);
        } catch (...) {
          errors[t] = std::current_exception();
          next = n_runs;
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ExperimentReport report;
  report.runs = std::move(records);
  report.threshold = spec.success_threshold;
  report.noise_std = spec.noise_std;
  report.n_inits = spec.n_inits;
  report.max_queries = spec.max_queries;
  report.provenance.master_seed = spec.master_seed;

  std::size_t successes = 0;
  for (std::size_t t = 0; t < n_targets; ++t) {
    TargetSummary summary;
    summary.target_id = spec.target_ids[t];
    int hits = 0;
    double sim_total = 0.0;
    for (int i = 0; i < spec.n_inits; ++i) {
      const auto& rec = report.runs[t * spec.n_inits + i];
      hits += rec.success ? 1 : 0;
      sim_total += rec.best_similarity;
    }
    successes += hits;
    summary.success_rate = 100.0 * hits / spec.n_inits;
    summary.mean_best_similarity = sim_total / spec.n_inits;
    report.targets.push_back(summary);
  }
  if (n_targets > 0) {
    double sum = 0.0;
    report.max = report.targets.front().success_rate;
    report.min = report.max;
    for (const auto& t : report.targets) {
      sum += t.success_rate;
      report.max = std::max(report.max, t.success_rate);
      report.min = std::min(report.min, t.success_rate);
    }
    report.mean = sum / n_targets;
    double sq = 0.0;
    for (const auto& t : report.targets) sq += (t.success_rate - report.mean) * (t.success_rate - report.mean);
    report.std = std::sqrt(sq / n_targets);
    report.aggregate_success_rate = 100.0 * successes / static_cast<double>(n_runs);

    std::vector<std::size_t> order(n_targets);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return report.targets[a].mean_best_similarity > report.targets[b].mean_best_similarity;
    });
    const std::size_t n_tag = std::max<std::size_t>(1, n_targets / 10);
    if (n_targets >= 2 * n_tag) {
      for (std::size_t i = 0; i < n_tag; ++i) {
        report.targets[order[i]].tag = "easy";
        report.targets[order[n_targets - 1 - i]].tag = "hard";
      }
    }
  }
  return report;
}

}  // namespace voiceloop
