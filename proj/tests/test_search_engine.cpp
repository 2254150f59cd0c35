#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "voiceloop/error.hpp"
#include "voiceloop/search_engine.hpp"

using namespace voiceloop;
using voiceloop::testing::random_vector;

namespace {

BasisPtr test_basis() {
  static const BasisPtr b = [] {
    Rng rng(21);
    std::vector<SpeakerEmbedding> s;
    Eigen::VectorXd scales(24);
    for (int j = 0; j < 24; ++j) scales(j) = 2.0 / (1.0 + j);
    for (int i = 0; i < 100; ++i) s.push_back({random_vector(rng, 24).cwiseProduct(scales)});
    return std::make_shared<const PcaBasis>(fit_pca(s, 16));
  }();
  return b;
}

SearchConfig default_cfg() { return {}; }

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("start_session") {
  const BasisPtr b = test_basis();
  const SpeakerEmbedding z0{b->mean + 0.3 * b->direction(2)};
  const SearchSession s = start_session(b, default_cfg(), z0);
  CHECK(s.iteration == 0);
  CHECK(s.status == SessionStatus::AwaitingChoice);
  REQUIRE(s.pending.has_value());
  const CandidateSet c = next_candidates(s);
  CHECK(c.direction_index == 1);
  CHECK(c.scale == b->component_stds(0));
  CHECK(c.candidates[2].values == z0.values);
  CHECK(((c.candidates[4].values - c.candidates[0].values) - 4.0 * b->component_stds(0) * b->direction(0))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  CHECK(code_of([&] { start_session(b, default_cfg(), {Eigen::VectorXd::Zero(3)}); }) == ErrorCode::DimensionMismatch);
  SearchConfig bad;
  bad.max_queries = 0;
  CHECK(code_of([&] { start_session(b, bad, z0); }) == ErrorCode::InvalidConfig);
  bad = {};
  bad.step_sizes = std::vector<double>(16, 1.0);
  bad.step_sizes[3] = 0.0;
  CHECK(code_of([&] { start_session(b, bad, z0); }) == ErrorCode::InvalidConfig);
  bad = {};
  bad.offsets = {-2, -1, 5, 1, 2};
  CHECK(code_of([&] { start_session(b, bad, z0); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("scale schedule and direction cycle") {
  const BasisPtr b = test_basis();
  SearchConfig cfg;
  cfg.max_queries = 40;
  SearchSession s = start_session(b, cfg, {b->mean});
  for (int i = 0; i < 40; ++i) {
    const CandidateSet c = next_candidates(s);
    CHECK(c.query_index == i);
    CHECK(c.direction_index == i % 16 + 1);
    CHECK(c.scale == std::ldexp(b->component_stds(i % 16), -(i / 16)));
    if (i == 0) CHECK(c.scale == b->component_stds(0));
    if (i == 16) CHECK(c.scale == b->component_stds(0) * 0.5);
    if (i == 17) {
      CHECK(c.direction_index == 2);
      CHECK(c.scale == b->component_stds(1) * 0.5);
    }
    // collinear and symmetric about current
    const Eigen::VectorXd w = b->direction(c.direction_index - 1);
    for (int j = 0; j < 5; ++j)
      CHECK(((c.candidates[j].values - s.current.values) - kOffsets[j] * c.scale * w).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(((c.candidates[1].values + c.candidates[3].values) / 2.0 - s.current.values).cwiseAbs().maxCoeff() <= 1e-12);
    // stays in the affine span
    for (const auto& z : c.candidates) CHECK((reduce(z, *b, 16).values - z.values).cwiseAbs().maxCoeff() <= 1e-9);
    s = submit_choice(s, kOffsets[i % 5]);
  }
}

TEST_CASE("submit_choice") {
  const BasisPtr b = test_basis();
  const SpeakerEmbedding z0{b->mean};
  const SearchSession s = start_session(b, default_cfg(), z0);
  const SearchSession keep = submit_choice(s, 0);
  CHECK(keep.current.values == z0.values);
  CHECK(keep.iteration == 1);
  const SearchSession plus = submit_choice(s, 2);
  CHECK((plus.current.values - (z0.values + 2.0 * b->component_stds(0) * b->direction(0))).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(plus.history.size() == 1);
  CHECK(plus.history[0].offset == 2);
  CHECK(plus.history[0].direction_index == 1);
  CHECK(s.iteration == 0);  // input untouched
  CHECK(code_of([&] { submit_choice(s, 3); }) == ErrorCode::InvalidOffset);
}

TEST_CASE("budget exhaustion") {
  const BasisPtr b = test_basis();
  SearchSession s = start_session(b, default_cfg(), {b->mean});
  for (int i = 0; i < 32; ++i) s = submit_choice(s, -1);
  CHECK(s.status == SessionStatus::Exhausted);
  CHECK(s.iteration == 32);
  CHECK_FALSE(s.pending.has_value());
  CHECK(code_of([&] { submit_choice(s, 0); }) == ErrorCode::SessionNotActive);
  CHECK(code_of([&] { next_candidates(s); }) == ErrorCode::SessionNotActive);
  CHECK(code_of([&] { mark_satisfied(s); }) == ErrorCode::SessionNotActive);
}

TEST_CASE("mark_satisfied") {
  const BasisPtr b = test_basis();
  SearchSession s = submit_choice(start_session(b, default_cfg(), {b->mean}), 1);
  const SearchSession done = mark_satisfied(s);
  CHECK(done.status == SessionStatus::Satisfied);
  CHECK(done.current.values == s.current.values);
  CHECK_FALSE(done.pending.has_value());
  CHECK(code_of([&] { submit_choice(done, 0); }) == ErrorCode::SessionNotActive);
  CHECK(code_of([&] { mark_satisfied(done); }) == ErrorCode::SessionNotActive);
}

TEST_CASE("trajectory and replay") {
  const BasisPtr b = test_basis();
  Rng rng(22);
  const SpeakerEmbedding z0{b->mean + 0.5 * b->direction(0) - 0.2 * b->direction(1)};
  SearchSession s = start_session(b, default_cfg(), z0);
  CHECK(trajectory(s).size() == 1);
  CHECK(trajectory(s)[0].x == doctest::Approx(0.5));
  CHECK(trajectory(s)[0].y == doctest::Approx(-0.2));
  std::vector<int> choices;
  for (int i = 0; i < 20; ++i) {
    choices.push_back(kOffsets[rng.below(5)]);
    s = submit_choice(s, choices.back());
  }
  const auto traj = trajectory(s);
  CHECK(traj.size() == 21);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(traj[i].iteration == static_cast<int>(i));
    CHECK(traj[i].x == traj[i].alpha.alpha(0));
    CHECK(traj[i].y == traj[i].alpha.alpha(1));
  }
  // Replay the same choices: identical embeddings and hash.
  SearchSession r = start_session(b, default_cfg(), z0);
  for (int c : choices) r = submit_choice(r, c);
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(trajectory(r)[i].embedding.values == traj[i].embedding.values);
  for (std::size_t i = 1; i < traj.size(); ++i)
    CHECK((reconstruct(traj[i].alpha, *b).values - s.history[i - 1].embedding.values).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(trajectory_hash(r) == trajectory_hash(s));
  SearchSession other = start_session(b, default_cfg(), z0);
  for (std::size_t i = 0; i < choices.size(); ++i) other = submit_choice(other, i == 5 ? (choices[i] == 0 ? 1 : 0) : choices[i]);
  CHECK(trajectory_hash(other) != trajectory_hash(s));
}

TEST_CASE("status strings") {
  CHECK(to_string(SessionStatus::AwaitingChoice) == "awaiting_choice");
  CHECK(parse_status("exhausted") == SessionStatus::Exhausted);
  CHECK_THROWS_AS(parse_status("done"), Error);
}
