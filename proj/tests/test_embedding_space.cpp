#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "voiceloop/embedding_space.hpp"
#include "voiceloop/error.hpp"

using namespace voiceloop;
using voiceloop::testing::random_vector;

namespace {

std::vector<SpeakerEmbedding> gaussian_samples(Rng& rng, int n, int d) {
  std::vector<SpeakerEmbedding> s;
  Eigen::VectorXd scales(d);
  for (int j = 0; j < d; ++j) scales(j) = 1.0 / (1.0 + j);
  for (int i = 0; i < n; ++i) s.push_back({random_vector(rng, d).cwiseProduct(scales)});
  return s;
}

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

TEST_CASE("identical samples have no variance") {
  Eigen::VectorXd v(3);
  v << 1, 2, 3;
  std::vector<SpeakerEmbedding> s(3, SpeakerEmbedding{v});
  CHECK(code_of([&] { fit_pca(s, 2); }) == ErrorCode::InsufficientVariance);
}

TEST_CASE("too few samples") {
  std::vector<SpeakerEmbedding> s{{Eigen::VectorXd::Ones(4)}};
  CHECK(code_of([&] { fit_pca(s, 1); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("two-dimensional hand example") {
  std::vector<SpeakerEmbedding> s{{Eigen::Vector2d(1, 0)}, {Eigen::Vector2d(-1, 0)}, {Eigen::Vector2d(0, 0)}};
  const PcaBasis b = fit_pca(s, 1);
  CHECK(std::abs(std::abs(b.directions(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(b.directions(1, 0)) < 1e-12);
  CHECK(b.directions(0, 0) > 0.0);  // sign convention
  CHECK(b.mean.norm() < 1e-15);
  CHECK(b.component_stds(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(b.explained_variance_ratios(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("basis invariants after fit") {
  Rng rng(5);
  const auto s = gaussian_samples(rng, 60, 12);
  const PcaBasis b = fit_pca(s, 8);
  CHECK(orthonormality_error(b) <= 1e-9);
  double total = 0.0;
  for (int i = 0; i < 8; ++i) {
    total += b.explained_variance_ratios(i);
    if (i > 0) {
      CHECK(b.explained_variance_ratios(i) <= b.explained_variance_ratios(i - 1));
      CHECK(b.component_stds(i) <= b.component_stds(i - 1));
    }
    Eigen::VectorXd w = b.direction(i);
    Eigen::Index arg;
    w.cwiseAbs().maxCoeff(&arg);
    CHECK(w(arg) > 0.0);
    // stds are the population std of the projections
    double sq = 0.0;
    for (const auto& z : s) sq += std::pow(w.dot(z.values - b.mean), 2);
    CHECK(b.component_stds(i) == doctest::Approx(std::sqrt(sq / s.size())).epsilon(1e-10));
  }
  CHECK(total <= 1.0 + 1e-9);
  CHECK((b.offset - b.mean).norm() == 0.0);
}

TEST_CASE("fit is deterministic up to sign") {
  Rng rng(6);
  const auto s = gaussian_samples(rng, 40, 10);
  const PcaBasis a = fit_pca(s, 5);
  const PcaBasis b = fit_pca(s, 5);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(std::abs(a.direction(i).dot(b.direction(i))) - 1.0) < 1e-12);
}

TEST_CASE("project and reconstruct") {
  Rng rng(7);
  const auto s = gaussian_samples(rng, 50, 10);
  const PcaBasis b = fit_pca(s, 6);

  CHECK(project({b.offset}, b).alpha.cwiseAbs().maxCoeff() < 1e-12);
  const Coefficients two = project({b.offset + 2.0 * b.direction(0)}, b);
  CHECK(two.alpha(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(two.alpha.tail(5).cwiseAbs().maxCoeff() < 1e-12);

  CHECK((reconstruct({Eigen::VectorXd::Zero(6)}, b).values - b.offset).norm() == 0.0);
  Eigen::VectorXd e2 = Eigen::VectorXd::Zero(6);
  e2(2) = 1.0;
  CHECK((reconstruct({e2}, b).values - (b.offset + b.direction(2))).cwiseAbs().maxCoeff() < 1e-15);

  for (int trial = 0; trial < 20; ++trial) {
    const Coefficients a{random_vector(rng, 6, 3.0)};
    CHECK((project(reconstruct(a, b), b).alpha - a.alpha).cwiseAbs().maxCoeff() <= 1e-9);
    const SpeakerEmbedding z{random_vector(rng, 10)};
    const Coefficients p = project(z, b);
    CHECK((project(reconstruct(p, b), b).alpha - p.alpha).cwiseAbs().maxCoeff() <= 1e-9);
    // direct dot-product oracle
    for (int i = 0; i < 6; ++i) {
      double dot = 0.0;
      for (int j = 0; j < 10; ++j) dot += b.directions(j, i) * (z.values(j) - b.offset(j));
      CHECK(p.alpha(i) == doctest::Approx(dot).epsilon(1e-12));
    }
  }
}

TEST_CASE("dimension errors") {
  Rng rng(8);
  const PcaBasis b = fit_pca(gaussian_samples(rng, 20, 6), 3);
  CHECK(code_of([&] { project({Eigen::VectorXd::Zero(5)}, b); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { reconstruct({Eigen::VectorXd::Zero(4)}, b); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { reduce({Eigen::VectorXd::Zero(6)}, b, 0); }) == ErrorCode::InvalidK);
  CHECK(code_of([&] { reduce({Eigen::VectorXd::Zero(6)}, b, 4); }) == ErrorCode::InvalidK);
}

TEST_CASE("reduce properties") {
  Rng rng(9);
  const auto s = gaussian_samples(rng, 80, 12);
  const PcaBasis b = fit_pca(s, 8);
  CHECK((reduce({b.mean}, b, 3).values - b.mean).norm() < 1e-15);

  Eigen::VectorXd in_span = b.mean + 0.7 * b.direction(0) - 1.3 * b.direction(1);
  CHECK((reduce({in_span}, b, 2).values - in_span).cwiseAbs().maxCoeff() <= 1e-9);

  for (int trial = 0; trial < 10; ++trial) {
    const SpeakerEmbedding z{random_vector(rng, 12)};
    double prev = INFINITY;
    for (int k = 1; k <= 8; ++k) {
      const SpeakerEmbedding r = reduce(z, b, k);
      CHECK((reduce(r, b, k).values - r.values).cwiseAbs().maxCoeff() <= 1e-9);
      const double err = (z.values - r.values).norm();
      CHECK(err <= prev + 1e-12);
      prev = err;
    }
  }
}

TEST_CASE("toy population reduce with k = N") {
  const auto pop = build_population(200, 20240601).first;
  const PcaBasis b = fit_pca(pop.embeddings, 16);
  CHECK(b.explained_variance_ratios.sum() >= 0.95);
  // Points built exactly in the span of the basis.
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const SpeakerEmbedding z = reconstruct({random_vector(rng, 16)}, b);
    const SpeakerEmbedding r = reduce(z, b, 16);
    CHECK((r.values - z.values).norm() / z.values.norm() <= 1e-6);
  }
}

TEST_CASE("corpus reader") {
  std::istringstream in("a,1,2,3\nb,4,5,6\n");
  std::vector<std::string> ids;
  const auto z = read_embedding_corpus(in, true, &ids);
  REQUIRE(z.size() == 2);
  CHECK(ids == std::vector<std::string>{"a", "b"});
  CHECK(z[1].values(2) == 6.0);
  std::istringstream bad("1,2\n3\n");
  CHECK(code_of([&] { read_embedding_corpus(bad, false); }) == ErrorCode::DimensionMismatch);
}
