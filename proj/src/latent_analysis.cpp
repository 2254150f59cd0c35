#include "voiceloop/latent_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "voiceloop/error.hpp"
#include "voiceloop/random.hpp"

namespace voiceloop {

Eigen::VectorXd flatten(const MelSpectrogram& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.frames.data(), m.frames.size());
}

JacobianMatrix jacobian_fd(const Generator& g, const SpeakerEmbedding& z, double step) {
  require(step > 0.0, ErrorCode::InvalidArgument, "step must be positive");
  const int d = z.dimension();
  JacobianMatrix out;
  out.probe = z;
  Eigen::VectorXd zp = z.values;
  for (int j = 0; j < d; ++j) {
    zp(j) = z.values(j) + step;
    const Eigen::VectorXd plus = g(zp);
    zp(j) = z.values(j) - step;
    const Eigen::VectorXd minus = g(zp);
    zp(j) = z.values(j);
    if (j == 0) out.matrix.resize(plus.size(), d);
    require(plus.size() == out.matrix.rows() && minus.size() == out.matrix.rows(), ErrorCode::DimensionMismatch,
            "generator output size changed");
    out.matrix.col(j) = (plus - minus) / (2.0 * step);
  }
  return out;
}

JacobianMatrix jacobian_fd(const SpeechFeatures& features, const SpeakerEmbedding& z, const VoiceContext& voice,
                           double step) {
  require(voice.mixing_map != nullptr, ErrorCode::InvalidArgument, "voice context has no mixing map");
  require(z.dimension() == voice.mixing_map->cols(), ErrorCode::DimensionMismatch, "embedding dimension differs from map");
  validate_features(features);
  return jacobian_fd([&](const Eigen::VectorXd& x) { return flatten(synthesize(features, {x}, voice)); }, z, step);
}

std::vector<SingularDirection> top_right_singular_vectors(const Eigen::MatrixXd& j, int k) {
  require(k >= 1 && k <= j.cols(), ErrorCode::InvalidK, "k must lie in [1, D]");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinV);
  const Eigen::Index avail = svd.singularValues().size();
  std::vector<SingularDirection> out;
  for (int i = 0; i < k; ++i) {
    SingularDirection s;
    if (i < avail) {
      s.vector = svd.matrixV().col(i);
      s.singular_value = svd.singularValues()(i);
    } else {
      // Wide matrices: complete with an orthonormal null-space basis vector.
      Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
      const Eigen::MatrixXd null = lu.kernel();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(null);
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(null.rows(), null.cols());
      s.vector = q.col(std::min<Eigen::Index>(i - avail, q.cols() - 1));
      s.singular_value = 0.0;
    }
    s.vector.normalize();
    normalize_sign(s.vector);
    out.push_back(std::move(s));
  }
  return out;
}

std::string to_string(AttributeLabel label) {
  switch (label) {
    case AttributeLabel::PitchLevel: return "pitch_level";
    case AttributeLabel::PitchVariance: return "pitch_variance";
    case AttributeLabel::Brightness: return "brightness";
    case AttributeLabel::Strain: return "strain";
    case AttributeLabel::Nasality: return "nasality";
    case AttributeLabel::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

AttributeLabel parse_label(const std::string& s) {
  for (auto l : {AttributeLabel::PitchLevel, AttributeLabel::PitchVariance, AttributeLabel::Brightness,
                 AttributeLabel::Strain, AttributeLabel::Nasality, AttributeLabel::Unlabeled})
    if (to_string(l) == s) return l;
  fail(ErrorCode::ParseError, "unknown attribute label '" + s + "'");
}

std::vector<EditingDirection> cluster_directions(const std::vector<PoolEntry>& pool, double eps, int min_pts) {
  std::vector<EditingDirection> out;
  const int n = static_cast<int>(pool.size());
  if (n == 0 || eps <= 0.0) return out;

  Eigen::MatrixXd p(n, pool.front().vector.size());
  for (int i = 0; i < n; ++i) p.row(i) = pool[i].vector.normalized().transpose();
  const Eigen::MatrixXd dist = 1.0 - (p * p.transpose()).cwiseAbs().array();

  std::vector<std::vector<int>> neighbours(n);
  std::vector<bool> core(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (dist(i, j) <= eps) neighbours[i].push_back(j);
    core[i] = static_cast<int>(neighbours[i].size()) >= min_pts;
  }

  // Clusters are connected components of the core graph.
  std::vector<int> label(n, -1);
  int clusters = 0;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || label[i] >= 0) continue;
    std::vector<int> stack{i};
    label[i] = clusters;
    while (!stack.empty()) {
      const int q = stack.back();
      stack.pop_back();
      for (int r : neighbours[q])
        if (core[r] && label[r] < 0) {
          label[r] = clusters;
          stack.push_back(r);
        }
    }
    ++clusters;
  }
  for (int i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (int r : neighbours[i])
      if (core[r] && (best < 0 || dist(i, r) < dist(i, best))) best = r;
    if (best >= 0) label[i] = label[best];
  }

  for (int c = 0; c < clusters; ++c) {
    EditingDirection dir;
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p.cols(), p.cols());
    double sv = 0.0;
    for (int i = 0; i < n; ++i) {
      if (label[i] != c) continue;
      second.noalias() += p.row(i).transpose() * p.row(i);
      sv += pool[i].singular_value;
      dir.source_probes.push_back(pool[i].probe);
      ++dir.n_members;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second);
    dir.vector = eig.eigenvectors().col(p.cols() - 1).normalized();
    normalize_sign(dir.vector);
    dir.mean_singular_value = sv / dir.n_members;
    std::sort(dir.source_probes.begin(), dir.source_probes.end());
    dir.source_probes.erase(std::unique(dir.source_probes.begin(), dir.source_probes.end()), dir.source_probes.end());
    out.push_back(std::move(dir));
  }
  std::stable_sort(out.begin(), out.end(), [](const EditingDirection& a, const EditingDirection& b) {
    if (a.n_members != b.n_members) return a.n_members > b.n_members;
    return a.mean_singular_value > b.mean_singular_value;
  });
  return out;
}

std::vector<EditingDirection> cluster_directions(const std::vector<Eigen::VectorXd>& pool, double eps, int min_pts) {
  std::vector<PoolEntry> entries;
  for (std::size_t i = 0; i < pool.size(); ++i) entries.push_back({pool[i], static_cast<int>(i), 0.0});
  return cluster_directions(entries, eps, min_pts);
}

AlignmentMatrix alignment(const PcaBasis& basis, const std::vector<EditingDirection>& directions) {
  AlignmentMatrix a;
  a.entries.resize(basis.n_components(), static_cast<Eigen::Index>(directions.size()));
  for (std::size_t j = 0; j < directions.size(); ++j) {
    require(directions[j].vector.size() == basis.dimension(), ErrorCode::DimensionMismatch,
            "direction dimension differs from basis");
    a.entries.col(static_cast<Eigen::Index>(j)) =
        (basis.directions.transpose() * directions[j].vector).cwiseMax(-1.0).cwiseMin(1.0);
  }
  return a;
}

PerturbResult perturb_render(const SpeechFeatures& features, const SpeakerEmbedding& z, const Eigen::VectorXd& v,
                             double epsilon, const VoiceContext& voice) {
  require(v.size() == z.dimension(), ErrorCode::DimensionMismatch, "direction dimension differs from embedding");
  require(std::abs(v.norm() - 1.0) <= 1e-6, ErrorCode::InvalidArgument, "direction must be unit norm");
  require(epsilon != 0.0, ErrorCode::InvalidArgument, "epsilon must be nonzero");
  PerturbResult r;
  r.base = synthesize(features, z, voice);
  r.shifted = synthesize(features, {z.values + epsilon * v}, voice);
  r.difference = r.shifted.frames - r.base.frames;
  return r;
}

std::vector<SpeechFeatures> discovery_features(const ToyPopulation& population, std::uint64_t seed, int frames) {
  std::vector<SpeechFeatures> out;
  for (std::size_t i = 0; i < population.size(); ++i)
    out.push_back(make_features(derive_seed({seed, 0x646973ULL, i}), frames));
  return out;
}

std::vector<EditingDirection> discover(const ToyPopulation& population,
                                       const std::vector<SpeechFeatures>& per_speaker_features,
                                       const DiscoveryOptions& options) {
  require(population.size() > 0, ErrorCode::InvalidArgument, "empty population");
  require(per_speaker_features.size() == population.size(), ErrorCode::DimensionMismatch,
          "need one feature set per speaker");
  const VoiceContext voice = population.context();
  const std::size_t n = population.size();
  std::vector<std::vector<SingularDirection>> per_probe(n);
  auto work = [&](std::size_t i) {
    const JacobianMatrix j = jacobian_fd(per_speaker_features[i], population.embeddings[i], voice, options.step);
    per_probe[i] = top_right_singular_vectors(j.matrix, options.k);
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<PoolEntry> pool;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& s : per_probe[i]) pool.push_back({s.vector, static_cast<int>(i), s.singular_value});
  Rng rng(options.seed);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  return cluster_directions(pool, options.eps, options.min_pts);
}

std::vector<double> planted_axis_matches(const std::vector<EditingDirection>& directions,
                                         const Eigen::MatrixXd& mixing_map) {
  std::vector<double> best(5, 0.0);
  for (int a = 0; a < 5; ++a) {
    const Eigen::VectorXd row = mixing_map.row(a).transpose().normalized();
    for (const auto& d : directions) best[a] = std::max(best[a], std::abs(row.dot(d.vector)));
  }
  return best;
}

void label_planted_axes(std::vector<EditingDirection>& directions, const Eigen::MatrixXd& mixing_map, double min_cos) {
  for (auto& d : directions) {
    d.label = AttributeLabel::Unlabeled;
    double best = min_cos;
    for (int a = 0; a < 5; ++a) {
      const double c = std::abs(mixing_map.row(a).normalized().dot(d.vector.transpose()));
      if (c >= best) {
        best = c;
        d.label = kPlantedAxes[a];
      }
    }
  }
}

}  // namespace voiceloop
