#include "voiceloop/embedding_space.hpp"

#include <cmath>
#include <istream>
#include <sstream>

#include "voiceloop/error.hpp"

namespace voiceloop {

void normalize_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v.size() > 0 && v(arg) < 0) v = -v;
}

PcaBasis fit_pca(const std::vector<SpeakerEmbedding>& samples, int n_components) {
  require(n_components >= 1, ErrorCode::InvalidK, "n_components must be positive");
  require(static_cast<int>(samples.size()) >= n_components + 1, ErrorCode::TooFewSamples,
          "need at least n_components + 1 samples, got " + std::to_string(samples.size()));
  const int d = samples.front().dimension();
  require(n_components <= d, ErrorCode::InvalidK, "n_components exceeds dimension");
  for (const auto& s : samples) {
    require(s.dimension() == d, ErrorCode::DimensionMismatch, "samples have differing dimensions");
    require(s.values.allFinite(), ErrorCode::InvalidArgument, "non-finite sample entry");
  }

  const double count = static_cast<double>(samples.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) mean += s.values;
  mean /= count;

  Eigen::MatrixXd centered(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) centered.row(static_cast<Eigen::Index>(i)) = (samples[i].values - mean).transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / count;
  const double total = cov.trace();
  require(total > 1e-12, ErrorCode::InsufficientVariance, "samples have no variance");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  require(eig.info() == Eigen::Success, ErrorCode::InsufficientVariance, "eigendecomposition failed");

  PcaBasis basis;
  basis.directions.resize(d, n_components);
  basis.component_stds.resize(n_components);
  basis.explained_variance_ratios.resize(n_components);
  for (int i = 0; i < n_components; ++i) {
    const int src = d - 1 - i;  // eigenvalues ascend
    Eigen::VectorXd w = eig.eigenvectors().col(src).normalized();
    normalize_sign(w);
    const double lambda = std::max(eig.eigenvalues()(src), 0.0);
    basis.directions.col(i) = w;
    basis.component_stds(i) = std::sqrt(lambda);
    basis.explained_variance_ratios(i) = lambda / total;
  }
  basis.mean = mean;
  basis.offset = mean;
  return basis;
}

Coefficients project(const SpeakerEmbedding& z, const PcaBasis& basis) {
  require(z.dimension() == basis.dimension(), ErrorCode::DimensionMismatch,
          "embedding dimension " + std::to_string(z.dimension()) + " vs basis " + std::to_string(basis.dimension()));
  return {basis.directions.transpose() * (z.values - basis.offset)};
}

SpeakerEmbedding reconstruct(const Coefficients& alpha, const PcaBasis& basis) {
  require(alpha.alpha.size() == basis.n_components(), ErrorCode::DimensionMismatch, "coefficient count differs from basis");
  return {basis.directions * alpha.alpha + basis.offset};
}

SpeakerEmbedding reduce(const SpeakerEmbedding& z, const PcaBasis& basis, int k) {
  require(z.dimension() == basis.dimension(), ErrorCode::DimensionMismatch, "embedding dimension differs from basis");
  require(k >= 1 && k <= basis.n_components(), ErrorCode::InvalidK, "k must lie in [1, N]");
  const auto wk = basis.directions.leftCols(k);
  return {wk * (wk.transpose() * (z.values - basis.mean)) + basis.mean};
}

double orthonormality_error(const PcaBasis& basis) {
  const Eigen::MatrixXd g = basis.directions.transpose() * basis.directions;
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

std::vector<SpeakerEmbedding> read_embedding_corpus(std::istream& in, bool has_ids, std::vector<std::string>* ids) {
  std::vector<SpeakerEmbedding> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first && has_ids) {
        if (ids) ids->push_back(cell);
        first = false;
        continue;
      }
      first = false;
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (!out.empty() && vals.size() != static_cast<std::size_t>(out.front().dimension()))
      fail(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + " has " + std::to_string(vals.size()) + " values");
    out.push_back({Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()))});
  }
  return out;
}

}  // namespace voiceloop
