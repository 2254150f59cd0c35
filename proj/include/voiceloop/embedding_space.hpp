#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voiceloop/provenance.hpp"

namespace voiceloop {

inline constexpr int kEmbeddingDim = 192;
inline constexpr int kDefaultComponents = 16;

struct SpeakerEmbedding {
  Eigen::VectorXd values;

  int dimension() const { return static_cast<int>(values.size()); }
};

struct Coefficients {
  Eigen::VectorXd alpha;
};

/// PCA coordinate system. `directions` holds one unit vector per column.
struct PcaBasis {
  Eigen::MatrixXd directions;  // D x N
  Eigen::VectorXd offset;
  Eigen::VectorXd mean;
  Eigen::VectorXd component_stds;
  Eigen::VectorXd explained_variance_ratios;
  std::optional<Provenance> provenance;

  int dimension() const { return static_cast<int>(directions.rows()); }
  int n_components() const { return static_cast<int>(directions.cols()); }
  Eigen::VectorXd direction(int i) const { return directions.col(i); }
};

using BasisPtr = std::shared_ptr<const PcaBasis>;

PcaBasis fit_pca(const std::vector<SpeakerEmbedding>& samples, int n_components = kDefaultComponents);

Coefficients project(const SpeakerEmbedding& z, const PcaBasis& basis);
SpeakerEmbedding reconstruct(const Coefficients& alpha, const PcaBasis& basis);

/// W_K W_K^T (z - mu) + mu
SpeakerEmbedding reduce(const SpeakerEmbedding& z, const PcaBasis& basis, int k);

/// max |w_i . w_j - delta_ij|
double orthonormality_error(const PcaBasis& basis);

/// Flip v so that its largest-magnitude entry is positive.
void normalize_sign(Eigen::VectorXd& v);

/// One embedding per line, comma separated. With `has_ids` the first column is
/// a speaker id, written into `ids` when non-null.
std::vector<SpeakerEmbedding> read_embedding_corpus(std::istream& in, bool has_ids,
                                                    std::vector<std::string>* ids = nullptr);

}  // namespace voiceloop
