#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "voiceloop/embedding_space.hpp"
#include "voiceloop/toy_voice_model.hpp"

namespace voiceloop {

inline constexpr double kDefaultFdStep = 1e-3;
inline constexpr int kDefaultSingularVectors = 16;
inline constexpr double kDefaultClusterEps = 0.1;
inline constexpr int kDefaultMinPts = 4;

struct JacobianMatrix {
  Eigen::MatrixXd matrix;  // (T*F) x D, rows flattened time-major
  SpeakerEmbedding probe;
  std::string features_id;
};

/// Maps an embedding to a flattened output vector.
using Generator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

JacobianMatrix jacobian_fd(const Generator& g, const SpeakerEmbedding& z, double step = kDefaultFdStep);
JacobianMatrix jacobian_fd(const SpeechFeatures& features, const SpeakerEmbedding& z, const VoiceContext& voice,
                           double step = kDefaultFdStep);

/// Row-major flattening of a spectrogram.
Eigen::VectorXd flatten(const MelSpectrogram& m);

struct SingularDirection {
  Eigen::VectorXd vector;
  double singular_value = 0.0;
};

std::vector<SingularDirection> top_right_singular_vectors(const Eigen::MatrixXd& j, int k = kDefaultSingularVectors);

enum class AttributeLabel { PitchLevel, PitchVariance, Brightness, Strain, Nasality, Unlabeled };

std::string to_string(AttributeLabel label);
AttributeLabel parse_label(const std::string& s);

/// Generator slot carrying each attribute, in parameter order.
inline constexpr AttributeLabel kPlantedAxes[5] = {AttributeLabel::PitchLevel, AttributeLabel::PitchVariance,
                                                   AttributeLabel::Brightness, AttributeLabel::Strain,
                                                   AttributeLabel::Nasality};

struct EditingDirection {
  Eigen::VectorXd vector;
  std::vector<int> source_probes;
  std::optional<AttributeLabel> label;
  double mean_singular_value = 0.0;
  int n_members = 0;
};

struct PoolEntry {
  Eigen::VectorXd vector;
  int probe = 0;
  double singular_value = 0.0;
};

/// DBSCAN under 1 - |u.v|. min_pts counts the point itself. Border points join
/// the cluster of their nearest core neighbour, so the result does not depend
/// on pool order.
std::vector<EditingDirection> cluster_directions(const std::vector<PoolEntry>& pool, double eps = kDefaultClusterEps,
                                                 int min_pts = kDefaultMinPts);
std::vector<EditingDirection> cluster_directions(const std::vector<Eigen::VectorXd>& pool,
                                                 double eps = kDefaultClusterEps, int min_pts = kDefaultMinPts);

struct AlignmentMatrix {
  Eigen::MatrixXd entries;  // N x n_directions
};

AlignmentMatrix alignment(const PcaBasis& basis, const std::vector<EditingDirection>& directions);

struct PerturbResult {
  MelSpectrogram base;
  MelSpectrogram shifted;
  RowMatrix difference;  // shifted - base
};

PerturbResult perturb_render(const SpeechFeatures& features, const SpeakerEmbedding& z, const Eigen::VectorXd& v,
                             double epsilon, const VoiceContext& voice);

struct DiscoveryOptions {
  int k = kDefaultSingularVectors;
  double eps = kDefaultClusterEps;
  int min_pts = kDefaultMinPts;
  double step = kDefaultFdStep;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// One utterance per speaker, seeded.
std::vector<SpeechFeatures> discovery_features(const ToyPopulation& population, std::uint64_t seed,
                                               int frames = kDefaultFrames);

std::vector<EditingDirection> discover(const ToyPopulation& population,
                                       const std::vector<SpeechFeatures>& per_speaker_features,
                                       const DiscoveryOptions& options = {});

/// Assigns planted attribute labels from the mixing map rows: a direction gets
/// the label of the first five rows it matches with |cos| >= min_cos.
void label_planted_axes(std::vector<EditingDirection>& directions, const Eigen::MatrixXd& mixing_map,
                        double min_cos = 0.8);

/// |cos| of the best representative for each of the five planted rows.
std::vector<double> planted_axis_matches(const std::vector<EditingDirection>& directions,
                                         const Eigen::MatrixXd& mixing_map);

}  // namespace voiceloop
