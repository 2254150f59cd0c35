#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "voiceloop/embedding_space.hpp"

namespace voiceloop {

class Rng;

inline constexpr int kParamDim = 16;
inline constexpr int kMelBins = 80;
inline constexpr double kMelMinHz = 50.0;
inline constexpr double kMelMaxHz = 8000.0;
inline constexpr int kSampleRate = 22050;
inline constexpr int kHopSamples = 256;
inline constexpr int kDefaultFrames = 48;
inline constexpr int kVowelCount = 5;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SpeechFeatures {
  Eigen::VectorXd pitch_track;
  Eigen::VectorXd energy_track;
  std::vector<int> content_track;

  int length() const { return static_cast<int>(pitch_track.size()); }
};

struct MelSpectrogram {
  RowMatrix frames;  // T x F
  double frame_hop_seconds = static_cast<double>(kHopSamples) / kSampleRate;

  int n_frames() const { return static_cast<int>(frames.rows()); }
  int n_bins() const { return static_cast<int>(frames.cols()); }
};

struct GeneratorParams {
  Eigen::VectorXd theta;
};

/// Everything besides (features, z) that the generator needs.
struct VoiceContext {
  double base_f0_hz = 120.0;
  std::shared_ptr<const Eigen::MatrixXd> mixing_map;  // P x D, orthonormal rows
};

struct ToyPopulation {
  std::string group;  // "low-f0" | "high-f0"
  double base_f0_hz = 120.0;
  std::shared_ptr<const Eigen::MatrixXd> mixing_map;
  std::vector<std::string> ids;
  std::vector<SpeakerEmbedding> embeddings;
  std::vector<Eigen::VectorXd> theta_true;
  std::uint64_t seed = 0;

  std::size_t size() const { return embeddings.size(); }
  VoiceContext context() const { return {base_f0_hz, mixing_map}; }
  /// -1 when absent.
  int index_of(const std::string& id) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// Fractional mel-bin position of a frequency on the 80-bin grid.
double hz_to_bin(double hz);
double bin_to_hz(double bin);
int notch_bin();

Eigen::MatrixXd make_mixing_map(std::uint64_t seed, int p = kParamDim, int d = kEmbeddingDim);

GeneratorParams embed_to_params(const SpeakerEmbedding& z, const Eigen::MatrixXd& map);

void validate_features(const SpeechFeatures& features);

MelSpectrogram synthesize_params(const SpeechFeatures& features, const GeneratorParams& params, double base_f0_hz);
MelSpectrogram synthesize(const SpeechFeatures& features, const SpeakerEmbedding& z, const VoiceContext& voice);

/// Per-frame fundamental frequency in Hz for the given parameters.
Eigen::VectorXd f0_track(const SpeechFeatures& features, const GeneratorParams& params, double base_f0_hz);

Eigen::VectorXd normalize_pitch(const Eigen::VectorXd& raw);

/// concat(per-bin temporal mean, per-bin temporal std) of log(1 + m)
Eigen::VectorXd descriptor(const MelSpectrogram& m);
double similarity(const MelSpectrogram& a, const MelSpectrogram& b);
double mel_mse(const MelSpectrogram& a, const MelSpectrogram& b);

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

AudioBuffer render_waveform(const MelSpectrogram& mel, const Eigen::VectorXd& f0_track_hz);

/// Random utterance: smooth declining pitch contour, syllable energy arcs,
/// one vowel per syllable.
SpeechFeatures make_features(Rng& rng, int frames = kDefaultFrames);
SpeechFeatures make_features(std::uint64_t seed, int frames = kDefaultFrames);

/// Returns {low-f0 group, high-f0 group}.
std::pair<ToyPopulation, ToyPopulation> build_population(int count_per_group, std::uint64_t seed);

/// Seed used for the shared mixing map of a population built from `seed`.
std::uint64_t mixing_map_seed(std::uint64_t seed);

}  // namespace voiceloop
