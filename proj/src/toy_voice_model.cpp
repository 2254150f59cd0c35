#include "voiceloop/toy_voice_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "voiceloop/error.hpp"
#include "voiceloop/random.hpp"

namespace voiceloop {

namespace {

constexpr double kGain = 8.0;
constexpr double kEnvelopeFloor = 0.5;
constexpr double kPitchOffsetOctaves = 0.5;
constexpr double kPitchVariance = 0.10;
constexpr double kTiltBase = 1.2;
constexpr double kTiltSlope = 0.2;
constexpr double kStrainBase = 1.25;
constexpr double kStrainSlope = 0.06;
constexpr double kNotchDepth = 0.15;
constexpr double kNotchWidthBins = 3.0;
constexpr double kFormantShift = 0.0015;
constexpr double kBandwidthShift = 0.005;
constexpr double kTaperStartHz = 7000.0;
constexpr int kPaintRadius = 9;

constexpr std::array<std::array<double, 3>, kVowelCount> kVowelFormants{{
    {730.0, 1090.0, 2440.0},
    {530.0, 1840.0, 2480.0},
    {270.0, 2290.0, 3010.0},
    {570.0, 840.0, 2410.0},
    {300.0, 870.0, 2240.0},
}};
constexpr std::array<double, 3> kFormantBandwidth{90.0, 120.0, 170.0};
constexpr std::array<double, 3> kFormantGain{1.0, 0.6, 0.35};

constexpr int kFormantSlots = kParamDim - 5;
constexpr int kMaxSegmentOffset = 10;
constexpr int kBoundary = kVowelCount;  // sentinel for "no neighbouring vowel"
constexpr int kContextCount = (kVowelCount + 1) * kVowelCount * (kVowelCount + 1) * kMaxSegmentOffset;
constexpr std::uint64_t kContextSeed = 12345;

using FormantMix = Eigen::Matrix<double, 6, kFormantSlots>;

// One orthonormal-row 6 x 11 map per coarticulation context
// (previous vowel, vowel, next vowel, frames into the segment).
const std::vector<FormantMix>& formant_mixes() {
  static const std::vector<FormantMix> table = [] {
    std::vector<FormantMix> out(kContextCount);
    Rng rng(kContextSeed);
    for (auto& m : out) {
      Eigen::Matrix<double, kFormantSlots, 6> g;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(kFormantSlots, 6);
      m = q.transpose();
    }
    return out;
  }();
  return table;
}

std::vector<int> context_indices(const std::vector<int>& content) {
  const int n = static_cast<int>(content.size());
  struct Segment {
    int begin, end, vowel;
  };
  std::vector<Segment> segs;
  for (int t = 0; t < n;) {
    int u = t;
    while (u < n && content[u] == content[t]) ++u;
    segs.push_back({t, u, content[t]});
    t = u;
  }
  std::vector<int> ctx(n);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const int prev = i > 0 ? segs[i - 1].vowel : kBoundary;
    const int next = i + 1 < segs.size() ? segs[i + 1].vowel : kBoundary;
    const int base = ((prev * kVowelCount + segs[i].vowel) * (kVowelCount + 1) + next) * kMaxSegmentOffset;
    for (int t = segs[i].begin; t < segs[i].end; ++t) ctx[t] = base + std::min(t - segs[i].begin, kMaxSegmentOffset - 1);
  }
  return ctx;
}

// C-infinity bump that takes harmonics smoothly to zero between 7 and 8 kHz.
double taper(double hz) {
  const double x = (hz - kTaperStartHz) / (kMelMaxHz - kTaperStartHz);
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - x * x));
}

// Adds amp * exp(-(k - centre)^2 / 2) to row over a +-9 bin window.
void paint_bump(double* row, double centre, double amp) {
  int k0 = static_cast<int>(std::ceil(centre - kPaintRadius));
  const int k1 = std::min(static_cast<int>(std::floor(centre + kPaintRadius)), kMelBins - 1);
  if (k1 < 0 || k0 > kMelBins - 1) return;
  k0 = std::max(k0, 0);
  double d = k0 - centre;
  double g = std::exp(-0.5 * d * d);
  double r = std::exp(-d - 0.5);
  constexpr double kDecay = 0.36787944117144233;  // e^-1
  for (int k = k0; k <= k1; ++k) {
    row[k] += amp * g;
    g *= r;
    r *= kDecay;
  }
}

const double kMelLow = 2595.0 * std::log10(1.0 + kMelMinHz / 700.0);
const double kMelHigh = 2595.0 * std::log10(1.0 + kMelMaxHz / 700.0);
const double kMelStep = (kMelHigh - kMelLow) / (kMelBins - 1);

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
double hz_to_bin(double hz) { return (hz_to_mel(hz) - kMelLow) / kMelStep; }
double bin_to_hz(double bin) { return mel_to_hz(kMelLow + bin * kMelStep); }

int notch_bin() {
  static const int bin = [] {
    const double target = hz_to_bin(1000.0);
    int best = 0;
    for (int k = 1; k < kMelBins; ++k)
      if (std::abs(k - target) < std::abs(best - target)) best = k;
    return best;
  }();
  return bin;
}

int ToyPopulation::index_of(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

Eigen::MatrixXd make_mixing_map(std::uint64_t seed, int p, int d) {
  Rng rng(seed);
  Eigen::MatrixXd g(d, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, p);
  return q.transpose();
}

GeneratorParams embed_to_params(const SpeakerEmbedding& z, const Eigen::MatrixXd& map) {
  require(z.dimension() == map.cols(), ErrorCode::DimensionMismatch,
          "embedding dimension " + std::to_string(z.dimension()) + " vs map " + std::to_string(map.cols()));
  return {(map * z.values).array().tanh().matrix()};
}

void validate_features(const SpeechFeatures& f) {
  const auto t = f.pitch_track.size();
  require(t >= 8, ErrorCode::InvalidFeatures, "feature tracks need at least 8 frames");
  require(f.energy_track.size() == t && f.content_track.size() == static_cast<std::size_t>(t), ErrorCode::InvalidFeatures,
          "feature tracks differ in length");
  require(f.pitch_track.allFinite() && f.energy_track.allFinite(), ErrorCode::InvalidFeatures, "non-finite feature value");
  require(f.energy_track.minCoeff() >= 0.0 && f.energy_track.maxCoeff() <= 1.0, ErrorCode::InvalidFeatures,
          "energy outside [0, 1]");
  for (int v : f.content_track) require(v >= 0 && v < kVowelCount, ErrorCode::InvalidFeatures, "vowel id outside 0..4");
}

Eigen::VectorXd f0_track(const SpeechFeatures& features, const GeneratorParams& params, double base_f0_hz) {
  const auto& th = params.theta;
  const double level = base_f0_hz * std::exp2(kPitchOffsetOctaves * th(0));
  const double spread = kPitchVariance * std::exp(th(1));
  return features.pitch_track.unaryExpr([&](double p) { return level * std::exp2(spread * p); });
}

MelSpectrogram synthesize_params(const SpeechFeatures& features, const GeneratorParams& params, double base_f0_hz) {
  validate_features(features);
  require(params.theta.size() == kParamDim, ErrorCode::DimensionMismatch, "theta must have 16 entries");
  const auto& th = params.theta;
  const int frames = features.length();

  const Eigen::VectorXd f0 = f0_track(features, params, base_f0_hz);
  const double tilt = kTiltBase + kTiltSlope * (1.0 - th(2));
  const double strain = kStrainBase + kStrainSlope * th(3);
  const double notch = kNotchDepth * (1.0 + th(4)) / 2.0;
  const Eigen::Matrix<double, kFormantSlots, 1> formant_theta = th.tail(kFormantSlots);
  const auto& mixes = formant_mixes();
  const std::vector<int> ctx = context_indices(features.content_track);

  MelSpectrogram mel;
  mel.frames = RowMatrix::Zero(frames, kMelBins);
  for (int t = 0; t < frames; ++t) {
    const double energy = features.energy_track(t);
    if (energy == 0.0) continue;
    const Eigen::Matrix<double, 6, 1> q = mixes[ctx[t]] * formant_theta;
    const auto& vowel = kVowelFormants[features.content_track[t]];
    std::array<double, 3> centre{}, inv_two_var{};
    for (int j = 0; j < 3; ++j) {
      centre[j] = vowel[j] * std::exp2(kFormantShift * q(j));
      const double bw = kFormantBandwidth[j] * std::exp2(kBandwidthShift * q(3 + j));
      inv_two_var[j] = 1.0 / (2.0 * bw * bw);
    }
    double* row = mel.frames.row(t).data();
    for (int h = 1; h * f0(t) < kMelMaxHz; ++h) {
      const double hz = h * f0(t);
      double env = kEnvelopeFloor;
      for (int j = 0; j < 3; ++j) {
        const double d = hz - centre[j];
        env += kFormantGain[j] * std::exp(-d * d * inv_two_var[j]);
      }
      const double amp = energy * std::exp(-tilt * std::log(static_cast<double>(h))) * std::pow(env, strain) * taper(hz);
      if (amp == 0.0) continue;
      paint_bump(row, hz_to_bin(hz), amp);
    }
  }
  const int kn = notch_bin();
  for (int k = 0; k < kMelBins; ++k) {
    const double dk = k - kn;
    const double w = kGain * (1.0 - notch * std::exp(-dk * dk / (2.0 * kNotchWidthBins * kNotchWidthBins)));
    mel.frames.col(k) *= w;
  }
  return mel;
}

MelSpectrogram synthesize(const SpeechFeatures& features, const SpeakerEmbedding& z, const VoiceContext& voice) {
  require(voice.mixing_map != nullptr, ErrorCode::InvalidArgument, "voice context has no mixing map");
  return synthesize_params(features, embed_to_params(z, *voice.mixing_map), voice.base_f0_hz);
}

Eigen::VectorXd normalize_pitch(const Eigen::VectorXd& raw) {
  require(raw.size() >= 2, ErrorCode::ZeroVariance, "pitch track needs at least two frames");
  const double mean = raw.mean();
  const Eigen::VectorXd c = raw.array() - mean;
  const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(raw.size()));
  require(sd > 1e-12, ErrorCode::ZeroVariance, "pitch track is constant");
  return c / sd;
}

Eigen::VectorXd descriptor(const MelSpectrogram& m) {
  require(m.n_frames() > 0 && m.n_bins() > 0, ErrorCode::EmptySpectrogram, "spectrogram has no frames");
  const RowMatrix l = m.frames.array().log1p().matrix();
  const double n = static_cast<double>(l.rows());
  const Eigen::RowVectorXd mean = l.colwise().sum() / n;
  const Eigen::RowVectorXd var = (l.rowwise() - mean).array().square().colwise().sum() / n;
  Eigen::VectorXd d(2 * l.cols());
  d << mean.transpose(), var.transpose().cwiseSqrt();
  return d;
}

double similarity(const MelSpectrogram& a, const MelSpectrogram& b) {
  require(a.n_bins() == b.n_bins(), ErrorCode::DimensionMismatch, "spectrograms differ in bin count");
  const Eigen::VectorXd da = descriptor(a);
  const Eigen::VectorXd db = descriptor(b);
  const double na = da.norm();
  const double nb = db.norm();
  if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0) ? 1.0 : 0.0;
  return std::clamp(da.dot(db) / (na * nb), -1.0, 1.0);
}

double mel_mse(const MelSpectrogram& a, const MelSpectrogram& b) {
  require(a.n_frames() == b.n_frames() && a.n_bins() == b.n_bins(), ErrorCode::DimensionMismatch,
          "spectrogram shapes differ");
  require(a.frames.size() > 0, ErrorCode::EmptySpectrogram, "spectrogram has no frames");
  return (a.frames.array().log1p() - b.frames.array().log1p()).square().mean();
}

AudioBuffer render_waveform(const MelSpectrogram& mel, const Eigen::VectorXd& f0_hz) {
  const int frames = mel.n_frames();
  require(f0_hz.size() == frames, ErrorCode::InvalidF0, "f0 track length differs from frame count");
  for (Eigen::Index i = 0; i < f0_hz.size(); ++i)
    require(std::isfinite(f0_hz(i)) && f0_hz(i) > 0.0, ErrorCode::InvalidF0, "f0 must be positive and finite");

  AudioBuffer out;
  const int n = frames * kHopSamples;
  out.samples.assign(n, 0.0);
  if (frames == 0) return out;

  // Running fundamental phase, piecewise-constant f0 per hop.
  std::vector<double> phase(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    phase[i] = acc;
    acc += 2.0 * std::numbers::pi * f0_hz(i / kHopSamples) / kSampleRate;
    if (acc > 2.0 * std::numbers::pi * 1e6) acc = std::fmod(acc, 2.0 * std::numbers::pi);
  }

  const int win = 2 * kHopSamples;
  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

  const double limit = std::min(kMelMaxHz, 0.5 * kSampleRate);
  std::vector<double> amps;
  for (int t = 0; t < frames; ++t) {
    const double f0 = f0_hz(t);
    amps.clear();
    for (int h = 1; h * f0 < limit; ++h) {
      const double pos = std::clamp(hz_to_bin(h * f0), 0.0, static_cast<double>(kMelBins - 1));
      const int lo = std::min(static_cast<int>(pos), kMelBins - 2);
      const double frac = pos - lo;
      amps.push_back((1.0 - frac) * mel.frames(t, lo) + frac * mel.frames(t, lo + 1));
    }
    const int start = t * kHopSamples + kHopSamples / 2 - kHopSamples;
    for (int i = 0; i < win; ++i) {
      const int s = start + i;
      if (s < 0 || s >= n) continue;
      double v = 0.0;
      for (std::size_t h = 0; h < amps.size(); ++h)
        if (amps[h] != 0.0) v += amps[h] * std::sin(static_cast<double>(h + 1) * phase[s]);
      out.samples[s] += hann[i] * v;
    }
  }
  double peak = 0.0;
  for (double s : out.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0)
    for (double& s : out.samples) s *= 0.9 / peak;
  return out;
}

SpeechFeatures make_features(Rng& rng, int frames) {
  require(frames >= 8, ErrorCode::InvalidFeatures, "need at least 8 frames");
  Eigen::VectorXd pitch = Eigen::VectorXd::Zero(frames);
  for (int k = 1; k <= 3; ++k) {
    const double amp = rng.normal() / k;
    const double rate = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 6.28);
    for (int t = 0; t < frames; ++t) {
      const double u = static_cast<double>(t) / (frames - 1);
      pitch(t) += amp * std::sin(2.0 * std::numbers::pi * k * u * rate + phase);
    }
  }
  const double declination = rng.uniform(0.5, 1.5);
  for (int t = 0; t < frames; ++t) pitch(t) -= declination * static_cast<double>(t) / (frames - 1);

  SpeechFeatures f;
  f.pitch_track = normalize_pitch(pitch);
  f.energy_track = Eigen::VectorXd::Zero(frames);
  f.content_track.assign(frames, 0);
  for (int t = 0; t < frames;) {
    const int len = 4 + static_cast<int>(rng.below(6));
    const int vowel = static_cast<int>(rng.below(kVowelCount));
    const double loud = 0.3 + 0.7 * rng.uniform();
    for (int i = 0; i < len && t + i < frames; ++i) {
      f.content_track[t + i] = vowel;
      f.energy_track(t + i) = std::clamp(loud * std::sin(std::numbers::pi * (i + 0.5) / len), 0.0, 1.0);
    }
    t += len;
  }
  return f;
}

SpeechFeatures make_features(std::uint64_t seed, int frames) {
  Rng rng(seed);
  return make_features(rng, frames);
}

std::uint64_t mixing_map_seed(std::uint64_t seed) { return derive_seed({seed, 0x6d6978696e67ULL}); }

std::pair<ToyPopulation, ToyPopulation> build_population(int count_per_group, std::uint64_t seed) {
  require(count_per_group >= 17, ErrorCode::InvalidArgument, "need at least 17 speakers per group");
  static constexpr std::array<double, kParamDim> kRanges{0.6,  0.3,  0.5,  0.42, 0.36, 0.15, 0.15, 0.15,
                                                         0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.15};
  constexpr double kNullSpaceStd = 0.01;
  auto map = std::make_shared<const Eigen::MatrixXd>(make_mixing_map(mixing_map_seed(seed)));

  auto build = [&](int group, const char* name, const char* prefix, double base) {
    ToyPopulation pop;
    pop.group = name;
    pop.base_f0_hz = base;
    pop.mixing_map = map;
    pop.seed = seed;
    for (int i = 0; i < count_per_group; ++i) {
      Rng rng(derive_seed({seed, static_cast<std::uint64_t>(group), static_cast<std::uint64_t>(i)}));
      Eigen::VectorXd theta(kParamDim);
      for (int j = 0; j < kParamDim; ++j) theta(j) = rng.uniform(-1.0, 1.0) * kRanges[j];
      Eigen::VectorXd noise(kEmbeddingDim);
      for (int j = 0; j < kEmbeddingDim; ++j) noise(j) = kNullSpaceStd * rng.normal();
      noise -= map->transpose() * (*map * noise);
      const Eigen::VectorXd pre = theta.array().atanh().matrix();
      char id[16];
      std::snprintf(id, sizeof id, "%s%03d", prefix, i);
      pop.ids.emplace_back(id);
      pop.embeddings.push_back({map->transpose() * pre + noise});
      pop.theta_true.push_back(theta);
    }
    return pop;
  };
  return {build(0, "low-f0", "L", 120.0), build(1, "high-f0", "H", 220.0)};
}

}  // namespace voiceloop
