#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "voiceloop/embedding_space.hpp"
#include "voiceloop/latent_analysis.hpp"
#include "voiceloop/search_engine.hpp"
#include "voiceloop/sim_harness.hpp"
#include "voiceloop/toy_voice_model.hpp"

namespace voiceloop {

using Json = nlohmann::ordered_json;

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);

Json basis_to_json(const PcaBasis& basis);
PcaBasis basis_from_json(const Json& j);

Json config_to_json(const SearchConfig& c);
SearchConfig config_from_json(const Json& j);

Json candidates_to_json(const CandidateSet& c);

/// Full snapshot; `trajectory_hash` is included for replay checks.
Json session_to_json(const SearchSession& s);
SearchSession session_from_json(const Json& j);

Json trajectory_to_json(const std::vector<TrajectoryPoint>& points);

Json population_to_json(const ToyPopulation& pop);
ToyPopulation population_from_json(const Json& j);

Json mel_to_json(const MelSpectrogram& m);
MelSpectrogram mel_from_json(const Json& j);

Json report_to_json(const ExperimentReport& r);
std::string report_to_csv(const ExperimentReport& r);

Json directions_to_json(const std::vector<EditingDirection>& dirs, const Provenance& p);
std::vector<EditingDirection> directions_from_json(const Json& j);

std::string alignment_to_csv(const AlignmentMatrix& a, const std::vector<EditingDirection>& dirs);

/// Canonical text form used for files and the HTTP API.
std::string dump(const Json& j);
Json parse_json(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace voiceloop
