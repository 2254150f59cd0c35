#include "voiceloop/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "voiceloop/error.hpp"

namespace voiceloop {

Json vector_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::ParseError, "expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorCode::ParseError, "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json provenance_to_json(const Provenance& p) {
  Json digests = Json::object();
  for (const auto& [k, v] : p.input_digests) digests[k] = v;
  return {{"tool_version", p.tool_version}, {"master_seed", p.master_seed}, {"input_digests", digests}};
}

Provenance provenance_from_json(const Json& j) {
  Provenance p;
  p.tool_version = j.value("tool_version", std::string(kToolVersion));
  p.master_seed = j.value("master_seed", std::uint64_t{0});
  if (j.contains("input_digests"))
    for (const auto& [k, v] : j["input_digests"].items()) p.input_digests[k] = v.get<std::string>();
  return p;
}

Json basis_to_json(const PcaBasis& b) {
  Json dirs = Json::array();
  for (int i = 0; i < b.n_components(); ++i) dirs.push_back(vector_to_json(b.directions.col(i)));
  Json j = {{"dimension", b.dimension()},
            {"n_components", b.n_components()},
            {"mean", vector_to_json(b.mean)},
            {"offset", vector_to_json(b.offset)},
            {"directions", dirs},
            {"component_stds", vector_to_json(b.component_stds)},
            {"explained_variance_ratios", vector_to_json(b.explained_variance_ratios)}};
  if (b.provenance) j["provenance"] = provenance_to_json(*b.provenance);
  return j;
}

PcaBasis basis_from_json(const Json& j) {
  try {
    PcaBasis b;
    const int d = j.at("dimension").get<int>();
    const int n = j.at("n_components").get<int>();
    b.mean = vector_from_json(j.at("mean"));
    b.offset = vector_from_json(j.at("offset"));
    b.component_stds = vector_from_json(j.at("component_stds"));
    b.explained_variance_ratios = vector_from_json(j.at("explained_variance_ratios"));
    const Json& dirs = j.at("directions");
    require(static_cast<int>(dirs.size()) == n, ErrorCode::ParseError, "direction count differs from n_components");
    b.directions.resize(d, n);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd w = vector_from_json(dirs[i]);
      require(w.size() == d, ErrorCode::DimensionMismatch, "direction length differs from dimension");
      b.directions.col(i) = w;
    }
    require(b.mean.size() == d && b.offset.size() == d, ErrorCode::DimensionMismatch, "mean/offset length");
    require(b.component_stds.size() == n && b.explained_variance_ratios.size() == n, ErrorCode::DimensionMismatch,
            "per-component list length");
    if (j.contains("provenance")) b.provenance = provenance_from_json(j["provenance"]);
    return b;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("basis: ") + e.what());
  }
}

Json config_to_json(const SearchConfig& c) {
  return {{"n_directions", c.n_directions},
          {"step_sizes", c.step_sizes},
          {"max_queries", c.max_queries},
          {"offsets", c.offsets}};
}

SearchConfig config_from_json(const Json& j) {
  SearchConfig c;
  try {
    if (j.contains("n_directions")) c.n_directions = j["n_directions"].get<int>();
    if (j.contains("step_sizes")) c.step_sizes = j["step_sizes"].get<std::vector<double>>();
    if (j.contains("max_queries")) c.max_queries = j["max_queries"].get<int>();
    if (j.contains("offsets")) {
      const auto o = j["offsets"].get<std::vector<int>>();
      require(o.size() == 5, ErrorCode::InvalidConfig, "offsets are fixed to -2, -1, 0, +1, +2");
      std::copy(o.begin(), o.end(), c.offsets.begin());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  return c;
}

Json candidates_to_json(const CandidateSet& c) {
  Json cands = Json::array();
  for (const auto& z : c.candidates) cands.push_back(vector_to_json(z.values));
  return {{"query_index", c.query_index}, {"direction_index", c.direction_index}, {"scale", c.scale}, {"candidates", cands}};
}

Json session_to_json(const SearchSession& s) {
  Json history = Json::array();
  for (const auto& h : s.history)
    history.push_back({{"iteration", h.iteration},
                       {"direction_index", h.direction_index},
                       {"offset", h.offset},
                       {"embedding", vector_to_json(h.embedding.values)}});
  Json j = {{"basis", basis_to_json(*s.basis)},
            {"config", config_to_json(s.config)},
            {"initial", vector_to_json(s.initial.values)},
            {"current", vector_to_json(s.current.values)},
            {"iteration", s.iteration},
            {"status", to_string(s.status)}};
  j["pending"] = s.pending ? candidates_to_json(*s.pending) : Json(nullptr);
  j["history"] = history;
  j["trajectory_hash"] = hex64(trajectory_hash(s));
  return j;
}

SearchSession session_from_json(const Json& j) {
  try {
    SearchSession s;
    s.basis = std::make_shared<const PcaBasis>(basis_from_json(j.at("basis")));
    s.config = resolve_config(*s.basis, config_from_json(j.at("config")));
    s.initial = {vector_from_json(j.at("initial"))};
    s.current = {vector_from_json(j.at("current"))};
    s.iteration = j.at("iteration").get<int>();
    s.status = parse_status(j.at("status").get<std::string>());
    for (const auto& h : j.at("history"))
      s.history.push_back({h.at("iteration").get<int>(), h.at("direction_index").get<int>(), h.at("offset").get<int>(),
                           {vector_from_json(h.at("embedding"))}});
    if (s.status == SessionStatus::AwaitingChoice) s.pending = next_candidates(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("session: ") + e.what());
  }
}

Json trajectory_to_json(const std::vector<TrajectoryPoint>& points) {
  Json a = Json::array();
  for (const auto& p : points)
    a.push_back({{"iteration", p.iteration}, {"alpha", vector_to_json(p.alpha.alpha)}, {"xy", {p.x, p.y}}});
  return a;
}

Json population_to_json(const ToyPopulation& pop) {
  Json speakers = Json::array();
  for (std::size_t i = 0; i < pop.size(); ++i)
    speakers.push_back({{"id", pop.ids[i]},
                        {"embedding", vector_to_json(pop.embeddings[i].values)},
                        {"theta_true", vector_to_json(pop.theta_true[i])}});
  Json map = Json::array();
  for (Eigen::Index r = 0; r < pop.mixing_map->rows(); ++r) map.push_back(vector_to_json(pop.mixing_map->row(r).transpose()));
  return {{"group", pop.group}, {"base_f0_hz", pop.base_f0_hz}, {"seed", pop.seed}, {"mixing_map", map}, {"speakers", speakers}};
}

ToyPopulation population_from_json(const Json& j) {
  try {
    ToyPopulation pop;
    pop.group = j.at("group").get<std::string>();
    pop.base_f0_hz = j.at("base_f0_hz").get<double>();
    pop.seed = j.value("seed", std::uint64_t{0});
    const Json& rows = j.at("mixing_map");
    Eigen::MatrixXd map(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) map.row(static_cast<Eigen::Index>(r)) = vector_from_json(rows[r]).transpose();
    pop.mixing_map = std::make_shared<const Eigen::MatrixXd>(std::move(map));
    for (const auto& s : j.at("speakers")) {
      pop.ids.push_back(s.at("id").get<std::string>());
      pop.embeddings.push_back({vector_from_json(s.at("embedding"))});
      pop.theta_true.push_back(s.contains("theta_true") ? vector_from_json(s["theta_true"]) : Eigen::VectorXd());
    }
    return pop;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("population: ") + e.what());
  }
}

Json mel_to_json(const MelSpectrogram& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.frames.size(); ++i) data.push_back(m.frames.data()[i]);
  return {{"t", m.n_frames()}, {"f", m.n_bins()}, {"hop_seconds", m.frame_hop_seconds}, {"data", data}};
}

MelSpectrogram mel_from_json(const Json& j) {
  MelSpectrogram m;
  const int t = j.at("t").get<int>();
  const int f = j.at("f").get<int>();
  m.frame_hop_seconds = j.at("hop_seconds").get<double>();
  const Eigen::VectorXd data = vector_from_json(j.at("data"));
  require(data.size() == static_cast<Eigen::Index>(t) * f, ErrorCode::ParseError, "mel data size mismatch");
  m.frames = Eigen::Map<const RowMatrix>(data.data(), t, f);
  return m;
}

Json report_to_json(const ExperimentReport& r) {
  Json targets = Json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"target_id", t.target_id},
                       {"success_rate", t.success_rate},
                       {"mean_best_similarity", t.mean_best_similarity},
                       {"tag", t.tag}});
  Json runs = Json::array();
  for (const auto& x : r.runs)
    runs.push_back({{"target_id", x.target_id},
                    {"init_index", x.init_index},
                    {"init_id", x.init_id},
                    {"seed", x.seed},
                    {"best_similarity", x.best_similarity},
                    {"first_success_query", x.first_success_query},
                    {"success", x.success},
                    {"monotone", x.monotone},
                    {"trajectory_hash", hex64(x.trajectory_hash)}});
  return {{"statistics", {{"mean", r.mean}, {"std", r.std}, {"max", r.max}, {"min", r.min}}},
          {"aggregate_success_rate", r.aggregate_success_rate},
          {"threshold", r.threshold},
          {"noise_std", r.noise_std},
          {"n_inits", r.n_inits},
          {"max_queries", r.max_queries},
          {"targets", targets},
          {"runs", runs},
          {"provenance", provenance_to_json(r.provenance)}};
}

std::string report_to_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "target_id,init_index,seed,best_similarity,first_success_query,success\n";
  char buf[64];
  for (const auto& x : r.runs) {
    std::snprintf(buf, sizeof buf, "%.17g", x.best_similarity);
    out << x.target_id << ',' << x.init_index << ',' << x.seed << ',' << buf << ',' << x.first_success_query << ','
        << (x.success ? 1 : 0) << '\n';
  }
  return out.str();
}

Json directions_to_json(const std::vector<EditingDirection>& dirs, const Provenance& p) {
  Json a = Json::array();
  for (const auto& d : dirs)
    a.push_back({{"label", to_string(d.label.value_or(AttributeLabel::Unlabeled))},
                 {"vector", vector_to_json(d.vector)},
                 {"n_probes", d.source_probes.size()},
                 {"mean_singular_value", d.mean_singular_value}});
  return {{"directions", a}, {"provenance", provenance_to_json(p)}};
}

std::vector<EditingDirection> directions_from_json(const Json& j) {
  std::vector<EditingDirection> out;
  try {
    for (const auto& d : j.at("directions")) {
      EditingDirection e;
      e.vector = vector_from_json(d.at("vector"));
      e.label = parse_label(d.value("label", std::string("unlabeled")));
      e.mean_singular_value = d.value("mean_singular_value", 0.0);
      e.n_members = d.value("n_probes", 0);
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("directions: ") + e.what());
  }
  return out;
}

std::string alignment_to_csv(const AlignmentMatrix& a, const std::vector<EditingDirection>& dirs) {
  std::ostringstream out;
  out << "component";
  for (const auto& d : dirs) out << ',' << to_string(d.label.value_or(AttributeLabel::Unlabeled));
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < a.entries.rows(); ++i) {
    out << (i + 1);
    for (Eigen::Index j = 0; j < a.entries.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a.entries(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace voiceloop
