#include "voiceloop/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "voiceloop/error.hpp"
#include "voiceloop/http_server.hpp"
#include "voiceloop/media.hpp"
#include "voiceloop/serialization.hpp"
#include "voiceloop/service.hpp"

namespace voiceloop {

namespace {

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string population_path;
  std::string group;
  int count = 0;
};

struct Inputs {
  std::shared_ptr<const ToyPopulation> population;
  Provenance provenance;
  ServiceConfig defaults;
};

ServiceConfig defaults_for(const Common& c) {
  ServiceConfig cfg = load_service_config(c.config_path, [](const char* k) { return std::getenv(k); });
  if (c.seed_set) cfg.seed = c.seed;
  if (c.count > 0) cfg.population_count = c.count;
  if (!c.group.empty()) cfg.group = c.group;
  return cfg;
}

ToyPopulation pick_group(const Json& doc, const std::string& group) {
  for (const auto& g : doc.at("groups"))
    if (g.at("group").get<std::string>() == group) return population_from_json(g);
  fail(ErrorCode::InvalidArgument, "population file has no group '" + group + "'");
}

Inputs load_inputs(const Common& c) {
  Inputs in;
  in.defaults = defaults_for(c);
  in.provenance.master_seed = in.defaults.seed;
  if (!c.population_path.empty()) {
    const std::string text = read_file(c.population_path);
    in.provenance.add_input("population", text);
    in.population = std::make_shared<const ToyPopulation>(pick_group(parse_json(text), in.defaults.group));
  } else {
    auto [low, high] = build_population(in.defaults.population_count, in.defaults.seed);
    in.population = std::make_shared<const ToyPopulation>(in.defaults.group == "low-f0" ? std::move(low) : std::move(high));
  }
  return in;
}

void add_population_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--population", c.population_path, "Population JSON from gen-population (default: regenerate from seed)");
  cmd->add_option("--group", c.group, "Speaker group: low-f0 or high-f0")->check(CLI::IsMember({"low-f0", "high-f0"}));
  cmd->add_option("--count", c.count, "Speakers per group when regenerating");
}

std::vector<std::string> resolve_targets(const ToyPopulation& pop, const std::string& spec) {
  std::vector<std::string> ids;
  if (spec.empty() || spec == "all") return pop.ids;
  if (std::all_of(spec.begin(), spec.end(), ::isdigit)) {
    const std::size_t n = std::min<std::size_t>(std::stoul(spec), pop.size());
    return {pop.ids.begin(), pop.ids.begin() + static_cast<std::ptrdiff_t>(n)};
  }
  std::stringstream ss(spec);
  std::string id;
  while (std::getline(ss, id, ','))
    if (!id.empty()) ids.push_back(id);
  return ids;
}

BasisPtr load_or_fit_basis(const std::string& path, const ToyPopulation& pop, int components, Provenance& prov) {
  if (!path.empty()) {
    const std::string text = read_file(path);
    prov.add_input("basis", text);
    return std::make_shared<const PcaBasis>(basis_from_json(parse_json(text)));
  }
  return std::make_shared<const PcaBasis>(fit_pca(pop.embeddings, components));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"voiceloop: human-in-the-loop voice search and latent direction analysis"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON config file (VOICELOOP_* environment variables override)");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](const std::uint64_t& s) { common.seed = s, common.seed_set = true; }, "Master seed");

  // gen-population
  auto* gen = app.add_subcommand("gen-population", "Generate the two-group toy speaker population");
  std::string gen_out;
  gen->add_option("--count", common.count, "Speakers per group (>= 17)");
  gen->add_option("--out", gen_out, "Output JSON path")->required();

  // fit-pca
  auto* fit = app.add_subcommand("fit-pca", "Fit the PCA search basis (default 16 components)");
  add_population_flags(fit, common);
  std::string fit_corpus, fit_out;
  bool fit_ids = false;
  int fit_components = kDefaultComponents;
  fit->add_option("--corpus", fit_corpus, "Embedding corpus: one comma-separated embedding per line");
  fit->add_flag("--with-ids", fit_ids, "Corpus lines start with a speaker id column");
  fit->add_option("--components", fit_components, "Number of principal components (default 16)");
  fit->add_option("--out", fit_out, "Output basis JSON path")->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Success threshold from intra-speaker similarity");
  add_population_flags(cal, common);
  int cal_tracks = kDefaultTracks;
  double cal_pct = kDefaultPercentile;
  std::string cal_out;
  cal->add_option("--tracks", cal_tracks, "Utterances per speaker (default 8)");
  cal->add_option("--percentile", cal_pct, "Percentile of pooled intra-speaker similarity (default 75)");
  cal->add_option("--out", cal_out, "Output JSON path (default: stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run simulated-user search experiments");
  add_population_flags(sim, common);
  std::string sim_targets, sim_basis, sim_json, sim_csv, sim_session;
  int sim_inits = kDefaultInits, sim_queries = kDefaultMaxQueries, sim_tracks = kDefaultTracks;
  double sim_noise = kDefaultNoiseStd, sim_pct = kDefaultPercentile;
  std::optional<double> sim_threshold;
  unsigned sim_threads = 0;
  bool sim_self = false;
  sim->add_option("--targets", sim_targets, "'all', a count N (first N speakers) or comma-separated ids");
  sim->add_option("--inits", sim_inits, "Initializations per target (default 20)");
  sim->add_option("--max-queries", sim_queries, "Query budget per session (default 32)");
  sim->add_option("--noise-std", sim_noise, "Preference noise standard deviation (default 0.01)");
  sim->add_option("--threshold", sim_threshold, "Success threshold (default: calibrate at --percentile)");
  sim->add_option("--tracks", sim_tracks, "Calibration utterances per speaker (default 8)");
  sim->add_option("--percentile", sim_pct, "Calibration percentile (default 75)");
  sim->add_option("--basis", sim_basis, "Basis JSON (default: fit on the population)");
  sim->add_option("--threads", sim_threads, "Worker threads (0: all cores)");
  sim->add_flag("--self-init", sim_self, "Diagnostic: start each run at its target");
  sim->add_option("--json", sim_json, "Report JSON path");
  sim->add_option("--csv", sim_csv, "Per-run CSV path");
  sim->add_option("--session-out", sim_session, "Write the first run's session snapshot here");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Discover editing directions from generator Jacobians");
  add_population_flags(ana, common);
  int ana_speakers = 0, ana_k = kDefaultSingularVectors, ana_min_pts = kDefaultMinPts;
  double ana_eps = kDefaultClusterEps, ana_step = kDefaultFdStep;
  unsigned ana_threads = 1;
  std::string ana_basis, ana_out, ana_align;
  ana->add_option("--speakers", ana_speakers, "Use the first N speakers (default: all)");
  ana->add_option("--k", ana_k, "Right singular vectors per probe (default 16)");
  ana->add_option("--eps", ana_eps, "DBSCAN radius on 1 - |cos| (default 0.1)");
  ana->add_option("--min-pts", ana_min_pts, "DBSCAN core size including the point (default 4)");
  ana->add_option("--step", ana_step, "Central-difference step (default 1e-3)");
  ana->add_option("--threads", ana_threads, "Worker threads");
  ana->add_option("--basis", ana_basis, "Basis JSON for the alignment matrix (default: fit)");
  ana->add_option("--out", ana_out, "Directions JSON path")->required();
  ana->add_option("--alignment", ana_align, "Alignment CSV path");

  // render-diff
  auto* diff = app.add_subcommand("render-diff", "Heat maps of mel changes along editing directions");
  add_population_flags(diff, common);
  std::string diff_dirs, diff_speaker, diff_prefix;
  double diff_eps = 0.5;
  diff->add_option("--directions", diff_dirs, "Directions JSON from analyze")->required();
  diff->add_option("--speaker", diff_speaker, "Speaker id (default: first)");
  diff->add_option("--epsilon", diff_eps, "Shift along each direction");
  diff->add_option("--out-prefix", diff_prefix, "Output path prefix")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");

  // replay
  auto* rep = app.add_subcommand("replay", "Re-execute a session snapshot and verify its trajectory hash");
  std::string rep_path;
  rep->add_option("--session", rep_path, "Session snapshot JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      const ServiceConfig cfg = defaults_for(common);
      auto [low, high] = build_population(cfg.population_count, cfg.seed);
      Provenance prov;
      prov.master_seed = cfg.seed;
      write_file(gen_out, dump({{"groups", {population_to_json(low), population_to_json(high)}},
                                {"provenance", provenance_to_json(prov)}}));
      out << "wrote " << low.size() << " + " << high.size() << " speakers to " << gen_out << "\n";
    } else if (*fit) {
      PcaBasis basis;
      Provenance prov;
      if (!fit_corpus.empty()) {
        const ServiceConfig cfg = defaults_for(common);
        prov.master_seed = cfg.seed;
        const std::string text = read_file(fit_corpus);
        prov.add_input("corpus", text);
        std::istringstream in(text);
        basis = fit_pca(read_embedding_corpus(in, fit_ids), fit_components);
      } else {
        Inputs in = load_inputs(common);
        prov = in.provenance;
        basis = fit_pca(in.population->embeddings, fit_components);
      }
      basis.provenance = prov;
      write_file(fit_out, dump(basis_to_json(basis)));
      out << "explained variance " << basis.explained_variance_ratios.sum() << "\n";
    } else if (*cal) {
      Inputs in = load_inputs(common);
      const CalibrationResult r = calibrate(*in.population, cal_tracks, cal_pct, in.defaults.seed, in.defaults.frames);
      const Json j = {{"threshold", r.threshold},         {"mean_intra_similarity", r.mean_intra},
                      {"n_pairs", r.n_pairs},             {"percentile", cal_pct},
                      {"n_tracks", cal_tracks},           {"group", in.population->group},
                      {"provenance", provenance_to_json(in.provenance)}};
      if (cal_out.empty()) out << dump(j); else write_file(cal_out, dump(j));
    } else if (*sim) {
      Inputs in = load_inputs(common);
      ExperimentSpec spec;
      spec.population = in.population;
      spec.basis = load_or_fit_basis(sim_basis, *in.population, kDefaultComponents, in.provenance);
      spec.target_ids = resolve_targets(*in.population, sim_targets);
      spec.n_inits = sim_inits;
      spec.max_queries = sim_queries;
      spec.noise_std = sim_noise;
      spec.master_seed = in.defaults.seed;
      spec.self_init = sim_self;
      spec.threads = sim_threads;
      spec.frames = in.defaults.frames;
      spec.success_threshold = sim_threshold ? *sim_threshold
                                             : calibrate(*in.population, sim_tracks, sim_pct, in.defaults.seed,
                                                         in.defaults.frames).threshold;
      ExperimentReport report = run_experiment(spec);
      report.provenance = in.provenance;
      if (!sim_json.empty()) write_file(sim_json, dump(report_to_json(report)));
      if (!sim_csv.empty()) write_file(sim_csv, report_to_csv(report));
      if (!sim_session.empty() && !spec.target_ids.empty())
        write_file(sim_session, dump(session_to_json(run_single(spec, spec.basis, spec.target_ids[0], 0).run.session)));
      char line[160];
      std::snprintf(line, sizeof line, "success rate (%%): mean %.1f +- %.1f, max %.1f, min %.1f (threshold %.4f)\n",
                    report.mean, report.std, report.max, report.min, report.threshold);
      out << line;
    } else if (*ana) {
      Inputs in = load_inputs(common);
      ToyPopulation pop = *in.population;
      if (ana_speakers > 0 && static_cast<std::size_t>(ana_speakers) < pop.size()) {
        pop.ids.resize(ana_speakers);
        pop.embeddings.resize(ana_speakers);
        pop.theta_true.resize(ana_speakers);
      }
      DiscoveryOptions opts;
      opts.k = ana_k;
      opts.eps = ana_eps;
      opts.min_pts = ana_min_pts;
      opts.step = ana_step;
      opts.seed = in.defaults.seed;
      opts.threads = ana_threads;
      auto dirs = discover(pop, discovery_features(pop, in.defaults.seed, in.defaults.frames), opts);
      label_planted_axes(dirs, *pop.mixing_map);
      write_file(ana_out, dump(directions_to_json(dirs, in.provenance)));
      if (!ana_align.empty()) {
        const BasisPtr basis = load_or_fit_basis(ana_basis, *in.population, kDefaultComponents, in.provenance);
        write_file(ana_align, alignment_to_csv(alignment(*basis, dirs), dirs));
      }
      out << dirs.size() << " directions:";
      for (const auto& d : dirs) out << ' ' << to_string(d.label.value_or(AttributeLabel::Unlabeled));
      out << "\n";
    } else if (*diff) {
      Inputs in = load_inputs(common);
      const auto dirs = directions_from_json(parse_json(read_file(diff_dirs)));
      const int s = diff_speaker.empty() ? 0 : in.population->index_of(diff_speaker);
      require(s >= 0, ErrorCode::UnknownTarget, "unknown speaker '" + diff_speaker + "'");
      const SpeechFeatures f = target_features(in.defaults.seed, in.population->ids[s], in.defaults.frames);
      for (std::size_t i = 0; i < dirs.size(); ++i) {
        const auto r = perturb_render(f, in.population->embeddings[s], dirs[i].vector.normalized(), diff_eps,
                                      in.population->context());
        const std::string stem = diff_prefix + "_" + std::to_string(i) + "_" +
                                 to_string(dirs[i].label.value_or(AttributeLabel::Unlabeled));
        write_file(stem + ".png", difference_png(r.difference));
        write_file(stem + ".mel1", encode_mel1(r.difference));
        out << "wrote " << stem << ".{png,mel1}\n";
      }
    } else if (*serve) {
      VoiceService service(defaults_for(common));
      return run_server(service, [&](int port) {
        out << "listening on " << service.config().host << ":" << port << "\n";
        out.flush();
      });
    } else if (*rep) {
      const Json stored = parse_json(read_file(rep_path));
      const SearchSession snapshot = session_from_json(stored);
      SearchSession s = start_session(snapshot.basis, snapshot.config, snapshot.initial);
      for (const auto& h : snapshot.history) s = submit_choice(s, h.offset);
      if (snapshot.status == SessionStatus::Satisfied) s = mark_satisfied(s);
      const std::string recomputed = hex64(trajectory_hash(s));
      const std::string expected = stored.value("trajectory_hash", std::string());
      bool same_points = s.history.size() == snapshot.history.size();
      for (std::size_t i = 0; same_points && i < s.history.size(); ++i)
        same_points = s.history[i].embedding.values == snapshot.history[i].embedding.values;
      out << "stored " << expected << " recomputed " << recomputed << "\n";
      if (recomputed != expected || !same_points) {
        err << "trajectory hash mismatch\n";
        return 1;
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return (e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::InvalidArgument) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace voiceloop
