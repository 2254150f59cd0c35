// Prints one PASS/FAIL line per primary acceptance criterion and exits
// nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>

#include "voiceloop/error.hpp"
#include "voiceloop/http_server.hpp"
#include "voiceloop/latent_analysis.hpp"
#include "voiceloop/serialization.hpp"
#include "voiceloop/service.hpp"
#include "voiceloop/sim_harness.hpp"

#include <httplib.h>

using namespace voiceloop;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void guarded(int n, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

ServiceConfig fixture() {
  return load_service_config(std::string(VOICELOOP_FIXTURE_DIR) + "/toy.json", nullptr);
}

std::vector<std::string> first_targets(const ToyPopulation& pop, int n) {
  return {pop.ids.begin(), pop.ids.begin() + n};
}

}  // namespace

int main() {
  const ServiceConfig cfg = fixture();
  auto [low, high] = build_population(cfg.population_count, cfg.seed);
  const auto pop = std::make_shared<const ToyPopulation>(cfg.group == "low-f0" ? low : high);
  const BasisPtr basis = std::make_shared<const PcaBasis>(fit_pca(pop->embeddings, cfg.n_components));
  const double tau = calibrate_threshold(*pop, kDefaultTracks, kDefaultPercentile, cfg.seed);

  ExperimentSpec spec;
  spec.population = pop;
  spec.basis = basis;
  spec.target_ids = first_targets(*pop, 50);
  spec.n_inits = 5;
  spec.max_queries = 32;
  spec.noise_std = 0.0;
  spec.master_seed = cfg.seed;
  spec.success_threshold = tau;
  spec.threads = 0;
  spec.frames = cfg.frames;

  ExperimentReport noiseless;
  guarded(1, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    noiseless = run_experiment(spec);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1, noiseless.aggregate_success_rate >= 90.0 && secs <= 120.0,
           fmt("success %.1f%% (>= 90), %.1f s (<= 120), tau %.5f", noiseless.aggregate_success_rate, secs, tau));
  });

  guarded(2, [&] {
    std::size_t monotone = 0;
    for (const auto& r : noiseless.runs) monotone += r.monotone && non_decreasing(r.surrogate_series);
    report(2, !noiseless.runs.empty() && monotone == noiseless.runs.size(),
           fmt("%.0f / %.0f noiseless sessions non-decreasing", static_cast<double>(monotone),
               static_cast<double>(noiseless.runs.size())));
  });

  guarded(3, [&] {
    ExperimentSpec noisy = spec;
    noisy.noise_std = 0.01;
    const ExperimentReport r = run_experiment(noisy);
    const double drop = noiseless.aggregate_success_rate - r.aggregate_success_rate;
    report(3, drop <= 15.0,
           fmt("noisy %.1f%% vs noiseless %.1f%%, drop %.1f points (<= 15)", r.aggregate_success_rate,
               noiseless.aggregate_success_rate, drop));
  });

  guarded(4, [&] {
    const double explained = basis->explained_variance_ratios.sum();
    const double ortho = orthonormality_error(*basis);
    Rng rng(cfg.seed);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      Coefficients a{Eigen::VectorXd(basis->n_components())};
      for (int i = 0; i < basis->n_components(); ++i) a.alpha(i) = 3.0 * basis->component_stds(i) * rng.normal();
      const SpeakerEmbedding z = reconstruct(a, *basis);
      const SpeakerEmbedding back = reduce(z, *basis, basis->n_components());
      worst = std::max(worst, (back.values - z.values).norm() / z.values.norm());
    }
    report(4, explained >= 0.95 && worst <= 1e-6 && ortho <= 1e-9,
           fmt("explained %.4f (>= 0.95), reduce rel err %.2e (<= 1e-6), orthonormality %.2e (<= 1e-9)", explained,
               worst, ortho));
  });

  guarded(5, [&] {
    Rng rng(cfg.seed + 5);
    Eigen::MatrixXd m(40, 12);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    const Generator lin = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(m * z); };
    Eigen::VectorXd z0(12);
    for (int i = 0; i < 12; ++i) z0(i) = rng.normal();
    const double lin_err = (jacobian_fd(lin, {z0}).matrix - m).cwiseAbs().maxCoeff();

    const SpeechFeatures f = target_features(cfg.seed, pop->ids[0], cfg.frames);
    const VoiceContext voice = pop->context();
    const Eigen::MatrixXd row_space = pop->mixing_map->transpose();
    const Eigen::VectorXd z = pop->embeddings[0].values;
    const Generator g = [&](const Eigen::VectorXd& a) {
      return flatten(synthesize(f, {z + row_space * a}, voice));
    };
    const SpeakerEmbedding origin{Eigen::VectorXd::Zero(kParamDim)};
    const double h = 0.02;
    const Eigen::MatrixXd j1 = jacobian_fd(g, origin, h).matrix;
    const Eigen::MatrixXd j2 = jacobian_fd(g, origin, h / 2).matrix;
    const Eigen::MatrixXd j4 = jacobian_fd(g, origin, h / 4).matrix;
    const Eigen::MatrixXd ref = (4.0 * j4 - j2) / 3.0;
    const double ratio = (j1 - ref).norm() / (j2 - ref).norm();
    report(5, lin_err <= 1e-9 && ratio >= 3.0 && ratio <= 5.0,
           fmt("linear max err %.2e (<= 1e-9), step-halving ratio %.3f (in [3, 5])", lin_err, ratio));
  });

  guarded(6, [&] {
    auto [l50, h50] = build_population(50, cfg.seed);
    const ToyPopulation& p50 = cfg.group == "low-f0" ? l50 : h50;
    DiscoveryOptions opts;
    opts.seed = cfg.seed;
    opts.threads = 0;
    auto dirs = discover(p50, discovery_features(p50, cfg.seed, cfg.frames), opts);
    const auto matches = planted_axis_matches(dirs, *p50.mixing_map);
    double worst = 1.0;
    for (double c : matches) worst = std::min(worst, c);
    const BasisPtr b50 = std::make_shared<const PcaBasis>(fit_pca(p50.embeddings, kDefaultComponents));
    const AlignmentMatrix a = alignment(*b50, dirs);
    const double bound = a.entries.size() ? a.entries.cwiseAbs().maxCoeff() : 0.0;
    report(6, dirs.size() == 5 && worst >= 0.8 && bound <= 1.0,
           fmt("%.0f clusters (== 5), worst planted-axis |cos| %.3f (>= 0.8), max |alignment| %.6f (<= 1)",
               static_cast<double>(dirs.size()), worst, bound));
  });

  guarded(7, [&] {
    ExperimentSpec serial = spec;
    serial.threads = 1;
    ExperimentSpec parallel = spec;
    parallel.threads = 4;
    const std::string a = dump(report_to_json(run_experiment(serial)));
    const std::string b = dump(report_to_json(run_experiment(parallel)));
    const std::string c = dump(report_to_json(noiseless));
    const std::string csv_a = report_to_csv(run_experiment(serial));
    const bool reports = a == b && a == c && csv_a == report_to_csv(noiseless);
    bool hashes = true;
    for (int i = 0; i < 5; ++i) {
      const auto r1 = run_single(spec, basis, spec.target_ids[i], i);
      const auto r2 = run_single(spec, basis, spec.target_ids[i], i);
      hashes &= trajectory_hash(r1.run.session) == trajectory_hash(r2.run.session);
      hashes &= trajectory_hash(r1.run.session) == noiseless.runs[static_cast<std::size_t>(i) * 5 + i].trajectory_hash;
      const SearchSession loaded = session_from_json(parse_json(dump(session_to_json(r1.run.session))));
      SearchSession replay = start_session(loaded.basis, loaded.config, loaded.initial);
      for (const auto& h : loaded.history) replay = submit_choice(replay, h.offset);
      hashes &= trajectory_hash(replay) == trajectory_hash(r1.run.session);
    }
    report(7, reports && hashes,
           std::string("serial/parallel/repeat reports ") + (reports ? "identical" : "differ") +
               ", trajectory hashes " + (hashes ? "identical" : "differ"));
  });

  guarded(8, [&] {
    const fs::path dir = fs::temp_directory_path() / "voiceloop_acceptance";
    fs::remove_all(dir);
    ServiceConfig sc = cfg;
    sc.data_dir = dir.string();
    sc.port = 0;
    VoiceService service(sc);
    httplib::Server server;
    install_routes(server, service);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);

    int bundles = 0, terminals = 0, points = 0;
    bool stale = false, inactive = false, ok = true;
    auto post = [&](const std::string& path, const Json& body) {
      auto res = client.Post(path, body.dump(), "application/json");
      if (!res) throw std::runtime_error("request failed: " + path);
      return std::make_pair(res->status, parse_json(res->body));
    };
    auto [code, body] = post("/sessions", {{"mode", "evaluation"}, {"target_id", pop->ids[7]}});
    ok &= code == 201;
    const std::string id = body.value("session_id", std::string());
    std::string previous;
    while (ok && body.value("status", std::string()) == "awaiting_choice" && body.contains("candidates")) {
      ++bundles;
      ok &= body["candidates"].size() == 5 && body.contains("reference");
      if (bundles == 2) {
        auto [sc2, sb] = post("/sessions/" + id + "/choice", {{"candidate_id", previous}});
        stale = sc2 == 409 && sb.value("code", std::string()) == "StaleCandidate";
      }
      previous = body["candidates"][bundles % 5]["candidate_id"].get<std::string>();
      std::tie(code, body) = post("/sessions/" + id + "/choice", {{"candidate_id", previous}});
      ok &= code == 200;
    }
    if (body.value("status", std::string()) == "exhausted") ++terminals;
    {
      auto [c2, b2] = post("/sessions/" + id + "/choice", {{"candidate_id", previous}});
      inactive = c2 == 409 && b2.value("code", std::string()) == "SessionNotActive";
      auto res = client.Get("/sessions/" + id + "/trajectory");
      if (res && res->status == 200) points = static_cast<int>(parse_json(res->body)["points"].size());
    }
    server.stop();
    th.join();
    fs::remove_all(dir);
    report(8, ok && bundles == 32 && terminals == 1 && points == 33 && stale && inactive,
           fmt("%.0f bundles (== 32), %.0f terminal, %.0f trajectory points (== 33), ", bundles, terminals, points) +
               "stale " + (stale ? "409" : "missing") + ", not-active " + (inactive ? "409" : "missing"));
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
