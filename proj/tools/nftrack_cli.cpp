// nftrack: tracking campaigns, Fisher sweeps and Bayesian CRB from a scenario file.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nftrack/errors.hpp"
#include "nftrack/harness.hpp"

namespace {

using namespace nftrack;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials, steps, nrf, threads;
  std::optional<double> pm_dbm;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Scenario JSON (defaults to the built-in full-scale scenario)");
  app->add_option("--out", c.out, "Output CSV (stdout when omitted)");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--trials", c.trials, "Monte Carlo trials");
  app->add_option("--steps", c.steps, "Time steps K");
  app->add_option("--nrf", c.nrf, "RF chains");
  app->add_option("--pm-dbm", c.pm_dbm, "Pilot power in dBm");
  app->add_option("--threads", c.threads, "Worker threads");
}

ScenarioConfig resolve(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig::full_scale() : load_scenario(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.n_trials = *c.trials;
  if (c.steps) cfg.k_steps = *c.steps;
  if (c.nrf) cfg.n_rf = *c.nrf;
  if (c.pm_dbm) cfg.p_m_dbm = *c.pm_dbm;
  if (c.threads) cfg.threads = *c.threads;
  if (cfg.combiner.kind != CombinerKind::fd) cfg.combiner.n_rf = cfg.n_rf;
  cfg.validate();
  return cfg;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<CombinerSpec> parse_schemes(const std::string& list, const ScenarioConfig& cfg, int mo_iters) {
  std::vector<CombinerSpec> out;
  for (const auto& name : split(list, ',')) {
    CombinerSpec s = CombinerSpec::parse(name, cfg.n_rf, cfg.array.n_b);
    s.mo_iters = mo_iters;
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no schemes given");
  return out;
}

template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  write(os);
}

// "nb:68:275:4" -> {68, 137, 206, 275}
std::pair<std::string, std::vector<double>> parse_sweep(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 4) throw ConfigError("sweep must look like axis:start:stop:count");
  const double lo = std::stod(parts[1]), hi = std::stod(parts[2]);
  const int n = std::stoi(parts[3]);
  if (n < 1) throw ConfigError("sweep count must be >= 1");
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? lo : std::floor(lo + (hi - lo) * i / (n - 1) + 1e-9));
  return {parts[0], v};
}

std::vector<Pose> read_pose_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pose grid '" + path + "'");
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw ConfigError("pose grid lines need x_m,y_m,psi_rad");
    poses.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
  }
  return poses;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field pose tracking simulator"};
  app.require_subcommand(1);

  Common track_opts, fisher_opts, crb_opts;
  std::string schemes = "fd,rand,svd_pe,qom";
  std::string manifest;
  int mo_iters = 5;
  auto* track = app.add_subcommand("track", "Tracking campaign over combiner schemes");
  add_common(track, track_opts);
  track->add_option("--schemes", schemes, "Comma list: fd,rand,svd_pe,qom,mo:rand,mo:svd_pe,mo:qom");
  track->add_option("--manifest", manifest, "Manifest sidecar path (default <out>.manifest.json)");
  track->add_option("--mo-iters", mo_iters, "Manifold iterations per step");

  std::string sweep, pose_grid, fisher_schemes = "fd";
  std::vector<double> pose_xyz;
  auto* fisher = app.add_subcommand("fisher", "Average Fisher information sweeps");
  add_common(fisher, fisher_opts);
  auto* sweep_opt = fisher->add_option("--sweep", sweep, "nb:start:stop:n | nm:start:stop:n | nrf:start:stop:n");
  auto* grid_opt = fisher->add_option("--pose-grid", pose_grid, "CSV of x_m,y_m,psi_rad rows");
  sweep_opt->excludes(grid_opt);
  fisher->add_option("--schemes", fisher_schemes, "Comma list of combiners");
  fisher->add_option("--pose", pose_xyz, "x_m y_m psi_rad (default: initial state)")->expected(3);

  std::string policy = "fd";
  int samples = 100;
  auto* crb = app.add_subcommand("crb", "Bayesian CRB along the nominal trajectory");
  add_common(crb, crb_opts);
  crb->add_option("--policy", policy, "fd|rand|svd_pe|qom");
  crb->add_option("--samples", samples, "Monte Carlo draws per step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*track) {
      const ScenarioConfig cfg = resolve(track_opts);
      const CampaignResult res = run_campaign(cfg, parse_schemes(schemes, cfg, mo_iters));
      emit(track_opts.out, [&](std::ostream& os) { write_campaign_csv(os, res); });
      const std::string mpath = !manifest.empty() ? manifest
                                : track_opts.out.empty() ? std::string()
                                                         : track_opts.out + ".manifest.json";
      if (!mpath.empty()) emit(mpath, [&](std::ostream& os) { os << campaign_manifest(cfg, res); });
      for (const auto& s : res.schemes) {
        std::cerr << s.scheme << ": avg position RMSE " << s.avg_rmse_pos << " m, heading "
                  << s.avg_rmse_psi << " rad, NMSE " << s.avg_nmse << ", diverged " << s.n_diverged
                  << "/" << s.n_trials << "\n";
      }
    } else if (*fisher) {
      const ScenarioConfig cfg = resolve(fisher_opts);
      const auto specs = parse_schemes(fisher_schemes, cfg, mo_iters);
      const Pose pose = pose_xyz.size() == 3 ? Pose{pose_xyz[0], pose_xyz[1], pose_xyz[2]}
                                             : cfg.initial_state.pose();
      std::vector<FisherRow> rows;
      if (!pose_grid.empty()) {
        rows = fisher_pose_grid(cfg, read_pose_grid(pose_grid), specs);
      } else if (!sweep.empty()) {
        const auto [axis, values] = parse_sweep(sweep);
        rows = fisher_sweep(cfg, axis, values, pose, specs);
      } else {
        rows = fisher_pose_grid(cfg, {pose}, specs);
      }
      emit(fisher_opts.out, [&](std::ostream& os) { write_fisher_csv(os, rows); });
    } else if (*crb) {
      const ScenarioConfig cfg = resolve(crb_opts);
      const auto rows = run_crb(cfg, parse_combiner_kind(policy), samples);
      emit(crb_opts.out, [&](std::ostream& os) { write_crb_csv(os, rows); });
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
