#include "nftrack/harness.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nftrack/errors.hpp"
#include "nftrack/observation.hpp"

#ifndef NFTRACK_VERSION
#define NFTRACK_VERSION "dev"
#endif

namespace nftrack {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t step, StreamPurpose purpose) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ trial);
  h = splitmix64(h ^ step);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return Rng(h);
}

// ---------------------------------------------------------------------------
// Configuration

ScenarioConfig ScenarioConfig::full_scale() {
  ScenarioConfig c;
  c.array = ArrayConfig::make(275, 75, 28e9);
  c.initial_state = {15.0, -15.0, 3.0 * kPi / 8.0, 10.0, 0.1};
  const MsState& s = c.initial_state;
  c.initial_cov = Vec5(0.05 * 0.05, 0.05 * 0.05, 0.001 * 0.001, s.v * s.v / 100.0,
                       s.omega * s.omega / 100.0)
                      .asDiagonal();
  c.noise = {2.0, 0.1, 0.02};
  c.p_m_dbm = 10.0;
  c.noise_power_dbm = -70.0;
  c.k_steps = 200;
  c.n_trials = 50;
  c.n_rf = 3;
  c.combiner = CombinerSpec{CombinerKind::fd, c.array.n_b, std::nullopt, 5};
  return c;
}

ScenarioConfig ScenarioConfig::desk() {
  ScenarioConfig c = full_scale();
  c.array = ArrayConfig::make(101, 25, 28e9);
  c.k_steps = 50;
  c.n_trials = 20;
  c.combiner.n_rf = c.array.n_b;
  return c;
}

void ScenarioConfig::validate() const {
  try {
    array.validate();
    noise.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (k_steps < 1) throw ConfigError("k_steps must be >= 1");
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (n_rf < 1 || n_rf >= array.n_b) throw ConfigError("n_rf must satisfy 1 <= n_rf < n_b");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (burn_in < 0 || burn_in >= k_steps) throw ConfigError("burn_in must lie in [0, k_steps)");
  if (!std::isfinite(p_m_dbm) || !std::isfinite(noise_power_dbm))
    throw ConfigError("powers must be finite");
  if (!initial_cov.allFinite()) throw ConfigError("initial_cov must be finite");
  Eigen::LLT<Mat5> llt(symmetrized(initial_cov));
  if (llt.info() != Eigen::Success) throw ConfigError("initial_cov must be positive definite");
  combiner.validate(array.n_b);
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string pilot_policy_name(PilotPolicy p) {
  return p == PilotPolicy::per_trial ? "per_trial" : "per_step";
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
  ScenarioConfig c = ScenarioConfig::full_scale();
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"array", "initial_state", "initial_cov", "initial_cov_diag", "noise", "p_m_dbm",
                    "noise_power_dbm", "k_steps", "n_trials", "n_rf", "combiner", "mo_iters", "seed",
                    "pilot_policy", "wrap_psi", "burn_in", "threads"},
                   "config");
    if (j.contains("array")) {
      const json& a = j.at("array");
      reject_unknown(a, {"n_b", "n_m", "carrier_freq_hz", "d_b_m", "d_m_m"}, "array");
      int n_b = c.array.n_b, n_m = c.array.n_m;
      double f = c.array.carrier_freq;
      read(a, "n_b", n_b);
      read(a, "n_m", n_m);
      read(a, "carrier_freq_hz", f);
      std::optional<double> d_b, d_m;
      if (a.contains("d_b_m")) d_b = a.at("d_b_m").get<double>();
      if (a.contains("d_m_m")) d_m = a.at("d_m_m").get<double>();
      c.array = ArrayConfig::make(n_b, n_m, f, d_b, d_m);
    }
    bool state_given = false;
    if (j.contains("initial_state")) {
      const json& s = j.at("initial_state");
      reject_unknown(s, {"x_m", "y_m", "psi_rad", "v_mps", "omega_radps"}, "initial_state");
      read(s, "x_m", c.initial_state.x);
      read(s, "y_m", c.initial_state.y);
      read(s, "psi_rad", c.initial_state.psi);
      read(s, "v_mps", c.initial_state.v);
      read(s, "omega_radps", c.initial_state.omega);
      state_given = true;
    }
    if (j.contains("initial_cov") && j.contains("initial_cov_diag"))
      throw ConfigError("give either initial_cov or initial_cov_diag");
    if (j.contains("initial_cov")) {
      const auto rows = j.at("initial_cov").get<std::vector<std::vector<double>>>();
      if (rows.size() != 5) throw ConfigError("initial_cov must be 5x5");
      for (int r = 0; r < 5; ++r) {
        if (rows[r].size() != 5) throw ConfigError("initial_cov must be 5x5");
        for (int col = 0; col < 5; ++col) c.initial_cov(r, col) = rows[r][col];
      }
    } else if (j.contains("initial_cov_diag")) {
      const auto d = j.at("initial_cov_diag").get<std::vector<double>>();
      if (d.size() != 5) throw ConfigError("initial_cov_diag must have 5 entries");
      c.initial_cov = Vec5(d[0], d[1], d[2], d[3], d[4]).asDiagonal();
    } else if (state_given) {
      const MsState& s = c.initial_state;
      c.initial_cov = Vec5(0.05 * 0.05, 0.05 * 0.05, 0.001 * 0.001, s.v * s.v / 100.0,
                           s.omega * s.omega / 100.0)
                          .asDiagonal();
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      reject_unknown(n, {"sigma_v_mps2", "sigma_omega_radps2", "tau_s"}, "noise");
      read(n, "sigma_v_mps2", c.noise.sigma_v);
      read(n, "sigma_omega_radps2", c.noise.sigma_omega);
      read(n, "tau_s", c.noise.tau);
    }
    read(j, "p_m_dbm", c.p_m_dbm);
    read(j, "noise_power_dbm", c.noise_power_dbm);
    read(j, "k_steps", c.k_steps);
    read(j, "n_trials", c.n_trials);
    read(j, "n_rf", c.n_rf);
    read(j, "seed", c.seed);
    read(j, "wrap_psi", c.wrap_psi);
    read(j, "burn_in", c.burn_in);
    read(j, "threads", c.threads);
    if (j.contains("pilot_policy")) {
      const auto p = j.at("pilot_policy").get<std::string>();
      if (p == "per_trial") c.pilot_policy = PilotPolicy::per_trial;
      else if (p == "per_step") c.pilot_policy = PilotPolicy::per_step;
      else throw ConfigError("pilot_policy must be per_trial or per_step");
    }
    std::string scheme = c.combiner.name();
    read(j, "combiner", scheme);
    c.combiner = CombinerSpec::parse(scheme, c.n_rf, c.array.n_b);
    read(j, "mo_iters", c.combiner.mo_iters);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

namespace {

json scenario_json(const ScenarioConfig& c) {
  json cov = json::array();
  for (int r = 0; r < 5; ++r) {
    json row = json::array();
    for (int col = 0; col < 5; ++col) row.push_back(c.initial_cov(r, col));
    cov.push_back(row);
  }
  return json{
      {"array",
       {{"n_b", c.array.n_b},
        {"n_m", c.array.n_m},
        {"carrier_freq_hz", c.array.carrier_freq},
        {"d_b_m", c.array.d_b},
        {"d_m_m", c.array.d_m}}},
      {"initial_state",
       {{"x_m", c.initial_state.x},
        {"y_m", c.initial_state.y},
        {"psi_rad", c.initial_state.psi},
        {"v_mps", c.initial_state.v},
        {"omega_radps", c.initial_state.omega}}},
      {"initial_cov", cov},
      {"noise",
       {{"sigma_v_mps2", c.noise.sigma_v},
        {"sigma_omega_radps2", c.noise.sigma_omega},
        {"tau_s", c.noise.tau}}},
      {"p_m_dbm", c.p_m_dbm},
      {"noise_power_dbm", c.noise_power_dbm},
      {"k_steps", c.k_steps},
      {"n_trials", c.n_trials},
      {"n_rf", c.n_rf},
      {"combiner", c.combiner.name()},
      {"mo_iters", c.combiner.mo_iters},
      {"seed", c.seed},
      {"pilot_policy", pilot_policy_name(c.pilot_policy)},
      {"wrap_psi", c.wrap_psi},
      {"burn_in", c.burn_in},
      {"threads", c.threads},
  };
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& cfg) { return scenario_json(cfg).dump(2); }

std::uint64_t config_hash(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.threads = 1;  // parallelism does not change results
  const std::string text = scenario_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Trials

namespace {

Pilot trial_pilot(const ScenarioConfig& cfg, int trial, int k) {
  const int step = cfg.pilot_policy == PilotPolicy::per_trial ? 0 : k;
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(step),
                        StreamPurpose::pilot);
  return generate_pilot(rng, cfg.p_m_watts(), cfg.array.n_m);
}

Combiner trial_random_combiner(const ScenarioConfig& cfg, int trial, int n_rf) {
  Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(trial), 0, StreamPurpose::combiner);
  return combiner_random(rng, n_rf, cfg.array.n_b);
}

class CombinerBuilder {
 public:
  CombinerBuilder(const ScenarioConfig& cfg, int trial) : cfg_(cfg), spec_(cfg.combiner) {
    const bool needs_rand = spec_.kind == CombinerKind::random ||
                            (spec_.kind == CombinerKind::mo && spec_.mo_init == CombinerKind::random);
    if (needs_rand) random_ = trial_random_combiner(cfg, trial, spec_.n_rf);
  }

  Combiner build(const Belief& prior, const Linearization& lin, StepFlags& flags) {
    Combiner q = build_kind(spec_.kind == CombinerKind::mo ? spec_.mo_init.value_or(CombinerKind::random)
                                                          : spec_.kind,
                            prior, lin, flags);
    if (spec_.kind == CombinerKind::mo) {
      MoResult mo = combiner_mo_detailed(q, prior, lin.jacobian, cfg_.noise_watts(), spec_.mo_iters);
      flags.mo_stalled = mo.stalled;
      q = std::move(mo.combiner);
    }
    previous_ = q;
    return q;
  }

 private:
  Combiner build_kind(CombinerKind kind, const Belief& prior, const Linearization& lin,
                      StepFlags& flags) {
    switch (kind) {
      case CombinerKind::fd: return combiner_fd(cfg_.array);
      case CombinerKind::random: return *random_;
      case CombinerKind::svd_pe: return svd_pe(lin, flags);
      case CombinerKind::qom:
        try {
          return combiner_qom(prior.mean.pose(), cfg_.array, spec_.n_rf);
        } catch (const DegenerateGeometry&) {
        } catch (const RankDeficientCombiner&) {
        }
        flags.fallback = true;
        if (previous_) return *previous_;
        return svd_pe(lin, flags);
      case CombinerKind::mo: break;
    }
    throw InvalidArgument("mo cannot initialize itself");
  }

  Combiner svd_pe(const Linearization& lin, StepFlags& flags) {
    try {
      Combiner q = combiner_svd_pe(lin.jacobian, spec_.n_rf);
      flags.idle_chains = q.rows() < spec_.n_rf;
      return q;
    } catch (const DegenerateJacobian&) {
    } catch (const RankDeficientCombiner&) {
    }
    flags.fallback = true;
    if (previous_) return *previous_;
    throw SingularMatrix("no usable combiner at the first step");
  }

  const ScenarioConfig& cfg_;
  CombinerSpec spec_;
  std::optional<Combiner> random_;
  std::optional<Combiner> previous_;
};

}  // namespace

TrialRecord run_trial(const ScenarioConfig& cfg, int trial_index) {
  if (trial_index < 0) throw InvalidArgument("trial index must be >= 0");
  const double sigma2 = cfg.noise_watts();
  const auto trial = static_cast<std::uint64_t>(trial_index);

  TrialRecord rec;
  rec.trial = trial_index;
  rec.scheme = cfg.combiner.name();
  rec.steps.reserve(static_cast<size_t>(cfg.k_steps));

  CombinerBuilder builder(cfg, trial_index);
  Pilot pilot = trial_pilot(cfg, trial_index, 1);
  MsState truth = cfg.initial_state;
  Belief post{cfg.initial_state, symmetrized(cfg.initial_cov)};

  for (int k = 1; k <= cfg.k_steps; ++k) {
    StepRecord step;
    step.k = k;
    Rng process = make_stream(cfg.seed, trial, static_cast<std::uint64_t>(k), StreamPurpose::process);
    truth = MsState::from_vec(ctrv_transition(truth, cfg.noise.tau).vec() +
                              sample_process_noise(cfg.noise, process));
    step.truth = truth;
    if (cfg.pilot_policy == PilotPolicy::per_step && k > 1) pilot = trial_pilot(cfg, trial_index, k);
    step.pilot_norm = pilot.symbols.norm();

    try {
      const Belief prior = ekf_predict(post, cfg.noise);
      step.prior = prior;
      const Linearization lin = linearize(prior.mean.pose(), cfg.array, pilot);
      const Combiner q = builder.build(prior, lin, step.flags);
      step.combiner_rows = q.rows();

      Rng obs_rng = make_stream(cfg.seed, trial, static_cast<std::uint64_t>(k), StreamPurpose::obs);
      const CVector noise = sample_array_noise(obs_rng, cfg.array.n_b, sigma2);
      const Observation z = observe_with_noise(channel_matrix(truth.pose(), cfg.array), pilot, q, noise);
      post = ekf_update(prior, z, q, lin, sigma2);
      if (!post.mean.vec().allFinite() || !post.cov.allFinite())
        throw SingularMatrix("non-finite posterior");
    } catch (const SingularMatrix& e) {
      rec.diverged = true;
      rec.diverged_at = k;
      rec.divergence_reason = e.what();
      break;
    }
    step.posterior = post;
    rec.steps.push_back(step);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::vector<const TrialRecord*> usable(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw InvalidArgument("metrics need at least one record");
  std::vector<const TrialRecord*> out;
  for (const auto& r : records)
    if (!r.diverged) out.push_back(&r);
  return out;
}

size_t step_count(const std::vector<TrialRecord>& records,
                  const std::vector<const TrialRecord*>& good) {
  if (!good.empty()) return good.front()->steps.size();
  size_t n = 0;
  for (const auto& r : records) n = std::max(n, r.steps.size() + (r.diverged ? 1 : 0));
  return n;
}

double error_of(const StepRecord& s, MetricParam p, bool wrap_psi) {
  switch (p) {
    case MetricParam::x: return s.posterior.mean.x - s.truth.x;
    case MetricParam::y: return s.posterior.mean.y - s.truth.y;
    case MetricParam::psi: {
      const double d = s.posterior.mean.psi - s.truth.psi;
      return wrap_psi ? wrap_angle(d) : d;
    }
  }
  return 0.0;
}

}  // namespace

std::vector<double> metrics_rmse(const std::vector<TrialRecord>& records, MetricParam param,
                                 bool wrap_psi) {
  const auto good = usable(records);
  const size_t n = step_count(records, good);
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  if (good.empty()) return out;
  for (size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (const TrialRecord* r : good) {
      const double e = error_of(r->steps.at(k), param, wrap_psi);
      acc += e * e;
    }
    out[k] = std::sqrt(acc / static_cast<double>(good.size()));
  }
  return out;
}

std::vector<double> metrics_rmse_position(const std::vector<TrialRecord>& records) {
  const auto x = metrics_rmse(records, MetricParam::x);
  const auto y = metrics_rmse(records, MetricParam::y);
  std::vector<double> out(x.size());
  for (size_t k = 0; k < x.size(); ++k) out[k] = std::sqrt(x[k] * x[k] + y[k] * y[k]);
  return out;
}

std::vector<double> metrics_nmse(const std::vector<TrialRecord>& records, const ScenarioConfig& cfg) {
  const auto good = usable(records);
  const size_t n = step_count(records, good);
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  if (good.empty()) return out;
  for (size_t k = 0; k < n; ++k) {
    double num = 0.0, den = 0.0;
    for (const TrialRecord* r : good) {
      const StepRecord& s = r->steps.at(k);
      const ChannelMatrix h = channel_matrix(s.truth.pose(), cfg.array);
      const ChannelMatrix h_hat = channel_matrix(s.posterior.mean.pose(), cfg.array);
      num += (h_hat - h).squaredNorm();
      den += h.squaredNorm();
    }
    out[k] = num / den;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaigns

const SchemeResult& CampaignResult::at(const std::string& scheme) const {
  for (const auto& s : schemes)
    if (s.scheme == scheme) return s;
  throw InvalidArgument("no scheme '" + scheme + "' in campaign");
}

namespace {

template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double time_average(const std::vector<double>& v, int burn_in) {
  double acc = 0.0;
  int n = 0;
  for (size_t k = static_cast<size_t>(burn_in); k < v.size(); ++k, ++n) acc += v[k];
  return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

CampaignResult run_campaign(const ScenarioConfig& cfg, const std::vector<CombinerSpec>& schemes,
                            bool keep_records) {
  if (schemes.empty()) throw InvalidArgument("campaign needs at least one scheme");
  cfg.validate();
  CampaignResult result;
  for (const CombinerSpec& spec : schemes) {
    ScenarioConfig c = cfg;
    c.combiner = spec;
    c.combiner.validate(c.array.n_b);

    std::vector<TrialRecord> records(static_cast<size_t>(c.n_trials));
    parallel_for(c.n_trials, c.threads, [&](int t) { records[static_cast<size_t>(t)] = run_trial(c, t); });

    SchemeResult s;
    s.scheme = spec.name();
    s.n_trials = c.n_trials;
    for (const auto& r : records) {
      s.n_diverged += r.diverged ? 1 : 0;
      for (const auto& st : r.steps)
        s.n_flagged_steps += (st.flags.fallback || st.flags.mo_stalled) ? 1 : 0;
    }
    s.rmse_x = metrics_rmse(records, MetricParam::x, c.wrap_psi);
    s.rmse_y = metrics_rmse(records, MetricParam::y, c.wrap_psi);
    s.rmse_psi = metrics_rmse(records, MetricParam::psi, c.wrap_psi);
    s.rmse_pos.resize(s.rmse_x.size());
    for (size_t k = 0; k < s.rmse_x.size(); ++k)
      s.rmse_pos[k] = std::sqrt(s.rmse_x[k] * s.rmse_x[k] + s.rmse_y[k] * s.rmse_y[k]);

    // NMSE is a ratio of sums, so accumulate per trial in parallel and reduce in order.
    std::vector<std::vector<double>> num(records.size()), den(records.size());
    parallel_for(c.n_trials, c.threads, [&](int t) {
      const TrialRecord& r = records[static_cast<size_t>(t)];
      if (r.diverged) return;
      for (const auto& st : r.steps) {
        const ChannelMatrix h = channel_matrix(st.truth.pose(), c.array);
        num[static_cast<size_t>(t)].push_back(
            (channel_matrix(st.posterior.mean.pose(), c.array) - h).squaredNorm());
        den[static_cast<size_t>(t)].push_back(h.squaredNorm());
      }
    });
    s.nmse.assign(s.rmse_x.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t k = 0; k < s.nmse.size(); ++k) {
      double a = 0.0, b = 0.0;
      for (size_t t = 0; t < records.size(); ++t) {
        if (records[t].diverged) continue;
        a += num[t][k];
        b += den[t][k];
      }
      if (b > 0.0) s.nmse[k] = a / b;
    }

    s.avg_rmse_pos = time_average(s.rmse_pos, c.burn_in);
    s.avg_rmse_psi = time_average(s.rmse_psi, c.burn_in);
    s.avg_nmse = time_average(s.nmse, c.burn_in);
    for (const auto& r : records) {
      if (r.diverged) {
        s.trial_avg_rmse_pos.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      std::vector<double> err;
      for (const auto& st : r.steps)
        err.push_back(std::hypot(st.posterior.mean.x - st.truth.x, st.posterior.mean.y - st.truth.y));
      s.trial_avg_rmse_pos.push_back(time_average(err, c.burn_in));
    }
    if (keep_records) s.records = std::move(records);
    result.schemes.push_back(std::move(s));
  }
  return result;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_campaign_csv(std::ostream& os, const CampaignResult& result) {
  os << "scheme,k,rmse_x_m,rmse_y_m,rmse_psi_rad,nmse_h\n";
  for (const auto& s : result.schemes) {
    for (size_t k = 0; k < s.rmse_x.size(); ++k) {
      os << s.scheme << ',' << (k + 1) << ',' << format_double(s.rmse_x[k]) << ','
         << format_double(s.rmse_y[k]) << ',' << format_double(s.rmse_psi[k]) << ','
         << format_double(s.nmse[k]) << '\n';
    }
  }
}

std::string campaign_csv(const CampaignResult& result) {
  std::ostringstream os;
  write_campaign_csv(os, result);
  return os.str();
}

std::string campaign_manifest(const ScenarioConfig& cfg, const CampaignResult& result) {
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  json schemes = json::array();
  for (const auto& s : result.schemes) {
    schemes.push_back({{"scheme", s.scheme},
                       {"avg_rmse_pos_m", s.avg_rmse_pos},
                       {"avg_rmse_psi_rad", s.avg_rmse_psi},
                       {"avg_nmse_h", s.avg_nmse},
                       {"n_trials", s.n_trials},
                       {"n_diverged", s.n_diverged},
                       {"n_flagged_steps", s.n_flagged_steps}});
  }
  json m{{"config_hash", hash},
         {"seed", cfg.seed},
         {"code_version", NFTRACK_VERSION},
         {"config", scenario_json(cfg)},
         {"schemes", schemes}};
  return m.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Information sweeps

AvgFisher scheme_avg_fisher(const ScenarioConfig& cfg, const Pose& pose, const CombinerSpec& spec) {
  const ChannelDerivatives d = channel_derivatives(pose, cfg.array);
  Combiner q = Combiner::identity(cfg.array.n_b);
  const CombinerKind base = spec.kind == CombinerKind::mo ? spec.mo_init.value_or(CombinerKind::random)
                                                          : spec.kind;
  const Pilot pilot = trial_pilot(cfg, 0, 1);
  const ObservationJacobian b = observation_jacobian(pose, cfg.array, pilot);
  switch (base) {
    case CombinerKind::fd: break;
    case CombinerKind::random: q = trial_random_combiner(cfg, 0, spec.n_rf); break;
    case CombinerKind::svd_pe: q = combiner_svd_pe(b, spec.n_rf); break;
    case CombinerKind::qom: q = combiner_qom(pose, cfg.array, spec.n_rf); break;
    case CombinerKind::mo: throw InvalidArgument("mo cannot initialize itself");
  }
  if (spec.kind == CombinerKind::mo) {
    const Belief prior{MsState{pose.x, pose.y, pose.psi, cfg.initial_state.v, cfg.initial_state.omega},
                       cfg.initial_cov};
    q = combiner_mo(q, prior, b, cfg.noise_watts(), spec.mo_iters);
  }
  return avg_fisher(d, q, cfg.p_m_watts(), cfg.noise_watts(), cfg.array.n_m);
}

namespace {

FisherRow fisher_row(const ScenarioConfig& c, const std::string& axis, double value, const Pose& pose,
                     const CombinerSpec& spec) {
  FisherRow row;
  row.axis = axis;
  row.value = value;
  row.scheme = spec.name();
  row.pose = pose;
  row.n_b = c.array.n_b;
  row.n_m = c.array.n_m;
  row.n_rf = spec.n_rf;
  row.info = scheme_avg_fisher(c, pose, spec);
  try {
    row.bounds = fisher_scaling_bounds(pose, c.array, c.p_m_watts(), c.noise_watts());
  } catch (const AssumptionViolated&) {
  }
  return row;
}

}  // namespace

std::vector<FisherRow> fisher_sweep(const ScenarioConfig& cfg, const std::string& axis,
                                    const std::vector<double>& values, const Pose& pose,
                                    const std::vector<CombinerSpec>& schemes) {
  std::vector<FisherRow> rows;
  for (double v : values) {
    ScenarioConfig c = cfg;
    const int iv = static_cast<int>(std::llround(v));
    if (axis == "nb") c.array = ArrayConfig::make(iv, c.array.n_m, c.array.carrier_freq, c.array.d_b, c.array.d_m);
    else if (axis == "nm") c.array = ArrayConfig::make(c.array.n_b, iv, c.array.carrier_freq, c.array.d_b, c.array.d_m);
    else if (axis != "nrf") throw ConfigError("sweep axis must be nb, nm or nrf");
    for (CombinerSpec spec : schemes) {
      if (spec.kind == CombinerKind::fd) spec.n_rf = c.array.n_b;
      else if (axis == "nrf") spec.n_rf = iv;
      spec.validate(c.array.n_b);
      rows.push_back(fisher_row(c, axis, v, pose, spec));
    }
  }
  return rows;
}

std::vector<FisherRow> fisher_pose_grid(const ScenarioConfig& cfg, const std::vector<Pose>& poses,
                                        const std::vector<CombinerSpec>& schemes) {
  std::vector<FisherRow> rows;
  for (size_t i = 0; i < poses.size(); ++i)
    for (const auto& spec : schemes) rows.push_back(fisher_row(cfg, "pose", static_cast<double>(i), poses[i], spec));
  return rows;
}

void write_fisher_csv(std::ostream& os, const std::vector<FisherRow>& rows) {
  os << "axis,value,scheme,x_m,y_m,psi_rad,n_b,n_m,n_rf,f_x_per_m2,f_y_per_m2,f_psi_per_rad2,"
        "bound_position_per_m2,bound_orientation_per_rad2\n";
  for (const auto& r : rows) {
    os << r.axis << ',' << format_double(r.value) << ',' << r.scheme << ',' << format_double(r.pose.x)
       << ',' << format_double(r.pose.y) << ',' << format_double(r.pose.psi) << ',' << r.n_b << ','
       << r.n_m << ',' << r.n_rf << ',' << format_double(r.info.f_x) << ','
       << format_double(r.info.f_y) << ',' << format_double(r.info.f_psi) << ','
       << (r.bounds ? format_double(r.bounds->position) : std::string()) << ','
       << (r.bounds ? format_double(r.bounds->orientation) : std::string()) << '\n';
  }
}

std::vector<CrbRow> run_crb(const ScenarioConfig& cfg, CombinerKind policy, int samples) {
  cfg.validate();
  CombinerPolicy pol;
  pol.kind = policy;
  pol.n_rf = cfg.n_rf;
  pol.pilot = trial_pilot(cfg, 0, 1);
  if (policy == CombinerKind::random) pol.fixed = trial_random_combiner(cfg, 0, cfg.n_rf);

  BayesianFimState state = bayesian_fim_init(cfg.initial_cov);
  MsState nominal = cfg.initial_state;
  std::vector<CrbRow> rows;
  for (int k = 1; k <= cfg.k_steps; ++k) {
    Rng rng = make_stream(cfg.seed, std::numeric_limits<std::uint64_t>::max(),
                          static_cast<std::uint64_t>(k), StreamPurpose::process);
    state = bayesian_fim_step(state, nominal, cfg.array, cfg.noise, cfg.p_m_watts(), cfg.noise_watts(),
                              pol, samples, rng);
    nominal = ctrv_transition(nominal, cfg.noise.tau);
    const Mat5 v = bcrb(state);
    rows.push_back({k, v(0, 0), v(1, 1), v(2, 2), v(0, 0) + v(1, 1)});
  }
  return rows;
}

void write_crb_csv(std::ostream& os, const std::vector<CrbRow>& rows) {
  os << "k,bcrb_x_m2,bcrb_y_m2,bcrb_psi_rad2,bcrb_position_m2\n";
  for (const auto& r : rows) {
    os << r.k << ',' << format_double(r.bcrb_x) << ',' << format_double(r.bcrb_y) << ','
       << format_double(r.bcrb_psi) << ',' << format_double(r.position_trace) << '\n';
  }
}

}  // namespace nftrack
