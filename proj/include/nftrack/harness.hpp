#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nftrack/combiners.hpp"
#include "nftrack/dynamics.hpp"
#include "nftrack/estimation.hpp"
#include "nftrack/geometry.hpp"
#include "nftrack/information.hpp"

namespace nftrack {

enum class PilotPolicy { per_trial, per_step };
enum class StreamPurpose : std::uint64_t { process = 1, obs = 2, pilot = 3, combiner = 4 };

/// Independent generator for (seed, trial, step, purpose).
Rng make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t step, StreamPurpose purpose);

struct ScenarioConfig {
  ArrayConfig array;
  MsState initial_state;
  Mat5 initial_cov = Mat5::Identity();
  ProcessNoiseSpec noise;
  double p_m_dbm = 10.0;
  double noise_power_dbm = -70.0;
  int k_steps = 200;
  int n_trials = 50;
  int n_rf = 3;
  CombinerSpec combiner;
  std::uint64_t seed = 1;
  PilotPolicy pilot_policy = PilotPolicy::per_trial;
  bool wrap_psi = true;
  int burn_in = 0;
  int threads = 1;

  /// f = 28 GHz, n_b = 275, n_m = 75, K = 200, 50 trials.
  static ScenarioConfig full_scale();
  /// Full-scale scenario at n_b = 101, n_m = 25, K = 50, 20 trials.
  static ScenarioConfig desk();

  double p_m_watts() const { return dbm_to_watts(p_m_dbm); }
  double noise_watts() const { return dbm_to_watts(noise_power_dbm); }
  /// Throws ConfigError.
  void validate() const;
};

/// JSON round trip. Missing keys keep the full-scale defaults; unknown keys are
/// rejected. Throws ConfigError.
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

struct StepFlags {
  bool fallback = false;     // combiner reused or replaced after a degenerate geometry/Jacobian
  bool mo_stalled = false;   // no MO step accepted
  bool idle_chains = false;  // SVD-PE used fewer rows than n_rf
};

struct StepRecord {
  int k = 0;
  MsState truth;
  Belief prior;
  Belief posterior;
  StepFlags flags;
  double pilot_norm = 0.0;
  int combiner_rows = 0;
};

struct TrialRecord {
  int trial = 0;
  std::string scheme;
  std::vector<StepRecord> steps;
  bool diverged = false;
  int diverged_at = 0;
  std::string divergence_reason;
};

TrialRecord run_trial(const ScenarioConfig& cfg, int trial_index);

enum class MetricParam { x, y, psi };

/// Per-step RMSE over the non-diverged records.
std::vector<double> metrics_rmse(const std::vector<TrialRecord>& records, MetricParam param,
                                 bool wrap_psi = true);
/// sqrt(mean(dx^2 + dy^2)) per step.
std::vector<double> metrics_rmse_position(const std::vector<TrialRecord>& records);
/// mean ||H(p_hat) - H(p)||_F^2 / mean ||H(p)||_F^2 per step, channels rebuilt from poses.
std::vector<double> metrics_nmse(const std::vector<TrialRecord>& records, const ScenarioConfig& cfg);

struct SchemeResult {
  std::string scheme;
  std::vector<double> rmse_x, rmse_y, rmse_psi, rmse_pos, nmse;
  double avg_rmse_pos = 0.0;
  double avg_rmse_psi = 0.0;
  double avg_nmse = 0.0;
  int n_trials = 0;
  int n_diverged = 0;
  int n_flagged_steps = 0;
  /// Time-averaged position RMSE of each trial (NaN for diverged trials).
  std::vector<double> trial_avg_rmse_pos;
  std::vector<TrialRecord> records;  // kept only when requested
};

struct CampaignResult {
  std::vector<SchemeResult> schemes;
  const SchemeResult& at(const std::string& scheme) const;
};

CampaignResult run_campaign(const ScenarioConfig& cfg, const std::vector<CombinerSpec>& schemes,
                            bool keep_records = false);

/// Columns scheme,k,rmse_x_m,rmse_y_m,rmse_psi_rad,nmse_h.
void write_campaign_csv(std::ostream& os, const CampaignResult& result);
std::string campaign_csv(const CampaignResult& result);
/// JSON sidecar with config hash, seed, code version and time-averaged metrics.
std::string campaign_manifest(const ScenarioConfig& cfg, const CampaignResult& result);

std::uint64_t config_hash(const ScenarioConfig& cfg);

/// Channel-information rows for sweeps over array sizes or poses.
struct FisherRow {
  std::string axis;
  double value = 0.0;
  std::string scheme;
  Pose pose;
  int n_b = 0;
  int n_m = 0;
  int n_rf = 0;
  AvgFisher info;
  std::optional<FisherBounds> bounds;
};

/// Builds the information of one scheme at a pose. Pilot and random combiner
/// come from the trial-0 streams of cfg.seed.
AvgFisher scheme_avg_fisher(const ScenarioConfig& cfg, const Pose& pose, const CombinerSpec& spec);

std::vector<FisherRow> fisher_sweep(const ScenarioConfig& cfg, const std::string& axis,
                                    const std::vector<double>& values, const Pose& pose,
                                    const std::vector<CombinerSpec>& schemes);
std::vector<FisherRow> fisher_pose_grid(const ScenarioConfig& cfg, const std::vector<Pose>& poses,
                                        const std::vector<CombinerSpec>& schemes);
void write_fisher_csv(std::ostream& os, const std::vector<FisherRow>& rows);

struct CrbRow {
  int k = 0;
  double bcrb_x = 0.0;
  double bcrb_y = 0.0;
  double bcrb_psi = 0.0;
  double position_trace = 0.0;
};

/// Bayesian CRB along the noise-free nominal trajectory from the initial state.
std::vector<CrbRow> run_crb(const ScenarioConfig& cfg, CombinerKind policy, int samples);
void write_crb_csv(std::ostream& os, const std::vector<CrbRow>& rows);

/// Formats a double so that it round-trips exactly.
std::string format_double(double v);

}  // namespace nftrack
