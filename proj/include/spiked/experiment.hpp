#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/ensembles.hpp"
#include "spiked/spectra.hpp"

namespace spiked {

inline constexpr const char* kSchemaVersion = "v1";
inline constexpr const char* kLibraryVersion = "spiked-lab 1.0.0";

// Tests and their statistics:
//   eig    - lambda_1 (order-2 symmetric models); rejects iff lambda_1 >= 2 + delta
//   trace  - trace(X) (order-2 models)
//   lr     - log of the Monte Carlo likelihood ratio for the H1 spike prior
//            (H1 must be sym_spiked or asym_spiked); default threshold 0
//   opnorm - power-iteration lower bound on the operator norm
// Scalar tests other than eig reject iff statistic >= threshold. Without an
// explicit threshold, trace and opnorm calibrate one from the H0 trials as
// their empirical (1 - alpha) quantile (alpha defaults to 0.05).
struct TestSpec {
  std::string name = "eig";
  double delta = 0.15;
  std::optional<double> threshold;
  std::optional<double> alpha;
  int samples = 1000;  // lr
  int restarts = 4;    // opnorm
  int iters = 200;     // opnorm
};

struct ExperimentSpec {
  EnsembleSpec h0;
  EnsembleSpec h1;
  TestSpec test;
  int trials = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// {"h0": EnsembleSpec, "h1": EnsembleSpec, "test": {"name": ..., params},
//  "trials": int, "seed": int}
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);

struct TrialRecord {
  int hypothesis;  // 0 or 1
  int trial;
  double statistic;
  int decision;
  std::uint64_t sub_seed;
};

struct TestOutcome {
  std::string test;
  double threshold;
  int trials;
  std::uint64_t seed;
  int rejections_h0;
  int rejections_h1;
  double fpr;
  double power;
  double fpr_std_error;
  double power_std_error;
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<TrialRecord> records;  // all H0 trials, then all H1 trials
  TestOutcome outcome;
  std::vector<RocPoint> roc;  // from (0, 0) to (1, 1)
  double auc;
  double ks_distance;  // between the H0 and H1 statistic samples
  LargestEigStats summary_h0;
  LargestEigStats summary_h1;

  std::vector<double> statistics(int hypothesis) const;
};

// Seed of the ensemble stream for hypothesis h.
std::uint64_t hypothesis_seed(std::uint64_t seed, int hypothesis);

// Runs both hypotheses on up to `threads` workers. The report depends only on
// the spec, never on the thread count.
ExperimentReport run_experiment(const ExperimentSpec& spec, int threads = 1);

// Exact empirical ROC of "reject iff statistic >= t", sweeping t over the
// pooled sample values.
std::vector<RocPoint> empirical_roc(std::span<const double> h0, std::span<const double> h1);
double roc_auc(std::span<const RocPoint> roc);

nlohmann::json to_json(const ExperimentReport& report);
// Header "hypothesis,trial,statistic,decision,sub_seed", one row per trial.
std::string to_csv(const ExperimentReport& report);

}  // namespace spiked
