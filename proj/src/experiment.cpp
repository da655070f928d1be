#include "spiked/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spiked/errors.hpp"
#include "spiked/inference.hpp"
#include "spiked/parallel.hpp"
#include "spiked/rng.hpp"

namespace spiked {
namespace {

constexpr const char* kTests[] = {"eig", "trace", "lr", "opnorm"};

bool order_two_symmetric(const EnsembleSpec& s) {
  return s.k == 2 && s.model != Model::asym_noise && s.model != Model::asym_spiked;
}

bool calibrated(const TestSpec& t) {
  return !t.threshold && (t.name == "trace" || t.name == "opnorm");
}

double compute_statistic(const ExperimentSpec& spec, const Instance& inst) {
  const TestSpec& t = spec.test;
  if (t.name == "eig") return eigvals_sym(inst.tensor).largest();
  if (t.name == "trace") return trace(inst.tensor);
  Rng rng(sub_seed(inst.sub_seed, 2));
  if (t.name == "lr") {
    const LikelihoodRatioEstimate e =
        spec.h1.model == Model::sym_spiked
            ? likelihood_ratio_mc(inst.tensor, spec.h1.strength, t.samples, rng)
            : likelihood_ratio_mc_asym(inst.tensor, spec.h1.strength, t.samples, rng);
    return e.log_estimate;
  }
  if (inst.symmetric)
    return operator_norm_lb(SymmetricTensor::assume_symmetric(inst.tensor), t.restarts, t.iters, rng)
        .value;
  return operator_norm_lb_asym(inst.tensor, t.restarts, t.iters, rng).value;
}

int read_int(const nlohmann::json& j, const char* name, const std::string& path) {
  if (!j.at(name).is_number_integer()) throw ConfigError(path + name, "must be an integer");
  return j.at(name).get<int>();
}

double read_number(const nlohmann::json& j, const char* name, const std::string& path) {
  if (!j.at(name).is_number()) throw ConfigError(path + name, "must be a number");
  return j.at(name).get<double>();
}

EnsembleSpec read_hypothesis(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) throw ConfigError(name, "missing");
  try {
    return ensemble_spec_from_json(j.at(name));
  } catch (const ConfigError& e) {
    const std::string field = e.field().empty() ? name : std::string(name) + "." + e.field();
    std::string what = e.what();
    if (!e.field().empty()) what = what.substr(e.field().size() + 2);
    throw ConfigError(field, what);
  }
}

TestSpec read_test(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("test", "must be a JSON object");
  static const char* const kKnown[] = {"name",    "delta",    "threshold", "alpha",
                                       "samples", "restarts", "iters"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw ConfigError("test." + key, "unknown field");
  TestSpec t;
  if (!j.contains("name")) throw ConfigError("test.name", "missing");
  if (!j["name"].is_string()) throw ConfigError("test.name", "must be a string");
  t.name = j["name"].get<std::string>();
  const std::string p = "test.";
  if (j.contains("delta")) t.delta = read_number(j, "delta", p);
  if (j.contains("threshold")) t.threshold = read_number(j, "threshold", p);
  if (j.contains("alpha")) t.alpha = read_number(j, "alpha", p);
  if (j.contains("samples")) t.samples = read_int(j, "samples", p);
  if (j.contains("restarts")) t.restarts = read_int(j, "restarts", p);
  if (j.contains("iters")) t.iters = read_int(j, "iters", p);
  return t;
}

double binomial_se(double p, int trials) {
  return std::sqrt(p * (1.0 - p) / trials);
}

}  // namespace

void ExperimentSpec::validate() const {
  h0.validate();
  h1.validate();
  if (std::find(std::begin(kTests), std::end(kTests), test.name) == std::end(kTests))
    throw ConfigError("test.name", "unknown test '" + test.name + "'");
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (test.name == "eig") {
    if (!(test.delta > 0.0)) throw ConfigError("test.delta", "must be > 0");
    if (!order_two_symmetric(h0) || !order_two_symmetric(h1))
      throw ConfigError("test.name", "eig needs order-2 symmetric models");
  }
  if (test.name == "trace" && (h0.k != 2 || h1.k != 2))
    throw ConfigError("test.name", "trace needs order-2 models");
  if (test.name == "lr") {
    if (h1.model != Model::sym_spiked && h1.model != Model::asym_spiked)
      throw ConfigError("h1.model", "lr needs a spiked alternative");
    if (h0.k != h1.k || h0.n != h1.n) throw ConfigError("h0", "lr needs matching n and k");
    if (test.samples < 1) throw ConfigError("test.samples", "must be >= 1");
  }
  if (test.name == "opnorm") {
    if (test.restarts < 1) throw ConfigError("test.restarts", "must be >= 1");
    if (test.iters < 1) throw ConfigError("test.iters", "must be >= 1");
  }
  if (test.alpha && !(*test.alpha > 0.0 && *test.alpha < 1.0))
    throw ConfigError("test.alpha", "must lie in (0, 1)");
  if (test.threshold && !std::isfinite(*test.threshold))
    throw ConfigError("test.threshold", "must be finite");
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "experiment spec must be a JSON object");
  static const char* const kKnown[] = {"h0", "h1", "test", "trials", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw ConfigError(key, "unknown field");
  ExperimentSpec spec;
  spec.h0 = read_hypothesis(j, "h0");
  spec.h1 = read_hypothesis(j, "h1");
  if (!j.contains("test")) throw ConfigError("test", "missing");
  spec.test = read_test(j.at("test"));
  if (j.contains("trials")) spec.trials = read_int(j, "trials", "");
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                   s.get<std::int64_t>() < 0))
      throw ConfigError("seed", "must be a non-negative integer");
    spec.seed = s.get<std::uint64_t>();
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json test = {{"name", spec.test.name}};
  if (spec.test.name == "eig") test["delta"] = spec.test.delta;
  if (spec.test.threshold) test["threshold"] = *spec.test.threshold;
  if (spec.test.alpha) test["alpha"] = *spec.test.alpha;
  if (spec.test.name == "lr") test["samples"] = spec.test.samples;
  if (spec.test.name == "opnorm") {
    test["restarts"] = spec.test.restarts;
    test["iters"] = spec.test.iters;
  }
  return {{"h0", to_json(spec.h0)},
          {"h1", to_json(spec.h1)},
          {"test", test},
          {"trials", spec.trials},
          {"seed", spec.seed}};
}

std::vector<double> ExperimentReport::statistics(int hypothesis) const {
  std::vector<double> out;
  for (const TrialRecord& r : records)
    if (r.hypothesis == hypothesis) out.push_back(r.statistic);
  return out;
}

std::uint64_t hypothesis_seed(std::uint64_t seed, int hypothesis) {
  return sub_seed(seed, static_cast<std::uint64_t>(hypothesis));
}

std::vector<RocPoint> empirical_roc(std::span<const double> h0, std::span<const double> h1) {
  if (h0.empty() || h1.empty()) throw ContractViolation("empirical_roc: empty sample");
  std::vector<double> a(h0.begin(), h0.end());
  std::vector<double> b(h1.begin(), h1.end());
  std::sort(a.begin(), a.end(), std::greater<>());
  std::sort(b.begin(), b.end(), std::greater<>());
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  std::vector<RocPoint> roc;
  roc.push_back({HUGE_VAL, 0.0, 0.0});
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (double t : pooled) {
    while (ia < a.size() && a[ia] >= t) ++ia;
    while (ib < b.size() && b[ib] >= t) ++ib;
    roc.push_back({t, static_cast<double>(ia) / a.size(), static_cast<double>(ib) / b.size()});
  }
  return roc;
}

double roc_auc(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += 0.5 * (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr);
  return area;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, int threads) {
  spec.validate();
  EnsembleSpec hyp[2] = {spec.h0, spec.h1};
  for (int h = 0; h < 2; ++h) hyp[h].seed = hypothesis_seed(spec.seed, h);

  const auto trials = static_cast<std::size_t>(spec.trials);
  std::vector<TrialRecord> records(2 * trials);
  parallel_for(2 * trials, threads, [&](std::size_t i) {
    const int h = static_cast<int>(i / trials);
    const auto t = static_cast<int>(i % trials);
    const Instance inst = sample_instance(hyp[h], static_cast<std::uint64_t>(t));
    records[i] = {h, t, compute_statistic(spec, inst), 0, inst.sub_seed};
  });

  ExperimentReport report;
  report.spec = spec;
  report.records = std::move(records);
  const std::vector<double> s0 = report.statistics(0);
  const std::vector<double> s1 = report.statistics(1);

  double threshold = 0.0;
  if (spec.test.name == "eig") {
    threshold = 2.0 + spec.test.delta;
  } else if (spec.test.threshold) {
    threshold = *spec.test.threshold;
  } else if (calibrated(spec.test)) {
    std::vector<double> sorted(s0);
    std::sort(sorted.begin(), sorted.end());
    threshold = sample_quantile(sorted, 1.0 - spec.test.alpha.value_or(0.05));
  }

  int rej[2] = {0, 0};
  for (TrialRecord& r : report.records) {
    r.decision = spec.test.name == "eig" ? spectral_test_eig(r.statistic, spec.test.delta)
                                         : (r.statistic >= threshold ? 1 : 0);
    rej[r.hypothesis] += r.decision;
  }

  TestOutcome& o = report.outcome;
  o.test = spec.test.name;
  o.threshold = threshold;
  o.trials = spec.trials;
  o.seed = spec.seed;
  o.rejections_h0 = rej[0];
  o.rejections_h1 = rej[1];
  o.fpr = static_cast<double>(rej[0]) / spec.trials;
  o.power = static_cast<double>(rej[1]) / spec.trials;
  o.fpr_std_error = binomial_se(o.fpr, spec.trials);
  o.power_std_error = binomial_se(o.power, spec.trials);

  report.roc = empirical_roc(s0, s1);
  report.auc = roc_auc(report.roc);
  report.ks_distance = ks_distance(s0, s1);
  report.summary_h0 = summarize_top_eigenvalues(s0);
  report.summary_h1 = summarize_top_eigenvalues(s1);
  return report;
}

nlohmann::json to_json(const ExperimentReport& report) {
  const TestOutcome& o = report.outcome;
  nlohmann::json trials = nlohmann::json::array();
  for (const TrialRecord& r : report.records)
    trials.push_back({{"hypothesis", r.hypothesis},
                      {"trial", r.trial},
                      {"statistic", r.statistic},
                      {"decision", r.decision},
                      {"sub_seed", r.sub_seed}});
  nlohmann::json roc = nlohmann::json::array();
  for (const RocPoint& p : report.roc) {
    nlohmann::json t = std::isfinite(p.threshold) ? nlohmann::json(p.threshold)
                                                  : nlohmann::json("inf");
    roc.push_back({{"threshold", t}, {"fpr", p.fpr}, {"tpr", p.tpr}});
  }
  return {{"schema_version", kSchemaVersion},
          {"version", kLibraryVersion},
          {"seed", report.spec.seed},
          {"spec", to_json(report.spec)},
          {"outcome",
           {{"test", o.test},
            {"threshold", o.threshold},
            {"trials", o.trials},
            {"rejections_h0", o.rejections_h0},
            {"rejections_h1", o.rejections_h1},
            {"fpr", o.fpr},
            {"power", o.power},
            {"fpr_std_error", o.fpr_std_error},
            {"power_std_error", o.power_std_error}}},
          {"auc", report.auc},
          {"ks_distance", report.ks_distance},
          {"statistic_h0", to_json(report.summary_h0)},
          {"statistic_h1", to_json(report.summary_h1)},
          {"roc", roc},
          {"trials", trials}};
}

std::string to_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "hypothesis,trial,statistic,decision,sub_seed\n";
  char buf[32];
  for (const TrialRecord& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g", r.statistic);
    out << r.hypothesis << ',' << r.trial << ',' << buf << ',' << r.decision << ','
        << r.sub_seed << '\n';
  }
  return out.str();
}

}  // namespace spiked
