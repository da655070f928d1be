#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "spiked/errors.hpp"
#include "spiked/experiment.hpp"
#include "spiked/parallel.hpp"

using namespace spiked;
using nlohmann::json;

namespace {

ExperimentSpec make(EnsembleSpec h0, EnsembleSpec h1, TestSpec test, int trials, std::uint64_t seed) {
  ExperimentSpec s;
  s.h0 = std::move(h0);
  s.h1 = std::move(h1);
  s.test = std::move(test);
  s.trials = trials;
  s.seed = seed;
  return s;
}

double pooled_se(const TestOutcome& o) {
  return std::sqrt(o.fpr_std_error * o.fpr_std_error + o.power_std_error * o.power_std_error);
}

std::string field_of(const json& j) {
  try {
    experiment_spec_from_json(j).validate();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("identical hypotheses give power close to FPR") {
  EnsembleSpec goe{Model::goe, 100, 2, 0.0, {}, {}, 0};
  EnsembleSpec spiked0{Model::sym_spiked, 100, 2, 0.0, {}, {}, 0};
  TestSpec eig;
  eig.delta = 0.05;
  const ExperimentReport r = run_experiment(make(goe, spiked0, eig, 400, 3), resolve_threads(0));
  CHECK(std::fabs(r.outcome.power - r.outcome.fpr) <= 3.0 * pooled_se(r.outcome) + 1e-12);
  CHECK(r.outcome.fpr > 0.0);
  CHECK(r.outcome.trials == 400);
  CHECK(r.records.size() == 800);
  CHECK(r.outcome.fpr_std_error ==
        doctest::Approx(std::sqrt(r.outcome.fpr * (1 - r.outcome.fpr) / 400)).epsilon(1e-12));

  TestSpec tr;
  tr.name = "trace";
  const ExperimentReport t = run_experiment(make(goe, spiked0, tr, 400, 4), resolve_threads(0));
  CHECK(std::fabs(t.outcome.power - t.outcome.fpr) <= 3.0 * pooled_se(t.outcome) + 1e-12);
  CHECK(std::fabs(t.outcome.fpr - 0.05) < 0.01);
}

TEST_CASE("sub-threshold spiked matrix is spectrally indistinguishable") {
  EnsembleSpec goe{Model::goe, 500, 2, 0.0, {}, {}, 0};
  EnsembleSpec h1{Model::sym_spiked, 500, 2, 0.5, {}, {}, 0};
  const ExperimentReport r = run_experiment(make(goe, h1, TestSpec{}, 500, 5), resolve_threads(0));
  CHECK(std::fabs(r.outcome.power - r.outcome.fpr) < 0.1);
  CHECK(r.ks_distance < 0.15);
}

TEST_CASE("sub-threshold asymmetric 3-tensor defeats the implemented tests") {
  EnsembleSpec h0{Model::asym_noise, 80, 3, 0.0, {}, {}, 0};
  EnsembleSpec h1{Model::asym_spiked, 80, 3, 1.0, {}, {}, 0};

  TestSpec op;
  op.name = "opnorm";
  op.restarts = 1;
  op.iters = 15;
  const ExperimentReport a = run_experiment(make(h0, h1, op, 100, 6), resolve_threads(0));
  CHECK(std::fabs(a.outcome.power - a.outcome.fpr) < 0.1);

  TestSpec lr;
  lr.name = "lr";
  lr.samples = 20;
  const ExperimentReport b = run_experiment(make(h0, h1, lr, 100, 7), resolve_threads(0));
  CHECK(std::fabs(b.outcome.power - b.outcome.fpr) < 0.1);
}

TEST_CASE("trace test detects above threshold at every n") {
  for (int n : {100, 500, 1000}) {
    EnsembleSpec goe{Model::goe, n, 2, 0.0, {}, {}, 0};
    EnsembleSpec h1{Model::sym_spiked, n, 2, 1.0, {}, {}, 0};
    TestSpec tr;
    tr.name = "trace";
    tr.threshold = 0.5;
    const ExperimentReport r = run_experiment(make(goe, h1, tr, 400, 8 + n), resolve_threads(0));
    // Population gap is 1 - 2 Phi(-1 / (2 sqrt 2)) = 0.276.
    CHECK(r.outcome.power - r.outcome.fpr > 0.15);
    CHECK(r.outcome.threshold == 0.5);
  }
}

TEST_CASE("hidden clique above threshold is detected") {
  EnsembleSpec goe{Model::goe, 400, 2, 0.0, {}, {}, 0};
  EnsembleSpec clique{Model::hidden_clique, 400, 2, 40.0, {}, {}, 0};
  const ExperimentReport r = run_experiment(make(goe, clique, TestSpec{}, 60, 9), resolve_threads(0));
  CHECK(r.outcome.power >= 0.95);
  CHECK(r.outcome.fpr <= 0.1);
  CHECK(r.summary_h1.mean > r.summary_h0.mean);
}

TEST_CASE("empirical ROC") {
  // Oracle: for each threshold t in the pooled values, fractions >= t.
  auto check = [](std::vector<double> h0, std::vector<double> h1) {
    const auto roc = empirical_roc(h0, h1);
    std::set<double, std::greater<>> ts(h0.begin(), h0.end());
    ts.insert(h1.begin(), h1.end());
    REQUIRE(roc.size() == ts.size() + 1);
    CHECK(roc.front().fpr == 0.0);
    CHECK(roc.front().tpr == 0.0);
    CHECK(roc.back().fpr == 1.0);
    CHECK(roc.back().tpr == 1.0);
    std::size_t i = 1;
    for (double t : ts) {
      const double f = std::count_if(h0.begin(), h0.end(), [t](double x) { return x >= t; }) /
                       static_cast<double>(h0.size());
      const double p = std::count_if(h1.begin(), h1.end(), [t](double x) { return x >= t; }) /
                       static_cast<double>(h1.size());
      CHECK(roc[i].threshold == t);
      CHECK(roc[i].fpr == doctest::Approx(f).epsilon(1e-15));
      CHECK(roc[i].tpr == doctest::Approx(p).epsilon(1e-15));
      ++i;
    }
    // Mann-Whitney with ties counted half.
    double wins = 0.0;
    for (double x : h0)
      for (double y : h1) wins += y > x ? 1.0 : y == x ? 0.5 : 0.0;
    CHECK(roc_auc(roc) == doctest::Approx(wins / (h0.size() * h1.size())).epsilon(1e-14));
  };
  check({1.0, 2.0, 3.0}, {2.0, 4.0});
  check({0.0, 0.0, 1.0, 5.0}, {0.0, 1.0, 1.0, 2.0, 7.0});
  check({3.0}, {-1.0});
  check({1.0, 2.0}, {1.0, 2.0});

  const std::vector<double> lo = {1, 2, 3}, hi = {4, 5};
  CHECK(roc_auc(empirical_roc(lo, hi)) == 1.0);
  CHECK(roc_auc(empirical_roc(hi, lo)) == 0.0);
}

TEST_CASE("experiment spec errors name the field") {
  const json good = {{"h0", {{"model", "goe"}, {"n", 20}}},
                     {"h1", {{"model", "sym_spiked"}, {"n", 20}, {"strength", 1.5}}},
                     {"test", {{"name", "eig"}, {"delta", 0.1}}},
                     {"trials", 5},
                     {"seed", 1}};
  CHECK(field_of(good) == "<none>");
  CHECK_NOTHROW(experiment_spec_from_json(good));

  auto with = [&](const json::json_pointer& p, json v) {
    json j = good;
    j[p] = std::move(v);
    return j;
  };
  CHECK(field_of(with("/h0/n"_json_pointer, 0)) == "h0.n");
  CHECK(field_of(with("/h1/model"_json_pointer, "nope")) == "h1.model");
  CHECK(field_of(with("/h1/strength"_json_pointer, -1.0)) == "h1.strength");
  CHECK(field_of(with("/test/name"_json_pointer, "magic")) == "test.name");
  CHECK(field_of(with("/test/delta"_json_pointer, 0.0)) == "test.delta");
  CHECK(field_of(with("/test/bogus"_json_pointer, 1)) == "test.bogus");
  CHECK(field_of(with("/trials"_json_pointer, 0)) == "trials");
  CHECK(field_of(with("/trials"_json_pointer, "many")) == "trials");
  CHECK(field_of(with("/extra"_json_pointer, 1)) == "extra");
  json no_h1 = good;
  no_h1.erase("h1");
  CHECK(field_of(no_h1) == "h1");
  // The trace test needs matrices; lr needs a spiked alternative.
  json tensor_trace = with("/test/name"_json_pointer, "trace");
  tensor_trace["h0"] = {{"model", "sym_noise"}, {"n", 5}, {"k", 3}};
  tensor_trace["h1"] = {{"model", "sym_spiked"}, {"n", 5}, {"k", 3}, {"strength", 1.0}};
  CHECK(field_of(tensor_trace) == "test.name");
  json lr_goe = with("/test/name"_json_pointer, "lr");
  lr_goe["h1"] = {{"model", "goe"}, {"n", 20}};
  CHECK(field_of(lr_goe) == "h1.model");

  CHECK(to_json(experiment_spec_from_json(good)) == to_json(experiment_spec_from_json(
                                                        to_json(experiment_spec_from_json(good)))));
}

TEST_CASE("reports are deterministic across thread counts") {
  EnsembleSpec goe{Model::goe, 30, 2, 0.0, {}, {}, 0};
  EnsembleSpec h1{Model::sym_spiked, 30, 2, 1.2, {}, {}, 0};
  for (const char* name : {"eig", "trace", "lr", "opnorm"}) {
    TestSpec t;
    t.name = name;
    t.samples = 100;
    const ExperimentSpec s = make(goe, h1, t, 25, 42);
    const ExperimentReport one = run_experiment(s, 1);
    const ExperimentReport four = run_experiment(s, 4);
    CHECK(to_json(one).dump() == to_json(four).dump());
    CHECK(to_csv(one) == to_csv(four));
    CHECK(to_json(run_experiment(s, 2)).dump() == to_json(one).dump());

    ExperimentSpec other = s;
    other.seed = 43;
    CHECK(to_csv(run_experiment(other, 1)) != to_csv(one));
  }
}

TEST_CASE("report contents") {
  EnsembleSpec goe{Model::goe, 20, 2, 0.0, {}, {}, 0};
  EnsembleSpec h1{Model::sym_spiked, 20, 2, 3.0, {}, {}, 0};
  const ExperimentReport r = run_experiment(make(goe, h1, TestSpec{}, 10, 7), 1);
  for (int i = 0; i < 20; ++i) {
    CHECK(r.records[i].hypothesis == (i < 10 ? 0 : 1));
    CHECK(r.records[i].trial == i % 10);
    CHECK(r.records[i].decision == (r.records[i].statistic >= 2.15 ? 1 : 0));
  }
  EnsembleSpec reseeded = goe;
  reseeded.seed = hypothesis_seed(7, 0);
  CHECK(r.records[3].sub_seed == sample_instance(reseeded, 3).sub_seed);
  CHECK(r.records[3].statistic == eigvals_sym(sample_instance(reseeded, 3).tensor).largest());
  CHECK(hypothesis_seed(7, 0) != hypothesis_seed(7, 1));
  CHECK(r.statistics(1).size() == 10);

  const json j = to_json(r);
  CHECK(j["schema_version"] == "v1");
  CHECK(j["seed"] == 7);
  CHECK(j.contains("version"));
  CHECK(j["spec"]["trials"] == 10);
  CHECK(j["outcome"]["rejections_h1"].get<int>() == r.outcome.rejections_h1);
  CHECK(j["trials"].size() == 20);
  CHECK(j["roc"].front()["threshold"] == "inf");

  std::istringstream csv(to_csv(r));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "hypothesis,trial,statistic,decision,sub_seed");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 4);
    ++rows;
  }
  CHECK(rows == 20);
}
