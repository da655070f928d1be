#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "spiked/ensembles.hpp"
#include "spiked/errors.hpp"
#include "spiked/parallel.hpp"
#include "spiked/spectra.hpp"
#include "spiked/tensor.hpp"

using namespace spiked;

namespace {

DenseTensor random_symmetric_tensor(int k, int n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  DenseTensor g(k, n);
  for (double& e : g.entries()) e = nd(gen);
  return symmetrize(g).release();
}

Eigen::MatrixXd as_matrix(const DenseTensor& x) {
  Eigen::MatrixXd m(x.dim(), x.dim());
  for (int i = 0; i < x.dim(); ++i)
    for (int j = 0; j < x.dim(); ++j) m(i, j) = x(i, j);
  return m;
}

DenseTensor from_matrix(const Eigen::MatrixXd& m) {
  DenseTensor x(2, static_cast<int>(m.rows()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) x(i, j) = 0.5 * (m(i, j) + m(j, i));
  return x;
}

std::vector<double> top_eigenvalues(int trials, const std::function<DenseTensor(int)>& draw) {
  std::vector<double> out(trials);
  parallel_for(trials, resolve_threads(0),
               [&](std::size_t t) { out[t] = eigvals_sym(draw(static_cast<int>(t))).largest(); });
  return out;
}

}  // namespace

TEST_CASE("sphere samples") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) CHECK(std::fabs(sample_sphere(1, rng)[0]) == 1.0);

  std::vector<double> first;
  std::vector<double> sq;
  for (int i = 0; i < 100'000; ++i) {
    first.push_back(sample_sphere(10, rng)[0]);
    const double t = sample_sphere(25, rng)[0];
    sq.push_back(t * t);
  }
  const oracle::Moments m1 = oracle::moments(first);
  CHECK(std::fabs(m1.mean) < 3.0 / std::sqrt(1e5) / std::sqrt(10.0));
  const oracle::Moments m2 = oracle::moments(sq);
  CHECK(std::fabs(m2.mean - 1.0 / 25) < 3.0 * m2.se);
}

TEST_CASE("GOE entry variances") {
  Rng rng(2);
  std::vector<double> off;
  std::vector<double> diag;
  for (int i = 0; i < 100'000; ++i) {
    const SymmetricTensor z = sample_goe(10, rng);
    off.push_back(z(0, 1));
    diag.push_back(z(0, 0));
    if (i < 100) CHECK(symmetry_defect(z.dense()) == 0.0);
  }
  const oracle::Moments mo = oracle::moments(off);
  const oracle::Moments md = oracle::moments(diag);
  CHECK(std::fabs(mo.var - 0.1) < 3.0 * mo.var_se);
  CHECK(std::fabs(md.var - 0.2) < 3.0 * md.var_se);
}

TEST_CASE("symmetric noise tensor") {
  Rng rng(3);
  SUBCASE("distinct-index entry variance and linear functionals") {
    std::mt19937_64 gen(4);
    DenseTensor a = random_symmetric_tensor(3, 6, gen);
    a *= std::sqrt(6.0 / 2.0) / frobenius(a);  // Var <A, Z> = 1
    std::vector<double> entry;
    std::vector<double> functional;
    for (int i = 0; i < 100'000; ++i) {
      const SymmetricTensor z = sample_sym_noise(10, 3, rng);
      entry.push_back(z.dense().at({0, 1, 2}));
      const SymmetricTensor z6 = sample_sym_noise(6, 3, rng);
      functional.push_back(inner(a, z6.dense()));
    }
    const oracle::Moments me = oracle::moments(entry);
    CHECK(std::fabs(me.var - 1.0 / 30) < 3.0 * me.var_se);
    const oracle::Moments mf = oracle::moments(functional);
    CHECK(std::fabs(mf.var - 2.0 * inner(a, a) / 6) < 3.0 * mf.var_se);

    // Log-MGF at t = 1 equals ||A||^2 / n, with a bootstrap standard error.
    std::vector<double> w(functional.size());
    std::transform(functional.begin(), functional.end(), w.begin(), [](double x) { return std::exp(x); });
    auto log_mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return std::log(s / v.size());
    };
    const double estimate = log_mean(w);
    std::mt19937_64 boot(5);
    std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
    std::vector<double> reps;
    std::vector<double> resample(w.size());
    for (int b = 0; b < 200; ++b) {
      for (double& x : resample) x = w[pick(boot)];
      reps.push_back(log_mean(resample));
    }
    const double boot_se = std::sqrt(oracle::moments(reps).var);
    CHECK(std::fabs(estimate - inner(a, a) / 6) < 3.0 * boot_se);
  }
  SUBCASE("is exactly symmetric") {
    for (int i = 0; i < 20; ++i) {
      const SymmetricTensor z = sample_sym_noise(5, 4, rng);
      const SymmetricTensor again = symmetrize(z.dense());
      CHECK(std::equal(z.entries().begin(), z.entries().end(), again.entries().begin()));
    }
  }
  SUBCASE("k = 2 matches GOE in distribution") {
    std::vector<double> a(500);
    std::vector<double> b(500);
    for (int t = 0; t < 500; ++t) {
      a[t] = eigvals_sym(sample_sym_noise(50, 2, rng)).largest();
      b[t] = eigvals_sym(sample_goe(50, rng)).largest();
    }
    CHECK(ks_distance(a, b) < 0.1);
  }
}

TEST_CASE("asymmetric noise tensor") {
  Rng rng(6);
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  DenseTensor a(3, 4);
  for (double& e : a.entries()) e = nd(gen);
  a *= 2.0 / frobenius(a);  // ||A||^2 / n = 1
  std::vector<double> e0;
  std::vector<double> e1;
  std::vector<double> functional;
  for (int i = 0; i < 100'000; ++i) {
    const DenseTensor z = sample_asym_noise(10, 2, rng);
    e0.push_back(z(0, 1));
    e1.push_back(z(1, 0));
    functional.push_back(inner(a, sample_asym_noise(4, 3, rng)));
  }
  const oracle::Moments m0 = oracle::moments(e0);
  CHECK(std::fabs(m0.var - 0.1) < 3.0 * m0.var_se);
  std::vector<double> prod(e0.size());
  for (std::size_t i = 0; i < e0.size(); ++i) prod[i] = e0[i] * e1[i];
  const oracle::Moments mp = oracle::moments(prod);
  CHECK(std::fabs(mp.mean) < 3.0 * mp.se);
  const oracle::Moments mf = oracle::moments(functional);
  CHECK(std::fabs(mf.var - 1.0) < 3.0 * mf.var_se);
}

TEST_CASE("spiked models") {
  SUBCASE("zero strength reproduces the noise draw") {
    for (Model noise : {Model::goe, Model::sym_noise, Model::asym_noise}) {
      EnsembleSpec n{noise, 6, noise == Model::goe ? 2 : 3, 0.0, {}, {}, 41};
      EnsembleSpec s = n;
      s.model = noise == Model::asym_noise ? Model::asym_spiked : Model::sym_spiked;
      for (std::uint64_t t = 0; t < 3; ++t) {
        const Instance a = sample_instance(n, t);
        const Instance b = sample_instance(s, t);
        CHECK(std::equal(a.tensor.entries().begin(), a.tensor.entries().end(),
                         b.tensor.entries().begin()));
      }
    }
  }
  SUBCASE("operator norm exceeds beta minus the noise norm") {
    EnsembleSpec spec{Model::sym_spiked, 50, 3, 5.0, {}, {}, 8};
    Rng rng(9);
    for (std::uint64_t t = 0; t < 3; ++t) {
      const Instance inst = sample_instance(spec, t);
      const double value =
          operator_norm_lb(SymmetricTensor::assume_symmetric(inst.tensor), 4, 200, rng).value;
      CHECK(value >= 1.0);
    }
  }
  SUBCASE("fixed spike is used for every factor") {
    EnsembleSpec spec{Model::asym_spiked, 4, 3, 2.0, std::vector<double>{0.6, 0.8, 0, 0}, {}, 1};
    Rng rng(10);
    const SpikedSample s = sample_spiked(spec, rng);
    CHECK(s.spikes.size() == 3);
    for (const UnitVector& v : s.spikes) CHECK(v[1] == 0.8);
  }
  SUBCASE("BBP location at n = 1000") {
    EnsembleSpec spec{Model::sym_spiked, 1000, 2, 1.5, {}, {}, 11};
    const std::vector<double> top =
        top_eigenvalues(10, [&](int t) { return sample_instance(spec, t).tensor; });
    CHECK(std::fabs(oracle::moments(top).mean - 13.0 / 6) < 0.05);
  }
}

TEST_CASE("hidden clique") {
  SUBCASE("signal part is the rank-one clique indicator") {
    const int n = 16;
    EnsembleSpec hc{Model::hidden_clique, n, 2, static_cast<double>(n), {}, {}, 12};
    EnsembleSpec goe{Model::goe, n, 2, 0.0, {}, {}, 12};
    DenseTensor diff = sample_instance(hc, 0).tensor;
    DenseTensor z = sample_instance(goe, 0).tensor;
    z *= -1.0;
    diff += z;
    for (double x : diff.entries()) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
    const Spectrum s = eigvals_sym(SymmetricTensor::from_dense(diff, 1e-12));
    CHECK(s.eigenvalues[0] == doctest::Approx(4.0).epsilon(1e-12));
    for (int i = 1; i < n; ++i) CHECK(std::fabs(s.eigenvalues[i]) < 1e-12);
  }
  SUBCASE("clique set handling") {
    Rng rng(13);
    const HiddenCliqueSample s = sample_hidden_clique(10, 4, std::nullopt, rng);
    CHECK(s.clique.size() == 4);
    CHECK(std::is_sorted(s.clique.begin(), s.clique.end()));
    CHECK(std::adjacent_find(s.clique.begin(), s.clique.end()) == s.clique.end());
    const HiddenCliqueSample f = sample_hidden_clique(10, 2, std::vector<int>{7, 3}, rng);
    CHECK(f.clique == std::vector<int>{3, 7});
    CHECK_THROWS_AS(sample_hidden_clique(5, 6, std::nullopt, rng), ContractViolation);
    CHECK_THROWS_AS(sample_hidden_clique(5, 2, std::vector<int>{1}, rng), ContractViolation);
  }
  SUBCASE("random subsets are uniform") {
    Rng rng(14);
    std::vector<int> hits(6, 0);
    for (int t = 0; t < 30'000; ++t)
      for (int i : sample_hidden_clique(6, 2, std::nullopt, rng).clique) ++hits[i];
    // Each index is included with probability 1/3.
    for (int h : hits) CHECK(std::fabs(h / 30'000.0 - 1.0 / 3) < 3.0 * std::sqrt(2.0 / 9 / 30'000));
  }
  SUBCASE("large clique is detected at n = 900") {
    const int n = 900;
    EnsembleSpec spec{Model::hidden_clique, n, 2, 2.0 * std::ceil(std::sqrt(n)), {}, {}, 15};
    const std::vector<double> top =
        top_eigenvalues(100, [&](int t) { return sample_instance(spec, t).tensor; });
    CHECK(std::count_if(top.begin(), top.end(), [](double x) { return x > 2.2; }) >= 95);
  }
  SUBCASE("fixed and random clique give the same top eigenvalue law") {
    const int n = 100;
    const int l = 20;
    std::vector<int> first(l);
    std::iota(first.begin(), first.end(), 0);
    EnsembleSpec fixed{Model::hidden_clique, n, 2, static_cast<double>(l), {}, first, 16};
    EnsembleSpec random{Model::hidden_clique, n, 2, static_cast<double>(l), {}, {}, 17};
    const auto a = top_eigenvalues(500, [&](int t) { return sample_instance(fixed, t).tensor; });
    const auto b = top_eigenvalues(500, [&](int t) { return sample_instance(random, t).tensor; });
    CHECK(ks_distance(a, b) < 0.1);
  }
}

TEST_CASE("GOE law is invariant under a fixed rotation") {
  std::mt19937_64 gen(18);
  const Eigen::MatrixXd q = oracle::haar_orthogonal(50, gen);
  EnsembleSpec spec{Model::goe, 50, 2, 0.0, {}, {}, 19};
  EnsembleSpec other{Model::goe, 50, 2, 0.0, {}, {}, 20};
  auto rotate = [&](int t) {
    const Eigen::MatrixXd m = as_matrix(sample_instance(spec, t).tensor);
    return from_matrix(q * m * q.transpose());
  };
  const auto rotated = top_eigenvalues(500, rotate);
  const auto plain = top_eigenvalues(500, [&](int t) { return sample_instance(other, t).tensor; });
  CHECK(ks_distance(rotated, plain) < 0.1);

  std::vector<double> rotated_diag(2000);
  std::vector<double> plain_diag(2000);
  parallel_for(2000, resolve_threads(0), [&](std::size_t t) {
    rotated_diag[t] = rotate(static_cast<int>(t))(0, 0);
    plain_diag[t] = sample_instance(other, t).tensor(0, 0);
  });
  CHECK(ks_distance(rotated_diag, plain_diag) < 0.1);
}

TEST_CASE("determinism") {
  EnsembleSpec spec{Model::sym_spiked, 8, 3, 1.0, {}, {}, 21};
  const Instance a = sample_instance(spec, 5);
  const Instance b = sample_instance(spec, 5);
  CHECK(a.sub_seed == b.sub_seed);
  CHECK(std::equal(a.tensor.entries().begin(), a.tensor.entries().end(), b.tensor.entries().begin()));
  const Instance c = sample_instance(spec, 6);
  CHECK(a.sub_seed != c.sub_seed);

  std::vector<double> serial(16);
  std::vector<double> parallel(16);
  for (int t = 0; t < 16; ++t) serial[t] = frobenius(sample_instance(spec, t).tensor);
  parallel_for(16, 4, [&](std::size_t t) { parallel[t] = frobenius(sample_instance(spec, t).tensor); });
  CHECK(serial == parallel);
}

TEST_CASE("ensemble spec JSON") {
  const auto j = nlohmann::json::parse(
      R"({"model":"sym_spiked","n":3,"k":3,"strength":1.5,"spike":[0.6,0.8,0],"seed":9})");
  const EnsembleSpec s = ensemble_spec_from_json(j);
  CHECK(s.model == Model::sym_spiked);
  CHECK(s.k == 3);
  CHECK(s.seed == 9);
  CHECK(s.spike->at(1) == 0.8);
  CHECK(ensemble_spec_from_json(to_json(s)).strength == 1.5);
  CHECK(to_json(s) == j);

  const auto hc = ensemble_spec_from_json(
      nlohmann::json::parse(R"({"model":"hidden_clique","n":10,"strength":2,"spike":[1,4]})"));
  CHECK(hc.clique == std::vector<int>{1, 4});

  auto field_of = [](const char* text) {
    try {
      ensemble_spec_from_json(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"model":"goe","n":3,"colour":1})") == "colour");
  CHECK(field_of(R"({"n":3})") == "model");
  CHECK(field_of(R"({"model":"wishart","n":3})") == "model");
  CHECK(field_of(R"({"model":"goe","n":0})") == "n");
  CHECK(field_of(R"({"model":"goe","n":3,"k":3})") == "k");
  CHECK(field_of(R"({"model":"sym_spiked","n":3,"strength":-1})") == "strength");
  CHECK(field_of(R"({"model":"sym_spiked","n":3,"strength":1,"spike":[1,0]})") == "spike");
  CHECK(field_of(R"({"model":"sym_spiked","n":2,"strength":1,"spike":[1,1]})") == "spike");
  CHECK(field_of(R"({"model":"hidden_clique","n":3,"strength":4})") == "strength");
  CHECK(field_of(R"({"model":"hidden_clique","n":3,"strength":2,"spike":[0]})") == "spike");
  CHECK(field_of(R"({"model":"goe","n":3,"seed":-1})") == "seed");
}
