#include "spiked/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spiked/errors.hpp"

namespace spiked {
namespace {

struct Streams {
  Rng noise;
  Rng spike;
};

Streams split_streams(Rng& rng) {
  const std::uint64_t base = rng.next_u64();
  return {Rng(sub_seed(base, 0)), Rng(sub_seed(base, 1))};
}

std::vector<int> uniform_subset(int n, int size, Rng& rng) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < size; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void add_scaled(DenseTensor& x, double scale, const DenseTensor& y) {
  auto dst = x.entries();
  const auto src = y.entries();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

std::string to_string(Model model) {
  switch (model) {
    case Model::goe: return "goe";
    case Model::sym_noise: return "sym_noise";
    case Model::asym_noise: return "asym_noise";
    case Model::sym_spiked: return "sym_spiked";
    case Model::asym_spiked: return "asym_spiked";
    case Model::hidden_clique: return "hidden_clique";
  }
  return "unknown";
}

Model model_from_string(const std::string& name) {
  for (Model m : {Model::goe, Model::sym_noise, Model::asym_noise, Model::sym_spiked,
                  Model::asym_spiked, Model::hidden_clique})
    if (to_string(m) == name) return m;
  throw ConfigError("model", "unknown model '" + name + "'");
}

void EnsembleSpec::validate() const {
  if (n < 1) throw ConfigError("n", "must be >= 1");
  if ((model == Model::goe || model == Model::hidden_clique) && k != 2)
    throw ConfigError("k", to_string(model) + " requires k = 2");
  if (k < 1) throw ConfigError("k", "must be >= 1");
  if ((model == Model::sym_noise || model == Model::sym_spiked) && (k < 2 || k > 10))
    throw ConfigError("k", "symmetric models require 2 <= k <= 10");
  if ((model == Model::asym_noise || model == Model::asym_spiked) && k < 2)
    throw ConfigError("k", "asymmetric models require k >= 2");
  if (!(strength >= 0.0) || !std::isfinite(strength))
    throw ConfigError("strength", "must be finite and >= 0");
  try {
    tensor_entry_count(k, n);
  } catch (const Error& e) {
    throw ConfigError("n", e.what());
  }
  if (model == Model::hidden_clique) {
    if (strength != std::floor(strength) || strength < 1.0 || strength > n)
      throw ConfigError("strength", "clique size L must be an integer with 1 <= L <= n");
    if (spike) throw ConfigError("spike", "hidden_clique takes an index set, not a vector");
    if (clique) {
      if (static_cast<int>(clique->size()) != clique_size())
        throw ConfigError("spike", "clique index set must have exactly L elements");
      std::vector<int> sorted = *clique;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("spike", "clique indices must be distinct");
      if (sorted.front() < 0 || sorted.back() >= n)
        throw ConfigError("spike", "clique index out of range");
    }
  } else if (clique) {
    throw ConfigError("spike", "index sets are only valid for hidden_clique");
  }
  if (spike) {
    if (model != Model::sym_spiked && model != Model::asym_spiked)
      throw ConfigError("spike", "a fixed spike is only valid for spiked models");
    if (static_cast<int>(spike->size()) != n)
      throw ConfigError("spike", "length must equal n");
    try {
      UnitVector::from(*spike);
    } catch (const Error&) {
      throw ConfigError("spike", "must have unit norm");
    }
  }
}

nlohmann::json to_json(const EnsembleSpec& spec) {
  nlohmann::json j = {{"model", to_string(spec.model)},
                      {"n", spec.n},
                      {"k", spec.k},
                      {"strength", spec.strength},
                      {"seed", spec.seed}};
  if (spec.spike) j["spike"] = *spec.spike;
  if (spec.clique) j["spike"] = *spec.clique;
  return j;
}

EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "ensemble spec must be a JSON object");
  static const char* const kKnown[] = {"model", "n", "k", "strength", "spike", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown))
      throw ConfigError(key, "unknown field");

  EnsembleSpec spec;
  auto field = [&j](const char* name) -> const nlohmann::json& {
    if (!j.contains(name)) throw ConfigError(name, "missing");
    return j.at(name);
  };
  try {
    const auto& model = field("model");
    if (!model.is_string()) throw ConfigError("model", "must be a string");
    spec.model = model_from_string(model.get<std::string>());

    const auto& n = field("n");
    if (!n.is_number_integer()) throw ConfigError("n", "must be an integer");
    spec.n = n.get<int>();

    if (j.contains("k")) {
      if (!j["k"].is_number_integer()) throw ConfigError("k", "must be an integer");
      spec.k = j["k"].get<int>();
    }
    if (j.contains("strength")) {
      if (!j["strength"].is_number()) throw ConfigError("strength", "must be a number");
      spec.strength = j["strength"].get<double>();
    }
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
        throw ConfigError("seed", "must be a non-negative integer");
      if (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() < 0)
        throw ConfigError("seed", "must be a non-negative integer");
      spec.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("spike") && !j["spike"].is_null()) {
      const auto& s = j["spike"];
      if (!s.is_array()) throw ConfigError("spike", "must be an array");
      if (spec.model == Model::hidden_clique) {
        for (const auto& e : s)
          if (!e.is_number_integer()) throw ConfigError("spike", "clique indices must be integers");
        spec.clique = s.get<std::vector<int>>();
      } else {
        for (const auto& e : s)
          if (!e.is_number()) throw ConfigError("spike", "spike coordinates must be numbers");
        spec.spike = s.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("", std::string("malformed ensemble spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

UnitVector sample_sphere(int n, Rng& rng) {
  if (n < 1) throw ContractViolation("sample_sphere: n must be >= 1");
  std::vector<double> g(n);
  for (;;) {
    double norm2 = 0.0;
    for (double& x : g) {
      x = rng.normal();
      norm2 += x * x;
    }
    if (norm2 > 0.0) break;
  }
  return UnitVector::normalized(std::move(g));
}

SymmetricTensor sample_goe(int n, Rng& rng) {
  if (n < 1) throw ContractViolation("sample_goe: n must be >= 1");
  DenseTensor z(2, n);
  const double off_sd = std::sqrt(1.0 / n);
  const double diag_sd = std::sqrt(2.0 / n);
  for (int i = 0; i < n; ++i) {
    z(i, i) = diag_sd * rng.normal();
    for (int j = i + 1; j < n; ++j) {
      const double g = off_sd * rng.normal();
      z(i, j) = g;
      z(j, i) = g;
    }
  }
  return SymmetricTensor::assume_symmetric(std::move(z));
}

SymmetricTensor sample_sym_noise(int n, int k, Rng& rng) {
  if (k < 2 || k > 10) throw ContractViolation("sample_sym_noise: need 2 <= k <= 10");
  DenseTensor g(k, n);
  for (double& x : g.entries()) x = rng.normal();
  DenseTensor z = symmetrize(g).release();
  z *= std::sqrt(2.0 / n);
  return SymmetricTensor::assume_symmetric(std::move(z));
}

DenseTensor sample_asym_noise(int n, int k, Rng& rng) {
  if (k < 2) throw ContractViolation("sample_asym_noise: need k >= 2");
  DenseTensor z(k, n);
  const double sd = std::sqrt(1.0 / n);
  for (double& x : z.entries()) x = sd * rng.normal();
  return z;
}

SymmetricTensor sample_symmetric_noise(int n, int k, Rng& rng) {
  return k == 2 ? sample_goe(n, rng) : sample_sym_noise(n, k, rng);
}

SpikedSample sample_spiked(const EnsembleSpec& spec, Rng& rng) {
  if (spec.model != Model::sym_spiked && spec.model != Model::asym_spiked)
    throw ContractViolation("sample_spiked: model must be sym_spiked or asym_spiked");
  spec.validate();
  Streams streams = split_streams(rng);
  const bool sym = spec.model == Model::sym_spiked;

  DenseTensor x = sym ? sample_symmetric_noise(spec.n, spec.k, streams.noise).release()
                      : sample_asym_noise(spec.n, spec.k, streams.noise);

  std::vector<UnitVector> spikes;
  const int factors = sym ? 1 : spec.k;
  for (int f = 0; f < factors; ++f)
    spikes.push_back(spec.spike ? UnitVector::from(*spec.spike)
                                : sample_sphere(spec.n, streams.spike));

  if (spec.strength != 0.0) {
    const DenseTensor signal =
        sym ? outer_power(spikes.front(), spec.k).release() : outer_product(spikes);
    add_scaled(x, spec.strength, signal);
  }
  return {std::move(x), std::move(spikes)};
}

HiddenCliqueSample sample_hidden_clique(int n, int clique_size,
                                        const std::optional<std::vector<int>>& clique,
                                        Rng& rng) {
  if (n < 1) throw ContractViolation("sample_hidden_clique: n must be >= 1");
  if (clique_size < 1 || clique_size > n)
    throw ContractViolation("sample_hidden_clique: need 1 <= L <= n");
  EnsembleSpec spec;
  spec.model = Model::hidden_clique;
  spec.n = n;
  spec.strength = clique_size;
  spec.clique = clique;
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw ContractViolation(std::string("sample_hidden_clique: ") + e.what());
  }

  Streams streams = split_streams(rng);
  DenseTensor x = sample_goe(n, streams.noise).release();
  std::vector<int> u;
  if (clique) {
    u = *clique;
    std::sort(u.begin(), u.end());
  } else {
    u = uniform_subset(n, clique_size, streams.spike);
  }
  const double height = 1.0 / std::sqrt(static_cast<double>(n));
  for (int i : u)
    for (int j : u) x(i, j) += height;
  return {SymmetricTensor::assume_symmetric(std::move(x)), std::move(u)};
}

Instance sample_instance(const EnsembleSpec& spec, std::uint64_t trial) {
  spec.validate();
  const std::uint64_t seed = sub_seed(spec.seed, trial);
  Rng rng(seed);
  switch (spec.model) {
    case Model::goe: {
      Streams s = split_streams(rng);
      return {sample_goe(spec.n, s.noise).release(), true, seed};
    }
    case Model::sym_noise: {
      Streams s = split_streams(rng);
      return {sample_symmetric_noise(spec.n, spec.k, s.noise).release(), true, seed};
    }
    case Model::asym_noise: {
      Streams s = split_streams(rng);
      return {sample_asym_noise(spec.n, spec.k, s.noise), false, seed};
    }
    case Model::sym_spiked:
      return {sample_spiked(spec, rng).tensor, true, seed};
    case Model::asym_spiked:
      return {sample_spiked(spec, rng).tensor, false, seed};
    case Model::hidden_clique:
      return {std::move(sample_hidden_clique(spec.n, spec.clique_size(), spec.clique, rng).tensor)
                  .release(),
              true, seed};
  }
  throw ContractViolation("sample_instance: unknown model");
}

}  // namespace spiked
