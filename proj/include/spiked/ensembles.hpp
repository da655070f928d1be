#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiked/rng.hpp"
#include "spiked/tensor.hpp"

namespace spiked {

enum class Model { goe, sym_noise, asym_noise, sym_spiked, asym_spiked, hidden_clique };

std::string to_string(Model model);
Model model_from_string(const std::string& name);

// Which random model to draw from. `strength` is beta (sym_spiked), lambda
// (asym_spiked) or the clique size L (hidden_clique); it is ignored by the
// pure-noise models. `spike` optionally fixes the planted direction (used for
// every factor of an asymmetric spike); `clique` optionally fixes U.
struct EnsembleSpec {
  Model model = Model::goe;
  int n = 1;
  int k = 2;
  double strength = 0.0;
  std::optional<std::vector<double>> spike;
  std::optional<std::vector<int>> clique;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
  int clique_size() const { return static_cast<int>(strength); }
};

// JSON keys: "model", "n", "k", "strength", "spike", "seed". For
// hidden_clique "spike" holds the 0-based index set U.
nlohmann::json to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_spec_from_json(const nlohmann::json& j);

UnitVector sample_sphere(int n, Rng& rng);

// Z_ij ~ N(0, 1/n) for i < j, Z_ii ~ N(0, 2/n). Generated row by row over the
// upper triangle.
SymmetricTensor sample_goe(int n, Rng& rng);

// (1/k!) sqrt(2/n) sum_pi G^pi with G i.i.d. N(0, 1) in row-major order.
SymmetricTensor sample_sym_noise(int n, int k, Rng& rng);

// All n^k entries i.i.d. N(0, 1/n).
DenseTensor sample_asym_noise(int n, int k, Rng& rng);

struct SpikedSample {
  DenseTensor tensor;
  std::vector<UnitVector> spikes;  // one (symmetric) or k (asymmetric) factors
};

// beta v^{(x)k} + Z or lambda v_1 (x) ... (x) v_k + Z. Noise and spike use
// separate streams split from `rng`, so strength 0 reproduces the noise model
// drawn with the same generator state exactly.
SpikedSample sample_spiked(const EnsembleSpec& spec, Rng& rng);

struct HiddenCliqueSample {
  SymmetricTensor tensor;
  std::vector<int> clique;  // sorted
};

// X = (1/sqrt n) 1_U 1_U^T + Z with Z from sample_goe. U uniform among
// size-L subsets unless given.
HiddenCliqueSample sample_hidden_clique(int n, int clique_size,
                                        const std::optional<std::vector<int>>& clique,
                                        Rng& rng);

// Noise for the symmetric models: sample_goe when k == 2 (same law as the
// symmetrized construction, half the draws), sample_sym_noise otherwise.
SymmetricTensor sample_symmetric_noise(int n, int k, Rng& rng);

struct Instance {
  DenseTensor tensor;
  bool symmetric = false;
  std::uint64_t sub_seed = 0;
};

// Draws trial `trial` of `spec`; depends only on (spec, trial).
Instance sample_instance(const EnsembleSpec& spec, std::uint64_t trial);

}  // namespace spiked
