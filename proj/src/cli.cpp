#include "spiked/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spiked/ensembles.hpp"
#include "spiked/errors.hpp"
#include "spiked/experiment.hpp"
#include "spiked/inference.hpp"
#include "spiked/parallel.hpp"
#include "spiked/spectra.hpp"
#include "spiked/thresholds.hpp"

namespace spiked {
namespace {

using nlohmann::json;

struct CliConfig {
  std::string subcommand;
  std::string spec;
  std::string output;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  std::string format = "json";

  int k = 0;
  std::string model;
  double strength = 0.0;
  int n = 0;
  double a = 0.0;
  std::uint64_t trial = 0;
  std::size_t mc_samples = 1'000'000;
};

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json load_spec(const std::string& spec) {
  std::string text;
  const auto first = spec.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && spec[first] == '{') {
    text = spec;
  } else {
    std::ifstream in(spec);
    if (!in) throw ConfigError("--spec", "cannot open '" + spec + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("--spec", std::string("invalid JSON: ") + e.what());
  }
}

json header(const CliConfig& c, std::uint64_t seed) {
  return {{"schema_version", kSchemaVersion}, {"version", kLibraryVersion}, {"seed", seed},
          {"command", c.subcommand}};
}

std::string csv_from_json_row(const json& row) {
  std::string head;
  std::string values;
  for (const auto& [key, v] : row.items()) {
    if (v.is_structured()) continue;
    if (!head.empty()) {
      head += ',';
      values += ',';
    }
    head += key;
    if (v.is_string()) values += v.get<std::string>();
    else if (v.is_number_float()) values += format_double(v.get<double>());
    else values += v.dump();
  }
  return head + '\n' + values + '\n';
}

std::string render(const CliConfig& c, const json& doc) {
  if (c.format == "csv") return csv_from_json_row(doc);
  return doc.dump(2) + '\n';
}

std::string cmd_threshold(const CliConfig& c) {
  json doc = header(c, c.seed);
  doc.update(threshold_json(c.k));
  return render(c, doc);
}

std::string cmd_second_moment(const CliConfig& c) {
  const SecondMomentResult r = c.model == "sym"
                                   ? second_moment_sym(c.k, c.strength, c.n)
                                   : second_moment_asym(c.k, c.strength, c.n, c.seed, c.mc_samples);
  json doc = header(c, c.seed);
  doc.update(to_json(r));
  return render(c, doc);
}

std::string cmd_rate(const CliConfig& c) {
  if (!(c.a >= 0.0 && c.a < 1.0)) throw ConfigError("--a", "must lie in [0, 1)");
  if (c.n < 2) throw ConfigError("--n", "must be >= 2");
  const double log_tail = first_coord_tail_logprob(c.a, c.n);
  json doc = header(c, c.seed);
  doc.update({{"a", c.a},
              {"n", c.n},
              {"log_tail_prob", log_tail},
              {"rate_per_n", log_tail / c.n},
              {"sphere_rate", sphere_rate(c.a).value.to_double()}});
  return render(c, doc);
}

std::string cmd_sample(const CliConfig& c) {
  EnsembleSpec spec = ensemble_spec_from_json(load_spec(c.spec));
  if (c.seed_given) spec.seed = c.seed;
  const Instance inst = sample_instance(spec, c.trial);
  const DenseTensor& x = inst.tensor;

  if (c.format == "csv") {
    // One row per fibre along the last index.
    std::ostringstream out;
    const std::size_t row = static_cast<std::size_t>(x.dim());
    const auto entries = x.entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
      out << format_double(entries[i]) << (i % row == row - 1 ? '\n' : ',');
    return out.str();
  }

  json doc = header(c, spec.seed);
  doc["spec"] = to_json(spec);
  doc["trial"] = c.trial;
  doc["sub_seed"] = inst.sub_seed;
  doc["frobenius"] = frobenius(x);
  if (x.order() == 2 && inst.symmetric) doc["largest_eigenvalue"] = eigvals_sym(x).largest();
  doc["tensor"] = x.entries().size() <= kJsonEntryLimit ? to_json(x) : json(nullptr);
  return doc.dump(2) + '\n';
}

std::string cmd_experiment(const CliConfig& c) {
  ExperimentSpec spec = experiment_spec_from_json(load_spec(c.spec));
  if (c.seed_given) spec.seed = c.seed;
  const ExperimentReport report = run_experiment(spec, resolve_threads(c.threads));
  if (c.format == "csv") return to_csv(report);
  json doc = header(c, spec.seed);
  doc.update(to_json(report));
  return doc.dump(2) + '\n';
}

bool wants_json_errors(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--format=json") return true;
    if (a == "--format" && i + 1 < argc && std::string(argv[i + 1]) == "json") return true;
  }
  return false;
}

int fail(int code, const char* kind, const std::string& field, const std::string& message,
         bool json_errors, std::ostream& out, std::ostream& err) {
  err << "error: " << message << '\n';
  if (json_errors) {
    json e = {{"schema_version", kSchemaVersion}, {"error", {{"kind", kind}, {"message", message}}}};
    if (!field.empty()) e["error"]["field"] = field;
    out << e.dump(2) << '\n';
  }
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Spiked random matrix and tensor laboratory", "spiked_lab"};
  app.require_subcommand(1);

  auto common = [&c](CLI::App* sub) {
    sub->add_option("--output", c.output, "Write the result to this file instead of stdout");
    sub->add_option("--seed", c.seed, "Random seed (default 0)");
    sub->add_option("--threads", c.threads, "Worker threads (default: SPIKED_LAB_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--format", c.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* threshold = app.add_subcommand("threshold", "Second-moment thresholds beta_k and lambda_k");
  threshold->add_option("--k", c.k, "Tensor order")->required();
  common(threshold);

  CLI::App* moment = app.add_subcommand("second-moment", "log E_0[Lambda^2] by quadrature");
  moment->add_option("--model", c.model, "sym or asym")
      ->required()
      ->check(CLI::IsMember({"sym", "asym"}));
  moment->add_option("--k", c.k, "Tensor order")->required();
  moment->add_option("--strength", c.strength, "beta (sym) or lambda (asym)")->required();
  moment->add_option("--n", c.n, "Dimension")->required();
  moment->add_option("--mc-samples", c.mc_samples, "Monte Carlo draws for asym with k >= 4");
  common(moment);

  CLI::App* sample = app.add_subcommand("sample", "Draw one instance of an ensemble");
  sample->add_option("--spec", c.spec, "EnsembleSpec JSON file or inline JSON")->required();
  sample->add_option("--trial", c.trial, "Trial index (default 0)");
  common(sample);

  CLI::App* experiment = app.add_subcommand("experiment", "Run a two-hypothesis Monte Carlo experiment");
  experiment->add_option("--spec", c.spec, "ExperimentSpec JSON file or inline JSON")->required();
  common(experiment);

  CLI::App* rate = app.add_subcommand("rate", "Tail log-probability of the first sphere coordinate");
  rate->add_option("--a", c.a, "Lower end of the tail")->required();
  rate->add_option("--n", c.n, "Dimension")->required();
  common(rate);

  const bool json_errors = wants_json_errors(argc, argv);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(1, "config", "", e.what(), json_errors, out, err);
  }

  c.subcommand = app.get_subcommands().front()->get_name();
  c.seed_given = app.get_subcommands().front()->count("--seed") > 0;

  const auto start = std::chrono::steady_clock::now();
  std::string result;
  try {
    if (c.subcommand == "threshold") result = cmd_threshold(c);
    else if (c.subcommand == "second-moment") result = cmd_second_moment(c);
    else if (c.subcommand == "sample") result = cmd_sample(c);
    else if (c.subcommand == "experiment") result = cmd_experiment(c);
    else result = cmd_rate(c);
  } catch (const ConfigError& e) {
    return fail(1, "config", e.field(), e.what(), json_errors, out, err);
  } catch (const NumericalFailure& e) {
    return fail(2, "numerical", "", e.what(), json_errors, out, err);
  } catch (const Error& e) {
    return fail(1, "config", "", e.what(), json_errors, out, err);
  } catch (const std::exception& e) {
    return fail(2, "numerical", "", e.what(), json_errors, out, err);
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (c.output.empty()) {
    out << result;
  } else {
    std::ofstream file(c.output, std::ios::binary);
    if (!file) return fail(1, "config", "--output", "cannot write '" + c.output + "'", json_errors,
                           out, err);
    file << result;
  }
  err << "wall_clock_seconds: " << seconds << '\n';
  return 0;
}

}  // namespace spiked
