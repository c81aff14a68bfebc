// persist: estimate the number of clusters from the persistence profile.
//
//   persist estimate --input data.csv --header --label-col 4 --k-max 10
//   persist profile --gen rings --mode kernel --sigma 0.01 --format csv
//   persist gen spirals --n 300 --seed 4 --output spirals.csv
//   persist da-trace --gen gaussians4 --output trace.csv
//
// Exit codes: 0 success, 1 I/O or numerical failure, 2 bad flags.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "persist/annealing.hpp"
#include "persist/clustering.hpp"
#include "persist/dataset.hpp"
#include "persist/error.hpp"
#include "persist/persistence.hpp"
#include "persist/presets.hpp"

namespace {

using persist::Dataset;

struct Source {
  std::string input;
  bool header = false;
  std::optional<std::size_t> label_col;
  std::string gen;
  persist::PresetParams params;
};

struct Run {
  int k_min = 1;
  int k_max = 10;
  std::string mode = "linear";
  std::optional<double> sigma;
  int restarts = persist::kDefaultRestarts;
  bool normalize = true;
  std::string output;
  std::string format;
};

// Generator knobs shared by `gen <shape>` and `--gen <shape>`.
void add_gen_params(CLI::App* app, persist::PresetParams& p) {
  app->add_option("--n", p.n, "Points per component")->check(CLI::PositiveNumber);
  app->add_option("--R", p.radius, "Disk radius (two-disks)")->check(CLI::PositiveNumber);
  app->add_option("--gap", p.gap, "Centre distance (two-disks)")->check(CLI::PositiveNumber);
  app->add_option("--radii", p.radii, "Ring radii, comma separated")->delimiter(',');
  app->add_option("--noise", p.noise, "Noise sd (rings, spirals)")->check(CLI::NonNegativeNumber);
  app->add_option("--arms", p.arms, "Spiral arms")->check(CLI::PositiveNumber);
  app->add_option("--super-spacing", p.super_spacing, "Group triangle side (supercluster)");
  app->add_option("--sub-spacing", p.sub_spacing, "Blob triangle side (supercluster)");
  app->add_option("--sub-var", p.sub_var, "Blob variance (supercluster)")->check(CLI::PositiveNumber);
  app->add_option("--side", p.side, "Blobs per grid side (grid)")->check(CLI::PositiveNumber);
  app->add_option("--spacing", p.spacing, "Blob spacing (grid, gaussians4, highvar4, combo8)");
  app->add_option("--sd", p.sd, "Blob sd (grid, gaussians4, highvar4)")->check(CLI::PositiveNumber);
}

void add_source(CLI::App* app, Source& src) {
  auto* input = app->add_option("--input", src.input, "CSV file");
  auto* gen = app->add_option("--gen", src.gen, "Synthetic dataset instead of a file")
                  ->check(CLI::IsMember(persist::preset_names()));
  input->excludes(gen);
  app->add_flag("--header", src.header, "First CSV row is a header");
  app->add_option("--label-col", src.label_col, "0-based label column, excluded from features");
  add_gen_params(app, src.params);
}

void add_run(CLI::App* app, Run& run, std::uint64_t& seed, const std::string& default_format) {
  run.format = default_format;
  app->add_option("--k-max", run.k_max, "Largest k")->check(CLI::Range(2, 1 << 20));
  app->add_option("--k-min", run.k_min, "Smallest k")->check(CLI::Range(1, 1 << 20));
  app->add_option("--mode", run.mode, "linear (k-means) or kernel (spectral)")
      ->check(CLI::IsMember({"linear", "kernel"}));
  app->add_option("--sigma", run.sigma, "Gaussian kernel width")->check(CLI::PositiveNumber);
  app->add_option("--restarts", run.restarts, "k-means restarts")->check(CLI::PositiveNumber);
  app->add_option("--seed", seed, "Seed for generation and clustering");
  app->add_flag("--normalize,!--no-normalize", run.normalize, "Z-score features (default on)");
  app->add_option("--output", run.output, "Output path");
  app->add_option("--format", run.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

Dataset load(const Source& src, std::uint64_t seed) {
  if (!src.gen.empty()) {
    persist::PresetParams p = src.params;
    p.seed = seed;
    return persist::make_preset(src.gen, p);
  }
  persist::CsvOptions opts;
  opts.has_header = src.header;
  opts.label_column = src.label_col;
  return persist::load_csv(src.input, opts);
}

nlohmann::json source_json(const Source& src) {
  nlohmann::json j;
  if (src.gen.empty()) {
    j["input"] = src.input;
    j["header"] = src.header;
    j["label_col"] = src.label_col ? nlohmann::json(*src.label_col) : nlohmann::json(nullptr);
    return j;
  }
  const auto& p = src.params;
  j["gen"] = src.gen;
  if (p.n) j["n"] = *p.n;
  if (p.radius) j["R"] = *p.radius;
  if (p.gap) j["gap"] = *p.gap;
  if (p.radii) j["radii"] = *p.radii;
  if (p.noise) j["noise"] = *p.noise;
  if (p.arms) j["arms"] = *p.arms;
  if (p.super_spacing) j["super_spacing"] = *p.super_spacing;
  if (p.sub_spacing) j["sub_spacing"] = *p.sub_spacing;
  if (p.sub_var) j["sub_var"] = *p.sub_var;
  if (p.side) j["side"] = *p.side;
  if (p.spacing) j["spacing"] = *p.spacing;
  if (p.sd) j["sd"] = *p.sd;
  return j;
}

// Writes to `path`, or stdout when empty.
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw persist::Error("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw persist::Error("write to '" + path + "' failed");
}

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

persist::PersistenceProfile run_profile(const Run& run, std::uint64_t seed, const Dataset& data) {
  if (run.k_min >= run.k_max) throw Usage("--k-min must be below --k-max");
  persist::ProfileOptions opts;
  opts.k_min = run.k_min;
  opts.k_max = run.k_max;
  opts.restarts = run.restarts;
  opts.seed = seed;
  if (run.mode == "kernel") {
    if (!run.sigma) throw Usage("--mode kernel requires --sigma");
    opts.mode = persist::ProfileMode::kernel;
    opts.sigma = *run.sigma;
  }
  return persist::persistence_profile(data, opts);
}

void write_report(std::ostream& out, const std::string& command, const Source& src, const Run& run,
                  std::uint64_t seed, const Dataset& data, const persist::PersistenceProfile& prof) {
  if (run.format == "csv") {
    persist::write_profile_csv(out, prof);
    return;
  }
  nlohmann::json config;
  config["command"] = command;
  config["source"] = source_json(src);
  config["k_min"] = run.k_min;
  config["k_max"] = run.k_max;
  config["mode"] = run.mode;
  config["sigma"] = run.sigma ? nlohmann::json(*run.sigma) : nlohmann::json(nullptr);
  config["restarts"] = run.restarts;
  config["seed"] = seed;
  config["normalize"] = run.normalize;
  nlohmann::json report;
  report["version"] = PERSIST_VERSION;
  report["config"] = config;
  report["normalized"] = run.normalize;
  report["n_points"] = data.size();
  report["dim"] = data.dim();
  report["profile"] = persist::profile_to_json(prof);
  out << report.dump(2) << '\n';
}

Dataset prepared(const Source& src, const Run& run, std::uint64_t seed) {
  Dataset data = load(src, seed);
  return run.normalize ? persist::normalize_zscore(data) : data;
}

void log_decreasing(const persist::PersistenceProfile& prof) {
  for (int k : prof.decreasing_at()) {
    std::cerr << "note: beta_bar decreased at k = " << k << " (v = " << prof.v_at(k) << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster-count estimation from the persistence of critical resolutions", "persist"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PERSIST_VERSION);

  Source src;
  Run run;
  std::uint64_t seed = 0;

  auto* estimate = app.add_subcommand("estimate", "Print k_t; optionally write the full profile");
  add_source(estimate, src);
  add_run(estimate, run, seed, "json");

  auto* profile = app.add_subcommand("profile", "Write the persistence profile");
  add_source(profile, src);
  add_run(profile, run, seed, "csv");

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV");
  std::string shape;
  gen->add_option("shape", shape, "Dataset shape")->required()->check(CLI::IsMember(persist::preset_names()));
  add_gen_params(gen, src.params);
  gen->add_option("--seed", seed, "Generator seed");
  gen->add_option("--output", run.output, "Output path (default stdout)");

  auto* trace = app.add_subcommand("da-trace", "Deterministic-annealing sweep through the first splits");
  add_source(trace, src);
  double ratio = 1.05;
  double start_factor = 0.5;
  double end_factor = 4.0;
  trace->add_option("--seed", seed, "Seed for generation and split jitter");
  trace->add_flag("--normalize,!--no-normalize", run.normalize, "Z-score features (default on)");
  trace->add_option("--ratio", ratio, "Geometric schedule ratio")->check(CLI::Range(1.0 + 1e-9, 10.0));
  trace->add_option("--start", start_factor, "Schedule start, as a multiple of the predicted first split")
      ->check(CLI::PositiveNumber);
  trace->add_option("--end", end_factor, "Schedule end, as a multiple of the predicted first split")
      ->check(CLI::PositiveNumber);
  trace->add_option("--output", run.output, "Trace CSV path (beta,k_distinct,free_energy)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      persist::PresetParams p = src.params;
      p.seed = seed;
      const Dataset data = persist::make_preset(shape, p);
      emit(run.output, [&](std::ostream& out) { persist::write_csv(out, data); });
      return 0;
    }

    for (auto* sub : {estimate, profile, trace}) {
      if (sub->parsed() && src.input.empty() && src.gen.empty()) {
        throw Usage("one of --input or --gen is required");
      }
    }

    if (estimate->parsed() || profile->parsed()) {
      const Dataset data = prepared(src, run, seed);
      const auto prof = run_profile(run, seed, data);
      log_decreasing(prof);
      const std::string command = estimate->parsed() ? "estimate" : "profile";
      if (estimate->parsed()) {
        std::cout << "k_t = " << prof.k_t << '\n';
        if (!run.output.empty()) {
          emit(run.output, [&](std::ostream& out) { write_report(out, command, src, run, seed, data, prof); });
        }
      } else {
        emit(run.output, [&](std::ostream& out) { write_report(out, command, src, run, seed, data, prof); });
      }
      return 0;
    }

    if (trace->parsed()) {
      if (!(end_factor > start_factor)) throw Usage("--end must exceed --start");
      const Dataset data = prepared(src, run, seed);
      // beta_bar_1 of the single-cluster solution, scaled by N to the
      // normalised-posterior convention the annealer uses.
      const auto one = persist::kmeans(data, 1, 1, seed);
      const double predicted = static_cast<double>(data.size()) * persist::critical_beta(one, data).beta;
      const auto betas = persist::annealing::geometric_schedule(predicted * start_factor, predicted * end_factor, ratio);
      persist::annealing::AnnealOptions opts;
      opts.seed = seed;
      const auto result = persist::annealing::anneal(data, betas, opts);
      if (!run.output.empty()) {
        emit(run.output, [&](std::ostream& out) { persist::annealing::write_trace_csv(out, result); });
      }
      char line[160];
      std::snprintf(line, sizeof line, "predicted first split beta = %.10g (N * beta_bar_1)\n", predicted);
      std::cout << line;
      if (result.splits.empty()) {
        std::cout << "no split within the schedule\n";
      } else {
        const double b = result.splits.front().beta;
        std::snprintf(line, sizeof line, "first split beta = %.10g (relative error %+.4f)\n", b,
                      (b - predicted) / predicted);
        std::cout << line;
      }
      std::cout << "splits = " << result.splits.size() << ", final distinct = "
                << (result.steps.empty() ? 1 : result.steps.back().distinct) << '\n';
      return 0;
    }
  } catch (const Usage& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
