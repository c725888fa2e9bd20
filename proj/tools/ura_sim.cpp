// SPDX-License-Identifier: Apache-2.0
//
// ura_sim: command-line front end.
//
//   ura_sim trial  --config run.cfg [--seed N] [--snr DB] [--out DIR] [--trace] [--dump]
//   ura_sim sweep  --config run.cfg [--seed N] [--out DIR] [--workers W]
//   ura_sim oracle [--only NAME]... [--out DIR]
//
// Exit codes: 0 ok, 1 configuration error, 2 numerical failure.
#include "ura/io.hpp"
#include "ura/sim.hpp"
#include "ura/verify/oracle_suite.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config, "key=value configuration file");
  cmd->add_option("-s,--seed", a.seed, "master seed (overrides the config)");
  cmd->add_option("-o,--out", a.out, "output directory (overrides output_dir)");
  cmd->add_option("-w,--workers", a.workers, "worker threads (overrides workers)");
  cmd->add_option("--set", a.sets, "extra key=value override, repeatable")->take_all();
}

// Parse errors surface as exit code 1 through the caller.
ura::SimConfig build_config(const CommonArgs& a) {
  ura::SimConfig cfg;
  if (!a.config.empty()) cfg = ura::load_config(a.config);
  for (const auto& s : a.sets) ura::apply_assignment(cfg, s);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.workers) cfg.workers = *a.workers;
  cfg.validate();
  return cfg;
}

void write_config_sidecar(const fs::path& dir, const ura::SimConfig& cfg) {
  ura::io::write_atomically(dir / "config.json", [&](std::ostream& f) {
    nlohmann::json j;
    j["schema"] = "ura.config/1";
    j["config"] = ura::snapshot(cfg);
    f << j.dump(2) << '\n';
  });
}

int run_trial_cmd(const CommonArgs& args, std::optional<double> snr, bool trace, bool dump) {
  ura::SimConfig cfg;
  try {
    cfg = build_config(args);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path out = cfg.output_dir;
  const double snr_db = snr ? *snr : cfg.snr_db.front();
  try {
    fs::create_directories(out);
    write_config_sidecar(out, cfg);
    ura::TrialArtifacts artifacts;
    ura::TrialOptions opt;
    opt.slot_workers = cfg.workers;
    if (dump) opt.artifacts = &artifacts;

    std::mutex trace_mutex;
    std::vector<std::vector<ura::IterationTrace>> traces(static_cast<std::size_t>(cfg.slots()));
    if (trace)
      opt.trace = [&](int slot, const ura::IterationTrace& it) {
        std::lock_guard<std::mutex> lock(trace_mutex);
        traces[static_cast<std::size_t>(slot)].push_back(it);
      };

    const ura::TrialRecord rec = ura::run_trial(cfg, cfg.seed, snr_db, opt);

    ura::io::write_atomically(out / "trial.json", [&](std::ostream& f) { f << ura::io::to_json(rec).dump(2) << '\n'; });
    ura::io::write_atomically(out / "trial.csv", [&](std::ostream& f) {
      ura::io::write_trial_csv_header(f);
      ura::io::write_trial_csv_row(f, rec);
    });
    if (trace)
      for (std::size_t s = 0; s < traces.size(); ++s)
        ura::io::write_atomically(out / ("trace_slot" + std::to_string(s + 1) + ".csv"), [&](std::ostream& f) {
          ura::io::write_trace_header(f);
          for (const auto& it : traces[s]) ura::io::write_trace_row(f, it);
        });
    if (dump) {
      ura::io::write_atomically(out / "channels.csv",
                                [&](std::ostream& f) { ura::io::write_channels_csv(f, artifacts.channels); });
      for (std::size_t s = 0; s < artifacts.observations.size(); ++s) {
        const auto d = ura::io::make_dump(artifacts.observations[s], artifacts.codebook);
        const std::string stem = "observation_slot" + std::to_string(s + 1);
        ura::io::write_atomically(out / (stem + ".csv"), [&](std::ostream& f) { ura::io::write_observation_csv(f, d); });
        ura::io::write_atomically(out / (stem + ".bin"),
                                  [&](std::ostream& f) { ura::io::write_observation_binary(f, d); });
      }
      if (artifacts.clusters.groups() > 0)
        ura::io::write_atomically(out / "partition.csv", [&](std::ostream& f) {
          ura::io::write_partition_csv(f, artifacts.clusters, artifacts.slot_channels);
        });
    }

    std::printf("snr_db=%s k_active=%d recovered=%d p_md=%s p_fa=%s p_e=%s nmse_db=%s runtime_ms=%.0f\n",
                ura::io::fmt(snr_db).c_str(), rec.k_active, rec.recovered, ura::io::fmt(rec.p_md).c_str(),
                ura::io::fmt(rec.p_fa).c_str(), ura::io::fmt(rec.p_e).c_str(),
                ura::io::fmt(rec.nmse_db_mean).c_str(), rec.runtime_ms);
  } catch (const ura::Error& e) {
    std::cerr << "trial failed: " << e.what() << '\n';
    return e.kind() == ura::ErrorKind::io ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "trial failed: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int run_sweep_cmd(const CommonArgs& args) {
  ura::SimConfig cfg;
  std::vector<std::string> values;
  try {
    cfg = build_config(args);
    values = ura::sweep_axis_values(cfg);
    for (const auto& v : values) (void)ura::sweep_point_config(cfg, v);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const fs::path out = cfg.output_dir;
  try {
    fs::create_directories(out);
    write_config_sidecar(out, cfg);
    std::mutex print_mutex;
    const auto result = ura::run_sweep(cfg, out, cfg.workers, [&](const ura::TrialRecord& r) {
      std::lock_guard<std::mutex> lock(print_mutex);
      std::fprintf(stderr, "value=%s trial=%s p_e=%s status=%s\n", r.config.at("sweep.value").c_str(),
                   r.config.at("sweep.trial").c_str(), ura::io::fmt(r.p_e).c_str(), r.status.c_str());
    });
    std::printf("%-10s %6s %6s %12s %12s %12s\n", "value", "ok", "failed", "p_md", "p_fa", "p_e");
    for (const auto& p : result.points)
      std::printf("%-10s %6zu %6zu %12.5g %12.5g %12.5g\n", p.axis_value.c_str(), p.ok, p.failed, p.p_md.mean(),
                  p.p_fa.mean(), p.p_e.mean());
    if (result.resumed) std::printf("resumed %zu trials from %s\n", result.resumed, (out / "records.jsonl").c_str());
    for (const auto& r : result.records)
      if (r.status.find(ura::to_string(ura::ErrorKind::numerical_collapse)) != std::string::npos)
        return kExitNumerical;
  } catch (const ura::Error& e) {
    std::cerr << "sweep failed: " << e.what() << '\n';
    return e.kind() == ura::ErrorKind::io ? kExitConfig : kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "sweep failed: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int run_oracle_cmd(const std::vector<std::string>& only, const std::string& out) {
  using namespace ura::verify;
  const std::vector<std::pair<std::string, std::function<OracleReport()>>> suites{
      {"denoiser", [] { return denoiser_oracle(); }},
      {"varpi", [] { return varpi_oracle(); }},
      {"em_stationarity", [] { return em_stationarity_oracle(); }},
      {"mrf_chain", [] { return mrf_chain_oracle(); }},
      {"mrf_2x2", [] { return mrf_grid_oracle(); }},
      {"hungarian", [] { return hungarian_oracle(); }},
      {"unitarity_peak", [] { return unitarity_peak_oracle(); }},
      {"pupe_chi_square", [] { return pupe_oracle(); }},
  };
  for (const auto& name : only) {
    bool known = false;
    for (const auto& s : suites) known = known || s.first == name;
    if (!known) {
      std::cerr << "config error: unknown oracle '" << name << "'\n";
      return kExitConfig;
    }
  }
  bool all = true;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [name, fn] : suites) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const OracleReport r = fn();
    all = all && r.passed;
    std::printf("%s %-16s worst=%-12.4g tol=%-10.3g cases=%-5zu %.2fs  %s\n", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.worst, r.tolerance, r.cases, r.seconds, r.detail.c_str());
    j.push_back({{"name", r.name},
                 {"passed", r.passed},
                 {"worst", r.worst},
                 {"tolerance", r.tolerance},
                 {"cases", r.cases},
                 {"seconds", r.seconds},
                 {"detail", r.detail}});
  }
  if (!out.empty()) {
    try {
      fs::create_directories(out);
      ura::io::write_atomically(fs::path(out) / "oracles.json", [&](std::ostream& f) { f << j.dump(2) << '\n'; });
    } catch (const std::exception& e) {
      std::cerr << "cannot write oracle report: " << e.what() << '\n';
      return kExitConfig;
    }
  }
  return all ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsourced random access simulator"};
  app.require_subcommand(1);

  CommonArgs trial_args, sweep_args;
  std::optional<double> snr;
  bool trace = false, dump = false;
  auto* trial = app.add_subcommand("trial", "run one frame and write trial.json / trial.csv");
  add_common(trial, trial_args);
  trial->add_option("--snr", snr, "SNR in dB (default: first snr_db entry; 'inf' for noiseless)");
  trial->add_flag("--trace", trace, "write per-slot estimator traces");
  trial->add_flag("--dump", dump, "write channel, observation and partition dumps");

  auto* sweep = app.add_subcommand("sweep", "run trials over the configured axis");
  add_common(sweep, sweep_args);

  std::vector<std::string> only;
  std::string oracle_out;
  auto* oracle = app.add_subcommand("oracle", "run the quadrature / enumeration / sampling oracles");
  oracle->add_option("--only", only, "run only the named oracle(s)")->take_all();
  oracle->add_option("-o,--out", oracle_out, "directory for oracles.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*trial) return run_trial_cmd(trial_args, snr, trace, dump);
  if (*sweep) return run_sweep_cmd(sweep_args);
  return run_oracle_cmd(only, oracle_out);
}
