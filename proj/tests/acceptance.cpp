// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. `acceptance <criterion>` runs one criterion and prints a
// single PASS/FAIL line; without arguments every default criterion runs.
// Each criterion also has a wall-clock budget, checked here.
#include "ura/channel_model.hpp"
#include "ura/codec.hpp"
#include "ura/gamp.hpp"
#include "ura/metrics.hpp"
#include "ura/sim.hpp"
#include "ura/verify/oracle_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef URA_SOURCE_DIR
#define URA_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace ura;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome from_report(const verify::OracleReport& r) {
  std::ostringstream os;
  os << "worst=" << r.worst << " tol=" << r.tolerance << " cases=" << r.cases << "; " << r.detail;
  return {r.passed, os.str()};
}

Outcome mrf_exactness() {
  const auto chain = verify::mrf_chain_oracle();
  const auto grid = verify::mrf_grid_oracle();
  std::ostringstream os;
  os << "chains 1xm/mx1 (m<=10): max |rho - exact| = " << chain.worst << " (tol 1e-8)"
     << "; 2x2 grid: max |rho - exact| = " << grid.worst << " (tol 1e-6)";
  return {chain.passed && grid.passed, os.str()};
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

SimConfig load_desk() { return load_config(fs::path(URA_SOURCE_DIR) / "configs" / "desk.cfg"); }

Outcome sweep_trend(const SimConfig& cfg, const std::string& tag, double final_bound) {
  const fs::path out = fs::temp_directory_path() / ("ura_acceptance_" + tag);
  fs::remove_all(out);
  const SweepResult res = run_sweep(cfg, out, workers());
  std::ostringstream os;
  bool monotone = true, complete = !res.any_failed;
  double prev = 2.0;
  os << "mean P_e by " << (cfg.sweep_axis == SweepAxis::snr_db ? "SNR" : "axis") << ":";
  for (const auto& p : res.points) {
    const double pe = p.p_e.mean();
    os << ' ' << p.axis_value << "->" << pe << "(+-" << p.p_e.standard_error() << ")";
    if (!(pe <= prev)) monotone = false;
    prev = pe;
  }
  const double last = res.points.back().p_e.mean();
  os << "; trials/point=" << cfg.trials << (complete ? "" : "; some trials failed");
  return {monotone && complete && last <= final_bound, os.str()};
}

Outcome desk_recovery() {
  SimConfig cfg = load_desk();
  return sweep_trend(cfg, "desk", 0.1);
}

// One active codeword, noiseless, M = 16, N = 64, 2^J = 128.
Outcome noiseless() {
  const UpaGeometry geom{4, 4, 0.5};
  const int n = 64, j_bits = 7, seeds = 50;
  int exact = 0;
  double worst_nmse = -1e300;
  std::string first_failure;
  for (int seed = 1; seed <= seeds; ++seed) {
    const SlotCodebook cb = build_codebook(n, j_bits, derive_seed(seed, 1));
    std::mt19937_64 rng(derive_seed(seed, 3));
    const auto scatterers = generate_scatterers(16, rng);
    const UserChannel user = synthesize_user_channel(scatterers, geom, rng);
    std::uniform_int_distribution<int> pick(1, cb.codewords());
    const int codeword = pick(rng);
    std::mt19937_64 noise(derive_seed(seed, 4));
    const SlotObservation obs = synthesize_slot(cb, {{codeword, user.angular}}, 0.0, noise);
    const EstimatorOutput out = run_estimator(obs, cb, geom, GampConfig{});
    const bool support_ok = out.detection.active_set == std::vector<int>{codeword};
    const double e = support_ok ? nmse(obs.complex_signal, out.detection.estimate, out.detection.active_set) : 0.0;
    worst_nmse = std::max(worst_nmse, e);
    if (support_ok && e < -30.0)
      ++exact;
    else if (first_failure.empty())
      first_failure = "; first failure seed " + std::to_string(seed) + " (detected " +
                      std::to_string(out.detection.active_set.size()) + " rows, nmse " + std::to_string(e) + " dB)";
  }
  std::ostringstream os;
  os << exact << "/" << seeds << " seeds exact support with NMSE < -30 dB; worst NMSE " << worst_nmse << " dB"
     << first_failure;
  return {exact == seeds, os.str()};
}

// Two users share a codeword in the middle slot; every other fragment is unique.
Outcome collision() {
  SimConfig cfg;
  for (const char* kv : {"m_v=4", "m_h=8", "n=64", "j_bits=8", "payload_bits=24", "k_active=8",
                         "channel_model=planted"})
    apply_assignment(cfg, kv);
  const int instances = 5, k = cfg.k_active, slots = cfg.slots();
  const double snr_db = 20.0;
  int ok = 0;
  std::ostringstream os;
  for (int inst = 0; inst < instances; ++inst) {
    std::mt19937_64 rng(derive_seed(900 + inst, 2));
    MessageSet msgs;
    msgs.payload_bits = cfg.payload_bits;
    msgs.j_bits = cfg.j_bits;
    msgs.codeword_idx.assign(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(slots)));
    for (int s = 0; s < slots; ++s) {
      std::vector<int> pool(static_cast<std::size_t>(1 << cfg.j_bits));
      std::iota(pool.begin(), pool.end(), 1);
      std::shuffle(pool.begin(), pool.end(), rng);
      for (int u = 0; u < k; ++u) msgs.codeword_idx[u][s] = pool[static_cast<std::size_t>(u)];
    }
    msgs.codeword_idx[1][1] = msgs.codeword_idx[0][1];
    for (const auto& idx : msgs.codeword_idx)
      msgs.payloads.push_back(assemble_message(idx, cfg.j_bits, cfg.payload_bits));

    // Colliding users sit in opposite corners of the beam grid; the rest on distinct beams.
    std::vector<PeakIndex> anchors{{1, 1}, {3, 5}};
    std::vector<int> beams;
    for (int b = 0; b < cfg.geometry.antennas(); ++b)
      if (b != anchors[0].linear(cfg.geometry) && b != anchors[1].linear(cfg.geometry)) beams.push_back(b);
    std::shuffle(beams.begin(), beams.end(), rng);
    for (int u = 2; u < k; ++u) {
      const int b = beams[static_cast<std::size_t>(u)];
      anchors.push_back({b % cfg.geometry.m_v + 1, b / cfg.geometry.m_v + 1});
    }
    // Equal received power: the duplicated row is chosen by largest distance-row
    // sum, which singles out the superposed channel only when no lone user
    // outweighs two users together.
    std::vector<UserChannel> channels;
    for (const auto& a : anchors) {
      UserChannel c = planted_user_channel(a, cfg.geometry, rng, cfg.planted_rays, cfg.planted_spread_bins);
      const double norm = c.angular.norm();
      c.angular /= norm;
      c.spatial /= norm;
      c.path_gains /= norm;
      channels.push_back(std::move(c));
    }

    TrialArtifacts art;
    TrialOptions opt;
    opt.artifacts = &art;
    const TrialRecord rec = run_frame(cfg, derive_seed(900 + inst, 0), snr_db, msgs, channels, opt);
    const std::set<Bits> got(art.stitched.payloads.begin(), art.stitched.payloads.end());
    const bool groups = rec.k_detected == k;
    const bool both = got.count(msgs.payloads[0]) && got.count(msgs.payloads[1]);
    const int k_s = static_cast<int>(art.detections[1].active_set.size());
    if (groups && both) ++ok;
    os << " [inst " << inst << ": K_s(slot 2)=" << k_s << " groups=" << rec.k_detected
       << " colliding users recovered=" << (both ? "yes" : "no") << " P_e=" << rec.p_e << "]";
  }
  return {ok == instances, std::to_string(ok) + "/" + std::to_string(instances) + " scripted instances;" + os.str()};
}

Outcome full_scale() {
  SimConfig cfg = load_config(fs::path(URA_SOURCE_DIR) / "configs" / "full_scale.cfg");
  const fs::path out = fs::temp_directory_path() / "ura_acceptance_full";
  const SweepResult res = run_sweep(cfg, out, workers());  // resumable across invocations
  const double pe = res.points.front().p_e.mean();
  std::ostringstream os;
  os << "mean P_e at 12 dB over " << res.points.front().ok << " trials: " << pe;
  return {res.points.front().ok >= 10 && pe <= 0.1, os.str()};
}

struct Criterion {
  std::function<Outcome()> run;
  double budget_s;
  bool by_default;
};

const std::map<std::string, Criterion>& criteria() {
  static const std::map<std::string, Criterion> c{
      {"denoiser", {[] { return from_report(verify::denoiser_oracle()); }, 10, true}},
      {"varpi", {[] { return from_report(verify::varpi_oracle()); }, 5, true}},
      {"em_stationarity", {[] { return from_report(verify::em_stationarity_oracle()); }, 10, true}},
      {"mrf_exactness", {mrf_exactness, 10, true}},
      {"hungarian", {[] { return from_report(verify::hungarian_oracle()); }, 30, true}},
      {"unitarity_peak", {[] { return from_report(verify::unitarity_peak_oracle()); }, 30, true}},
      {"pupe_chi_square", {[] { return from_report(verify::pupe_oracle()); }, 60, true}},
      {"desk_recovery", {desk_recovery, 900, true}},
      {"noiseless", {noiseless, 120, true}},
      {"collision", {collision, 120, true}},
      {"full_scale", {full_scale, 36000, false}},
  };
  return c;
}

bool run_one(const std::string& name, const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_budget = secs <= c.budget_s;
  const bool pass = o.passed && in_budget;
  std::printf("%s %s (%.1fs, budget %.0fs%s): %s\n", pass ? "PASS" : "FAIL", name.c_str(), secs, c.budget_s,
              in_budget ? "" : ", OVER BUDGET", o.detail.c_str());
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  bool all = true;
  if (argc > 1) {
    for (int i = 1; i < argc; ++i) {
      const auto it = criteria().find(argv[i]);
      if (it == criteria().end()) {
        std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
        return 2;
      }
      all = run_one(it->first, it->second) && all;
    }
  } else {
    for (const auto& [name, c] : criteria())
      if (c.by_default) all = run_one(name, c) && all;
  }
  return all ? 0 : 1;
}
