// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo harness: configuration, one trial of the full
// encode → channel → EM-MRF-GAMP → clustering → stitching pipeline, and
// resumable parameter sweeps.
#pragma once

#include "ura/channel_model.hpp"
#include "ura/clustering.hpp"
#include "ura/codec.hpp"
#include "ura/common.hpp"
#include "ura/gamp.hpp"
#include "ura/io.hpp"
#include "ura/metrics.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ura {

// ---------------------------------------------------------------------------
// Configuration

enum class ChannelMode { scatterer, planted };
enum class ScattererScope { per_user, shared };
enum class SweepAxis { snr_db, n, m_list };

struct SimConfig {
  UpaGeometry geometry{4, 25, 0.5};
  int n = 100;
  int j_bits = 12;
  int payload_bits = 96;
  int k_active = 100;
  std::vector<double> snr_db{10.0};
  int trials = 1;
  std::uint64_t seed = 1;
  int max_j_bits = kMaxCodebookBits;
  bool fixed_codebook = false;

  GampConfig gamp;
  ClusteringConfig clustering;

  ChannelMode channel_mode = ChannelMode::scatterer;
  int scatterers = 16;
  ScattererScope scatterer_scope = ScattererScope::per_user;
  ScattererOptions scatterer;
  ChannelOptions channel;
  bool large_scale_fading = false;
  double planted_spread_bins = 0.25;
  int planted_rays = 10;
  double slot_perturbation = 0.0;  // relative std of an independent per-slot channel perturbation

  SweepAxis sweep_axis = SweepAxis::snr_db;
  std::vector<std::string> sweep_values;
  std::string output_dir = "ura_out";
  int workers = 1;

  int slots() const { return fragment_count(payload_bits, j_bits); }
  double spectral_efficiency() const {
    return static_cast<double>(payload_bits) * k_active / (static_cast<double>(slots()) * n);
  }

  void validate() const {
    geometry.validate();
    require(n >= 1 && k_active >= 1 && payload_bits >= 1 && trials >= 1, ErrorKind::invalid_parameter,
            "n, k_active, payload_bits and trials must be >= 1");
    require(j_bits >= 1, ErrorKind::invalid_parameter, "j_bits must be >= 1");
    require(j_bits <= max_j_bits, ErrorKind::resource_limit, "j_bits exceeds max_j_bits");
    require(!snr_db.empty(), ErrorKind::invalid_parameter, "snr_db needs at least one value");
    require(gamp.t_max >= 1 && gamp.t_mrf >= 0 && gamp.tau > 0.0, ErrorKind::invalid_parameter,
            "t_max >= 1, t_mrf >= 0 and tau > 0 required");
    require(gamp.damping > 0.0 && gamp.damping <= 1.0, ErrorKind::invalid_parameter, "damping must be in (0, 1]");
    require(gamp.lambda_init > 0.0 && gamp.snr_hint >= 0.0, ErrorKind::invalid_parameter,
            "lambda_init > 0 and snr_hint >= 0 required");
    require(clustering.t_c >= 1, ErrorKind::invalid_parameter, "t_c must be >= 1");
    require(clustering.zeta > 0.0 && clustering.zeta < 1.0, ErrorKind::invalid_parameter, "zeta must be in (0, 1)");
    require(scatterers >= 1 && channel.subpaths_per_scatterer >= 1 && planted_rays >= 1,
            ErrorKind::invalid_parameter, "scatterer, subpath and ray counts must be >= 1");
    require(channel.activation_probability > 0.0 && channel.activation_probability <= 1.0,
            ErrorKind::invalid_parameter, "activation_p must be in (0, 1]");
    require(slot_perturbation >= 0.0 && planted_spread_bins >= 0.0, ErrorKind::invalid_parameter,
            "slot_perturbation and planted_spread_bins must be >= 0");
    require(workers >= 1, ErrorKind::invalid_parameter, "workers must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::invalid_parameter, key + ": expected a boolean, got '" + v + "'");
}

inline double parse_num(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const Error&) {
    throw Error(ErrorKind::invalid_parameter, key + ": expected a number, got '" + v + "'");
  }
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_num(key, v);
  if (d != std::floor(d) || std::abs(d) > 2e9)
    throw Error(ErrorKind::invalid_parameter, key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& item : io::split(v, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

}  // namespace detail

/// Applies one key = value setting. Unknown keys are configuration errors.
inline void apply_setting(SimConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string& v = value;
  auto num = [&] { return parse_num(key, v); };
  auto integer = [&] { return parse_int(key, v); };
  auto flag = [&] { return parse_bool(key, v); };

  if (key == "m_v") c.geometry.m_v = integer();
  else if (key == "m_h") c.geometry.m_h = integer();
  else if (key == "delta") c.geometry.delta = num();
  else if (key == "n") c.n = integer();
  else if (key == "j_bits") c.j_bits = integer();
  else if (key == "payload_bits") c.payload_bits = integer();
  else if (key == "k_active") c.k_active = integer();
  else if (key == "snr_db") {
    c.snr_db.clear();
    for (const auto& s : parse_list(v)) c.snr_db.push_back(parse_num(key, s));
  } else if (key == "trials") c.trials = integer();
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(std::stoull(v));
  else if (key == "max_j_bits") c.max_j_bits = integer();
  else if (key == "fixed_codebook") c.fixed_codebook = flag();
  else if (key == "t_max") c.gamp.t_max = integer();
  else if (key == "t_mrf") c.gamp.t_mrf = integer();
  else if (key == "tau") c.gamp.tau = num();
  else if (key == "damping") c.gamp.damping = num();
  else if (key == "snr_hint") c.gamp.snr_hint = num();
  else if (key == "lambda_init") c.gamp.lambda_init = num();
  else if (key == "learn_sigma2") c.gamp.learn_sigma2 = flag();
  else if (key == "learn_lambda") c.gamp.learn_lambda = flag();
  else if (key == "fixed_rho") {
    if (v == "none" || v.empty()) c.gamp.fixed_rho.reset();
    else c.gamp.fixed_rho = num();
  } else if (key == "threshold_rule") {
    if (v == "null_level") c.gamp.threshold.rule = ThresholdRule::null_level;
    else if (v == "fixed_fraction") c.gamp.threshold.rule = ThresholdRule::fixed_fraction;
    else if (v == "fixed") c.gamp.threshold.rule = ThresholdRule::fixed;
    else throw Error(ErrorKind::invalid_parameter, "threshold_rule: unknown rule '" + v + "'");
  } else if (key == "threshold_c") c.gamp.threshold.c = num();
  else if (key == "threshold_fraction") c.gamp.threshold.fraction = num();
  else if (key == "threshold_value") c.gamp.threshold.value = num();
  else if (key == "threshold_floor") c.gamp.threshold.relative_floor = num();
  else if (key == "alpha") c.gamp.mrf.alpha = num();
  else if (key == "beta") c.gamp.mrf.beta = num();
  else if (key == "mrf_warm_start") c.gamp.mrf_warm_start = flag();
  else if (key == "t_c") c.clustering.t_c = integer();
  else if (key == "zeta") c.clustering.zeta = num();
  else if (key == "cluster_init") {
    if (v == "first_full_slot") c.clustering.init = CentroidInit::first_full_slot;
    else if (v == "random_full_slot") c.clustering.init = CentroidInit::random_full_slot;
    else throw Error(ErrorKind::invalid_parameter, "cluster_init: unknown rule '" + v + "'");
  } else if (key == "channel_model") {
    if (v == "scatterer") c.channel_mode = ChannelMode::scatterer;
    else if (v == "planted") c.channel_mode = ChannelMode::planted;
    else throw Error(ErrorKind::invalid_parameter, "channel_model: unknown model '" + v + "'");
  } else if (key == "scatterers") c.scatterers = integer();
  else if (key == "scatterer_scope") {
    if (v == "per_user") c.scatterer_scope = ScattererScope::per_user;
    else if (v == "shared") c.scatterer_scope = ScattererScope::shared;
    else throw Error(ErrorKind::invalid_parameter, "scatterer_scope: unknown scope '" + v + "'");
  } else if (key == "elevation_spread_deg") c.scatterer.elevation_spread_deg = num();
  else if (key == "azimuth_spread_deg") c.scatterer.azimuth_spread_deg = num();
  else if (key == "random_scatterer_power") c.scatterer.random_power = flag();
  else if (key == "activation_p") c.channel.activation_probability = num();
  else if (key == "subpaths") c.channel.subpaths_per_scatterer = integer();
  else if (key == "spread_shape") {
    if (v == "laplacian") c.channel.shape = SpreadShape::laplacian;
    else if (v == "gaussian") c.channel.shape = SpreadShape::gaussian;
    else throw Error(ErrorKind::invalid_parameter, "spread_shape: unknown shape '" + v + "'");
  } else if (key == "large_scale_fading") c.large_scale_fading = flag();
  else if (key == "planted_spread_bins") c.planted_spread_bins = num();
  else if (key == "planted_rays") c.planted_rays = integer();
  else if (key == "slot_perturbation") c.slot_perturbation = num();
  else if (key == "sweep_axis") {
    if (v == "snr_db") c.sweep_axis = SweepAxis::snr_db;
    else if (v == "n") c.sweep_axis = SweepAxis::n;
    else if (v == "m_list") c.sweep_axis = SweepAxis::m_list;
    else throw Error(ErrorKind::invalid_parameter, "sweep_axis: unknown axis '" + v + "'");
  } else if (key == "sweep_values") c.sweep_values = parse_list(v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "workers") c.workers = integer();
  else throw Error(ErrorKind::invalid_parameter, "unknown configuration key '" + key + "'");
}

/// "key=value" form of apply_setting.
inline void apply_assignment(SimConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw Error(ErrorKind::invalid_parameter, "expected key=value, got '" + assignment + "'");
  apply_setting(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Line-oriented `key = value` text; '#' starts a comment.
inline SimConfig parse_config(std::istream& in, SimConfig base = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(base, line);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return base;
}

inline SimConfig load_config(const std::filesystem::path& path, SimConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::invalid_parameter, "cannot read config file " + path.string());
  return parse_config(f, std::move(base));
}

inline std::map<std::string, std::string> snapshot(const SimConfig& c) {
  using io::fmt;
  std::map<std::string, std::string> m;
  m["m_v"] = std::to_string(c.geometry.m_v);
  m["m_h"] = std::to_string(c.geometry.m_h);
  m["delta"] = fmt(c.geometry.delta);
  m["n"] = std::to_string(c.n);
  m["j_bits"] = std::to_string(c.j_bits);
  m["payload_bits"] = std::to_string(c.payload_bits);
  m["k_active"] = std::to_string(c.k_active);
  std::vector<std::string> snr;
  for (double s : c.snr_db) snr.push_back(fmt(s));
  m["snr_db"] = detail::join(snr);
  m["trials"] = std::to_string(c.trials);
  m["seed"] = std::to_string(c.seed);
  m["max_j_bits"] = std::to_string(c.max_j_bits);
  m["fixed_codebook"] = c.fixed_codebook ? "true" : "false";
  m["t_max"] = std::to_string(c.gamp.t_max);
  m["t_mrf"] = std::to_string(c.gamp.t_mrf);
  m["tau"] = fmt(c.gamp.tau);
  m["damping"] = fmt(c.gamp.damping);
  m["snr_hint"] = fmt(c.gamp.snr_hint);
  m["lambda_init"] = fmt(c.gamp.lambda_init);
  m["learn_sigma2"] = c.gamp.learn_sigma2 ? "true" : "false";
  m["learn_lambda"] = c.gamp.learn_lambda ? "true" : "false";
  m["fixed_rho"] = c.gamp.fixed_rho ? fmt(*c.gamp.fixed_rho) : "none";
  const char* rules[] = {"null_level", "fixed_fraction", "fixed"};
  m["threshold_rule"] = rules[static_cast<int>(c.gamp.threshold.rule)];
  m["threshold_c"] = fmt(c.gamp.threshold.c);
  m["threshold_fraction"] = fmt(c.gamp.threshold.fraction);
  m["threshold_value"] = fmt(c.gamp.threshold.value);
  m["threshold_floor"] = fmt(c.gamp.threshold.relative_floor);
  m["alpha"] = fmt(c.gamp.mrf.alpha);
  m["beta"] = fmt(c.gamp.mrf.beta);
  m["mrf_warm_start"] = c.gamp.mrf_warm_start ? "true" : "false";
  m["t_c"] = std::to_string(c.clustering.t_c);
  m["zeta"] = fmt(c.clustering.zeta);
  m["cluster_init"] = c.clustering.init == CentroidInit::first_full_slot ? "first_full_slot" : "random_full_slot";
  m["channel_model"] = c.channel_mode == ChannelMode::scatterer ? "scatterer" : "planted";
  m["scatterers"] = std::to_string(c.scatterers);
  m["scatterer_scope"] = c.scatterer_scope == ScattererScope::per_user ? "per_user" : "shared";
  m["elevation_spread_deg"] = fmt(c.scatterer.elevation_spread_deg);
  m["azimuth_spread_deg"] = fmt(c.scatterer.azimuth_spread_deg);
  m["random_scatterer_power"] = c.scatterer.random_power ? "true" : "false";
  m["activation_p"] = fmt(c.channel.activation_probability);
  m["subpaths"] = std::to_string(c.channel.subpaths_per_scatterer);
  m["spread_shape"] = c.channel.shape == SpreadShape::laplacian ? "laplacian" : "gaussian";
  m["large_scale_fading"] = c.large_scale_fading ? "true" : "false";
  m["planted_spread_bins"] = fmt(c.planted_spread_bins);
  m["planted_rays"] = std::to_string(c.planted_rays);
  m["slot_perturbation"] = fmt(c.slot_perturbation);
  const char* axes[] = {"snr_db", "n", "m_list"};
  m["sweep_axis"] = axes[static_cast<int>(c.sweep_axis)];
  m["sweep_values"] = detail::join(c.sweep_values);
  return m;
}

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(i) for i in [0, count) on `workers` threads. Results must be written
/// by index; the first exception (lowest index) is rethrown after all tasks end.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), count);
  std::vector<std::exception_ptr> errors(count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// One trial

enum SeedStream : std::uint64_t {
  kCodebookStream = 1,
  kMessageStream = 2,
  kChannelStream = 3,
  kNoiseStream = 4,
  kPerturbStream = 5,
  kClusterStream = 6,
};

/// Everything a trial produced, beyond the summary record.
struct TrialArtifacts {
  SlotCodebook codebook;
  MessageSet messages;
  std::vector<UserChannel> channels;
  std::vector<SlotObservation> observations;
  std::vector<DetectionResult> detections;
  SlotChannels slot_channels;
  ClusterState clusters;
  StitchedMessages stitched;
};

struct TrialOptions {
  int slot_workers = 1;
  TrialArtifacts* artifacts = nullptr;
  // Per-slot estimator trace, called from the slot's worker.
  std::function<void(int slot, const IterationTrace&)> trace;
};

inline std::vector<UserChannel> draw_user_channels(const SimConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kChannelStream));
  std::vector<UserChannel> out;
  out.reserve(static_cast<std::size_t>(cfg.k_active));
  std::vector<double> lsg(static_cast<std::size_t>(cfg.k_active), 1.0);
  if (cfg.large_scale_fading) lsg = draw_large_scale_gains(cfg.k_active, rng);

  if (cfg.channel_mode == ChannelMode::planted) {
    // Distinct anchor beams while they last, then a fresh permutation.
    const int m = cfg.geometry.antennas();
    std::vector<int> beams;
    for (int k = 0; k < cfg.k_active; ++k) {
      if (beams.empty()) {
        beams.resize(static_cast<std::size_t>(m));
        std::iota(beams.begin(), beams.end(), 0);
        std::shuffle(beams.begin(), beams.end(), rng);
      }
      const int b = beams.back();
      beams.pop_back();
      const PeakIndex anchor{b % cfg.geometry.m_v + 1, b / cfg.geometry.m_v + 1};
      out.push_back(planted_user_channel(anchor, cfg.geometry, rng, cfg.planted_rays, cfg.planted_spread_bins,
                                         lsg[static_cast<std::size_t>(k)]));
    }
    return out;
  }

  std::vector<Scatterer> shared;
  if (cfg.scatterer_scope == ScattererScope::shared) shared = generate_scatterers(cfg.scatterers, rng, cfg.scatterer);
  for (int k = 0; k < cfg.k_active; ++k) {
    const auto sc =
        cfg.scatterer_scope == ScattererScope::shared ? shared : generate_scatterers(cfg.scatterers, rng, cfg.scatterer);
    ChannelOptions opt = cfg.channel;
    opt.large_scale_gain = lsg[static_cast<std::size_t>(k)];
    out.push_back(synthesize_user_channel(sc, cfg.geometry, rng, opt));
  }
  return out;
}

/// Decodes one frame carrying the given messages over the given channels at
/// `snr_db` (+inf for a noiseless channel). Codebook and noise come from `seed`.
inline TrialRecord run_frame(const SimConfig& cfg, std::uint64_t seed, double snr_db, const MessageSet& messages,
                             const std::vector<UserChannel>& channels, const TrialOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  require(static_cast<int>(messages.payloads.size()) == cfg.k_active &&
              static_cast<int>(channels.size()) == cfg.k_active,
          ErrorKind::invalid_dimension, "frame needs k_active messages and channels");
  require(messages.payload_bits == cfg.payload_bits && messages.j_bits == cfg.j_bits, ErrorKind::invalid_parameter,
          "message set does not match payload_bits / j_bits");
  TrialRecord rec;
  rec.config = snapshot(cfg);
  rec.config["snr_db"] = io::fmt(snr_db);
  rec.seed = seed;
  rec.k_active = cfg.k_active;
  rec.spectral_efficiency = cfg.spectral_efficiency();

  const int slots = cfg.slots();
  const int m = cfg.geometry.antennas();
  const std::uint64_t cb_seed =
      cfg.fixed_codebook ? derive_seed(cfg.seed, kCodebookStream) : derive_seed(seed, kCodebookStream);
  const SlotCodebook cb = build_codebook(cfg.n, cfg.j_bits, cb_seed, cfg.max_j_bits);
  const SensingOperator op(cb);

  std::vector<SlotObservation> observations(static_cast<std::size_t>(slots));
  std::vector<EstimatorOutput> outputs(static_cast<std::size_t>(slots));
  parallel_for(static_cast<std::size_t>(slots), opt.slot_workers, [&](std::size_t s) {
    std::mt19937_64 perturb(derive_seed(seed, kPerturbStream, s));
    std::vector<ActiveTransmission> tx;
    tx.reserve(static_cast<std::size_t>(cfg.k_active));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < cfg.k_active; ++k) {
      ComplexVector h = channels[static_cast<std::size_t>(k)].angular;
      if (cfg.slot_perturbation > 0.0) {
        const double scale = cfg.slot_perturbation * h.norm() / std::sqrt(2.0 * m);
        for (Index i = 0; i < h.size(); ++i) h[i] += scale * cplx(gauss(perturb), gauss(perturb));
      }
      tx.push_back({messages.codeword_idx[static_cast<std::size_t>(k)][s], std::move(h)});
    }
    ComplexMatrix x = ComplexMatrix::Zero(cb.codewords(), m);
    for (const auto& t : tx) x.row(t.codeword - 1) += t.angular_channel.transpose();
    const double sigma2 = std::isinf(snr_db) && snr_db > 0 ? 0.0
                                                          : noise_variance_for_snr(x.squaredNorm(), cfg.n, m, snr_db);
    std::mt19937_64 noise(derive_seed(seed, kNoiseStream, s));
    observations[s] = synthesize_slot(cb, tx, sigma2, noise, m);
    TraceCallback trace;
    if (opt.trace) trace = [&, s](const IterationTrace& it) { opt.trace(static_cast<int>(s), it); };
    try {
      outputs[s] = run_estimator(observations[s].real_received, op, cfg.geometry, cfg.gamp, trace,
                                 &observations[s].complex_signal);
    } catch (const Error& e) {
      throw Error(e.kind(), "slot " + std::to_string(s + 1) + ": " + e.message());
    }
  });

  std::vector<ComplexMatrix> estimates;
  std::vector<std::vector<int>> active_sets;
  Accumulator nmse_acc;
  for (int s = 0; s < slots; ++s) {
    const auto& d = outputs[static_cast<std::size_t>(s)].detection;
    rec.gamp_iterations += outputs[static_cast<std::size_t>(s)].iterations;
    double v = std::numeric_limits<double>::quiet_NaN();
    if (!d.active_set.empty()) {
      try {
        v = nmse(observations[static_cast<std::size_t>(s)].complex_signal, d.estimate, d.active_set);
      } catch (const Error&) {
      }
    }
    rec.nmse_db.push_back(v);
    nmse_acc.add(v);
    estimates.push_back(d.estimate);
    active_sets.push_back(d.active_set);
  }
  rec.nmse_db_mean = nmse_acc.mean();

  SlotChannels data = collect_slot_channels(estimates, active_sets);
  ClusterState clusters;
  StitchedMessages stitched;
  if (data.max_detected() > 0) {
    ClusteringConfig ccfg = cfg.clustering;
    ccfg.seed = derive_seed(seed, kClusterStream);
    clusters = run_clustering(data, ccfg);
    rec.k_detected = clusters.groups();
    rec.cluster_rounds = clusters.round;
    // Groups left without a member in some slot cannot form a message.
    Partition complete;
    for (auto& g : partition_of(clusters))
      if (std::none_of(g.begin(), g.end(), [](int k) { return k < 0; })) complete.push_back(std::move(g));
    stitched = stitch_messages(complete, data, cfg.j_bits, cfg.payload_bits);
  }
  rec.recovered = static_cast<int>(stitched.payloads.size());
  const ErrorRates rates = error_rates(messages.payloads, stitched.payloads);
  rec.p_md = rates.p_md;
  rec.p_fa = rates.p_fa;
  rec.p_e = rates.p_e;

  if (opt.artifacts) {
    auto& a = *opt.artifacts;
    a.codebook = cb;
    a.messages = messages;
    a.channels = channels;
    a.observations = observations;
    a.detections.clear();
    for (const auto& o : outputs) a.detections.push_back(o.detection);
    a.slot_channels = std::move(data);
    a.clusters = std::move(clusters);
    a.stitched = std::move(stitched);
  }
  rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// One Monte-Carlo frame at `snr_db`. Deterministic in (cfg, seed, snr_db).
inline TrialRecord run_trial(const SimConfig& cfg, std::uint64_t seed, double snr_db,
                             const TrialOptions& opt = {}) {
  cfg.validate();
  std::mt19937_64 msg_rng(derive_seed(seed, kMessageStream));
  const MessageSet messages = draw_messages(cfg.k_active, cfg.payload_bits, cfg.j_bits, msg_rng);
  return run_frame(cfg, seed, snr_db, messages, draw_user_channels(cfg, seed), opt);
}

inline TrialRecord run_trial(const SimConfig& cfg, std::uint64_t seed, const TrialOptions& opt = {}) {
  return run_trial(cfg, seed, cfg.snr_db.front(), opt);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  std::string axis_value;
  std::size_t ok = 0;
  std::size_t failed = 0;
  Accumulator p_md, p_fa, p_e, nmse_db, runtime_ms;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<TrialRecord> records;  // grouped by point, then trial
  std::size_t resumed = 0;
  bool any_failed = false;
};

/// Configuration for one axis point.
inline SimConfig sweep_point_config(const SimConfig& base, const std::string& value) {
  SimConfig c = base;
  switch (base.sweep_axis) {
    case SweepAxis::snr_db: apply_setting(c, "snr_db", value); break;
    case SweepAxis::n: apply_setting(c, "n", value); break;
    case SweepAxis::m_list: {
      const auto x = value.find('x');
      if (x == std::string::npos) throw Error(ErrorKind::invalid_parameter, "m_list values look like 4x25");
      apply_setting(c, "m_v", value.substr(0, x));
      apply_setting(c, "m_h", value.substr(x + 1));
      break;
    }
  }
  c.validate();
  return c;
}

inline std::vector<std::string> sweep_axis_values(const SimConfig& cfg) {
  if (!cfg.sweep_values.empty()) return cfg.sweep_values;
  if (cfg.sweep_axis == SweepAxis::snr_db) {
    std::vector<std::string> v;
    for (double s : cfg.snr_db) v.push_back(io::fmt(s));
    return v;
  }
  throw Error(ErrorKind::invalid_parameter, "sweep_values is required for this axis");
}

/// Seeds are shared across axis points (common random numbers), so trends are
/// measured on the same frames. Completed (point, trial) pairs found in
/// `records.jsonl` under `out_dir` are reused instead of re-run.
inline SweepResult run_sweep(const SimConfig& cfg, const std::filesystem::path& out_dir, int workers = 1,
                             const std::function<void(const TrialRecord&)>& on_record = {}) {
  cfg.validate();
  const auto values = sweep_axis_values(cfg);
  require(!values.empty(), ErrorKind::invalid_parameter, "sweep needs at least one axis value");
  std::vector<SimConfig> point_cfg;
  for (const auto& v : values) point_cfg.push_back(sweep_point_config(cfg, v));

  std::filesystem::create_directories(out_dir);
  const auto jsonl = out_dir / "records.jsonl";
  std::map<std::pair<std::string, int>, TrialRecord> done;
  {
    std::ifstream in(jsonl);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        TrialRecord r = io::trial_from_json(nlohmann::json::parse(line));
        done[{r.config.at("sweep.value"), std::stoi(r.config.at("sweep.trial"))}] = std::move(r);
      } catch (const std::exception&) {
        // A torn last line from an interrupted run is simply re-done.
      }
    }
  }

  struct Task {
    std::size_t point;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < values.size(); ++p)
    for (int t = 0; t < cfg.trials; ++t) tasks.push_back({p, t});

  SweepResult result;
  std::vector<TrialRecord> records(tasks.size());
  std::mutex out_mutex;
  std::ofstream out = io::open_out(jsonl, std::ios::app);
  const char* axis_names[] = {"snr_db", "n", "m_list"};
  parallel_for(tasks.size(), workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::string& value = values[task.point];
    auto it = done.find({value, task.trial});
    if (it != done.end()) {
      records[i] = it->second;
      std::lock_guard<std::mutex> lock(out_mutex);
      ++result.resumed;
      return;
    }
    const SimConfig& c = point_cfg[task.point];
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(task.trial));
    TrialRecord r;
    try {
      r = run_trial(c, seed, c.snr_db.front());
    } catch (const std::exception& e) {
      r = TrialRecord{};
      r.config = snapshot(c);
      r.seed = seed;
      r.k_active = c.k_active;
      r.spectral_efficiency = c.spectral_efficiency();
      r.p_md = r.p_fa = r.p_e = std::numeric_limits<double>::quiet_NaN();
      // Error::what() already leads with its kind.
      r.status = std::string("error:") + (dynamic_cast<const Error*>(&e) ? "" : "exception: ") + e.what();
    }
    r.config["sweep.axis"] = axis_names[static_cast<int>(cfg.sweep_axis)];
    r.config["sweep.value"] = value;
    r.config["sweep.trial"] = std::to_string(task.trial);
    records[i] = r;
    std::lock_guard<std::mutex> lock(out_mutex);
    out << io::to_json(r).dump() << '\n';
    out.flush();
    if (on_record) on_record(r);
  });
  out.close();

  for (std::size_t p = 0; p < values.size(); ++p) {
    SweepPoint sp;
    sp.axis_value = values[p];
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].point != p) continue;
      const TrialRecord& r = records[i];
      if (r.status != "ok") {
        ++sp.failed;
        result.any_failed = true;
        continue;
      }
      ++sp.ok;
      sp.p_md.add(r.p_md);
      sp.p_fa.add(r.p_fa);
      sp.p_e.add(r.p_e);
      sp.nmse_db.add(r.nmse_db_mean);
      sp.runtime_ms.add(r.runtime_ms);
    }
    result.points.push_back(std::move(sp));
  }
  result.records = std::move(records);

  using io::fmt;
  io::write_atomically(out_dir / "summary.csv", [&](std::ostream& f) {
    f << "axis,value,trials_ok,trials_failed,p_md_mean,p_md_se,p_fa_mean,p_fa_se,p_e_mean,p_e_se,nmse_db_mean,"
         "nmse_db_se,runtime_ms_mean\n";
    for (const auto& sp : result.points)
      f << axis_names[static_cast<int>(cfg.sweep_axis)] << ',' << sp.axis_value << ',' << sp.ok << ',' << sp.failed
        << ',' << fmt(sp.p_md.mean()) << ',' << fmt(sp.p_md.standard_error()) << ',' << fmt(sp.p_fa.mean()) << ','
        << fmt(sp.p_fa.standard_error()) << ',' << fmt(sp.p_e.mean()) << ',' << fmt(sp.p_e.standard_error()) << ','
        << fmt(sp.nmse_db.mean()) << ',' << fmt(sp.nmse_db.standard_error()) << ',' << fmt(sp.runtime_ms.mean())
        << '\n';
  });
  io::write_atomically(out_dir / "summary.json", [&](std::ostream& f) {
    nlohmann::json j;
    j["schema"] = "ura.sweep/1";
    j["config"] = snapshot(cfg);
    j["axis"] = axis_names[static_cast<int>(cfg.sweep_axis)];
    j["spectral_efficiency"] = cfg.spectral_efficiency();
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& sp : result.points) {
      nlohmann::json q;
      q["value"] = sp.axis_value;
      q["trials_ok"] = sp.ok;
      q["trials_failed"] = sp.failed;
      q["p_md"] = {{"mean", io::number(sp.p_md.mean())}, {"se", io::number(sp.p_md.standard_error())}};
      q["p_fa"] = {{"mean", io::number(sp.p_fa.mean())}, {"se", io::number(sp.p_fa.standard_error())}};
      q["p_e"] = {{"mean", io::number(sp.p_e.mean())}, {"se", io::number(sp.p_e.standard_error())}};
      q["nmse_db"] = {{"mean", io::number(sp.nmse_db.mean())}, {"se", io::number(sp.nmse_db.standard_error())}};
      pts.push_back(q);
    }
    j["points"] = pts;
    f << j.dump(2) << '\n';
  });
  io::write_atomically(out_dir / "trials.csv", [&](std::ostream& f) {
    io::write_trial_csv_header(f);
    for (const auto& r : result.records) io::write_trial_csv_row(f, r);
  });
  return result;
}

}  // namespace ura
