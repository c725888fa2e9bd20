// SPDX-License-Identifier: Apache-2.0
//
// Text and binary dumps. Floats are written in shortest round-trip form, so a
// dump read back reproduces the in-memory values bit for bit.
#pragma once

#include "ura/channel_model.hpp"
#include "ura/clustering.hpp"
#include "ura/codec.hpp"
#include "ura/common.hpp"
#include "ura/gamp.hpp"
#include "ura/metrics.hpp"
#include "ura/mrf.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace ura::io {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(ErrorKind::io, "cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode = std::ios::out) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, mode);
  if (!f) throw Error(ErrorKind::io, "cannot open " + p.string() + " for writing");
  return f;
}

/// Writes through a temporary sibling and renames it into place.
template <class Writer>
void write_atomically(const std::filesystem::path& p, Writer&& w) {
  const auto tmp = std::filesystem::path(p.string() + ".tmp");
  {
    auto f = open_out(tmp);
    w(f);
    f.flush();
    if (!f) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Channels: user,record,index,a,b with record in {spatial, angular, ray_angle, ray_gain}

inline void write_channels_csv(std::ostream& out, const std::vector<UserChannel>& users) {
  out << "user,record,index,a,b\n";
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    for (Index i = 0; i < u.spatial.size(); ++i)
      out << k << ",spatial," << i << ',' << fmt(u.spatial[i].real()) << ',' << fmt(u.spatial[i].imag()) << '\n';
    for (Index i = 0; i < u.angular.size(); ++i)
      out << k << ",angular," << i << ',' << fmt(u.angular[i].real()) << ',' << fmt(u.angular[i].imag()) << '\n';
    for (std::size_t l = 0; l < u.path_angles.size(); ++l) {
      out << k << ",ray_angle," << l << ',' << fmt(u.path_angles[l].elevation) << ','
          << fmt(u.path_angles[l].azimuth) << '\n';
      const cplx g = u.path_gains[static_cast<Index>(l)];
      out << k << ",ray_gain," << l << ',' << fmt(g.real()) << ',' << fmt(g.imag()) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Observations (decoder-only regression inputs)

struct ObservationDump {
  RealMatrix real_received;
  std::uint64_t codebook_seed = 0;
  int n = 0;
  int j_bits = 0;
  double noise_variance = 0.0;
  std::vector<int> active_index_set;
};

inline ObservationDump make_dump(const SlotObservation& obs, const SlotCodebook& cb) {
  return {obs.real_received, obs.codebook_seed, cb.n, cb.j_bits, obs.noise_variance, obs.active_index_set};
}

inline void write_observation_csv(std::ostream& out, const ObservationDump& d) {
  out << "# codebook_seed=" << d.codebook_seed << " n=" << d.n << " j_bits=" << d.j_bits
      << " sigma2=" << fmt(d.noise_variance) << " active=";
  for (std::size_t i = 0; i < d.active_index_set.size(); ++i) out << (i ? ";" : "") << d.active_index_set[i];
  out << '\n';
  for (Index r = 0; r < d.real_received.rows(); ++r) {
    for (Index c = 0; c < d.real_received.cols(); ++c) out << (c ? "," : "") << fmt(d.real_received(r, c));
    out << '\n';
  }
}

inline ObservationDump read_observation_csv(std::istream& in) {
  ObservationDump d;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Error(ErrorKind::io, "observation header missing");
  for (const auto& tok : split(line.substr(2), ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "codebook_seed") d.codebook_seed = std::stoull(val);
    else if (key == "n") d.n = std::stoi(val);
    else if (key == "j_bits") d.j_bits = std::stoi(val);
    else if (key == "sigma2") d.noise_variance = parse_double(val);
    else if (key == "active" && !val.empty())
      for (const auto& v : split(val, ';')) d.active_index_set.push_back(std::stoi(v));
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& v : split(line, ',')) r.push_back(parse_double(v));
    if (!rows.empty() && r.size() != rows.front().size()) throw Error(ErrorKind::io, "ragged observation rows");
    rows.push_back(std::move(r));
  }
  d.real_received.resize(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      d.real_received(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return d;
}

namespace detail {

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorKind::io, "truncated binary dump");
  return v;
}

inline constexpr char kObsMagic[8] = {'U', 'R', 'A', 'O', 'B', 'S', '0', '1'};
inline constexpr char kKappaMagic[8] = {'U', 'R', 'A', 'K', 'A', 'P', '0', '1'};

}  // namespace detail

/// Little-endian layout: magic[8], u64 seed, i32 n, i32 j_bits, f64 sigma2,
/// i64 rows, i64 cols, u64 |active|, i32 active[], f64 data[] (column-major).
inline void write_observation_binary(std::ostream& out, const ObservationDump& d) {
  out.write(detail::kObsMagic, 8);
  detail::put(out, d.codebook_seed);
  detail::put(out, static_cast<std::int32_t>(d.n));
  detail::put(out, static_cast<std::int32_t>(d.j_bits));
  detail::put(out, d.noise_variance);
  detail::put(out, static_cast<std::int64_t>(d.real_received.rows()));
  detail::put(out, static_cast<std::int64_t>(d.real_received.cols()));
  detail::put(out, static_cast<std::uint64_t>(d.active_index_set.size()));
  for (int a : d.active_index_set) detail::put(out, static_cast<std::int32_t>(a));
  out.write(reinterpret_cast<const char*>(d.real_received.data()),
            static_cast<std::streamsize>(sizeof(double) * d.real_received.size()));
}

inline ObservationDump read_observation_binary(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, detail::kObsMagic)) throw Error(ErrorKind::io, "not an observation dump");
  ObservationDump d;
  d.codebook_seed = detail::get<std::uint64_t>(in);
  d.n = detail::get<std::int32_t>(in);
  d.j_bits = detail::get<std::int32_t>(in);
  d.noise_variance = detail::get<double>(in);
  const auto rows = detail::get<std::int64_t>(in);
  const auto cols = detail::get<std::int64_t>(in);
  const auto count = detail::get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) d.active_index_set.push_back(detail::get<std::int32_t>(in));
  d.real_received.resize(rows, cols);
  in.read(reinterpret_cast<char*>(d.real_received.data()), static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw Error(ErrorKind::io, "truncated observation dump");
  return d;
}

// ---------------------------------------------------------------------------
// Estimator trace and MRF message field

inline void write_trace_header(std::ostream& out) {
  out << "iteration,nmse_db,sigma2,lambda,residual_norm,relative_change\n";
}

inline void write_trace_row(std::ostream& out, const IterationTrace& t) {
  out << t.iteration << ',' << fmt(t.nmse_db) << ',' << fmt(t.sigma2) << ',' << fmt(t.lambda) << ','
      << fmt(t.residual_norm) << ',' << fmt(t.relative_change) << '\n';
}

/// Header: magic[8], i64 rows, i64 antennas. Each record: i32 round, then κ for
/// directions l, r, t, b as rows × antennas column-major doubles.
inline void write_kappa_header(std::ostream& out, Index rows, Index antennas) {
  out.write(detail::kKappaMagic, 8);
  detail::put(out, static_cast<std::int64_t>(rows));
  detail::put(out, static_cast<std::int64_t>(antennas));
}

inline void write_kappa_round(std::ostream& out, int round, const MrfBeliefs& b) {
  detail::put(out, static_cast<std::int32_t>(round));
  for (Direction d : kDirections) {
    const RealMatrix k = b.log_odds[d].unaryExpr([](double l) { return special::logistic(l); });
    out.write(reinterpret_cast<const char*>(k.data()), static_cast<std::streamsize>(sizeof(double) * k.size()));
  }
}

// ---------------------------------------------------------------------------
// Partition forensics

inline void write_partition_csv(std::ostream& out, const ClusterState& st, const SlotChannels& data) {
  out << "group,slot,codeword,distance\n";
  for (std::size_t s = 0; s < st.assignments.size(); ++s) {
    const auto& a = st.assignments[s];
    for (int g = 0; g < st.groups(); ++g) {
      const int k = a.channel_of_group[static_cast<std::size_t>(g)];
      if (k < 0) continue;
      const double dist = (data.magnitudes[s].row(k) - st.centroids.row(g)).norm();
      out << g + 1 << ',' << s + 1 << ',' << data.codewords[s][static_cast<std::size_t>(k)] << ',' << fmt(dist)
          << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// TrialRecord

inline const std::vector<std::string>& trial_columns() {
  static const std::vector<std::string> cols{
      "sweep_value", "seed", "nmse_db_mean", "p_md",      "p_fa",           "p_e",           "k_active",   "k_detected",
      "recovered", "gamp_iterations", "cluster_rounds", "spectral_efficiency", "status", "runtime_ms", "nmse_db"};
  return cols;
}

inline void write_trial_csv_header(std::ostream& out) {
  out << "# schema=ura.trial/" << kTrialSchemaVersion << '\n';
  const auto& cols = trial_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_trial_csv_row(std::ostream& out, const TrialRecord& r) {
  const auto sv = r.config.find("sweep.value");
  out << (sv == r.config.end() ? std::string() : csv_escape(sv->second)) << ',' << r.seed << ',' << fmt(r.nmse_db_mean) << ',' << fmt(r.p_md) << ',' << fmt(r.p_fa) << ',' << fmt(r.p_e)
      << ',' << r.k_active << ',' << r.k_detected << ',' << r.recovered << ',' << r.gamp_iterations << ','
      << r.cluster_rounds << ',' << fmt(r.spectral_efficiency) << ',' << csv_escape(r.status) << ','
      << fmt(r.runtime_ms) << ',';
  for (std::size_t i = 0; i < r.nmse_db.size(); ++i) out << (i ? ";" : "") << fmt(r.nmse_db[i]);
  out << '\n';
}

/// JSON numbers cannot carry NaN/inf; those go out as strings.
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline nlohmann::json to_json(const TrialRecord& r) {
  nlohmann::json j;
  j["schema"] = "ura.trial/" + std::to_string(kTrialSchemaVersion);
  j["config"] = r.config;
  j["seed"] = r.seed;
  nlohmann::json per_slot = nlohmann::json::array();
  for (double v : r.nmse_db) per_slot.push_back(number(v));
  j["nmse_db"] = per_slot;
  j["nmse_db_mean"] = number(r.nmse_db_mean);
  j["p_md"] = number(r.p_md);
  j["p_fa"] = number(r.p_fa);
  j["p_e"] = number(r.p_e);
  j["k_active"] = r.k_active;
  j["k_detected"] = r.k_detected;
  j["recovered"] = r.recovered;
  j["gamp_iterations"] = r.gamp_iterations;
  j["cluster_rounds"] = r.cluster_rounds;
  j["spectral_efficiency"] = number(r.spectral_efficiency);
  j["status"] = r.status;
  j["runtime_ms"] = number(r.runtime_ms);
  return j;
}

inline double json_number(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

inline TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.config = j.at("config").get<std::map<std::string, std::string>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& v : j.at("nmse_db")) r.nmse_db.push_back(json_number(v));
  r.nmse_db_mean = json_number(j.at("nmse_db_mean"));
  r.p_md = json_number(j.at("p_md"));
  r.p_fa = json_number(j.at("p_fa"));
  r.p_e = json_number(j.at("p_e"));
  r.k_active = j.at("k_active").get<int>();
  r.k_detected = j.at("k_detected").get<int>();
  r.recovered = j.at("recovered").get<int>();
  r.gamp_iterations = j.at("gamp_iterations").get<int>();
  r.cluster_rounds = j.at("cluster_rounds").get<int>();
  r.spectral_efficiency = json_number(j.at("spectral_efficiency"));
  r.status = j.at("status").get<std::string>();
  r.runtime_ms = json_number(j.at("runtime_ms"));
  return r;
}

}  // namespace ura::io
