#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "c3t/bounds.hpp"
#include "c3t/codec.hpp"
#include "c3t/curve.hpp"
#include "c3t/errors.hpp"
#include "c3t/mlp.hpp"
#include "c3t/parallel.hpp"
#include "c3t/profile.hpp"
#include "c3t/rng.hpp"
#include "c3t/spsa.hpp"
#include "c3t/tube.hpp"

namespace c3t {

enum class DecoderKind { RawMAP, TP_MAP, AO_MAP, MLP_Raw, MLP_TP, MLP_AO, Repetition };

inline std::string to_string(DecoderKind d) {
  switch (d) {
    case DecoderKind::RawMAP: return "raw_map";
    case DecoderKind::TP_MAP: return "tp_map";
    case DecoderKind::AO_MAP: return "ao_map";
    case DecoderKind::MLP_Raw: return "mlp_raw";
    case DecoderKind::MLP_TP: return "mlp_tp";
    case DecoderKind::MLP_AO: return "mlp_ao";
    default: return "repetition";
  }
}

inline DecoderKind decoder_from_string(const std::string& s) {
  for (auto d : {DecoderKind::RawMAP, DecoderKind::TP_MAP, DecoderKind::AO_MAP, DecoderKind::MLP_Raw,
                 DecoderKind::MLP_TP, DecoderKind::MLP_AO, DecoderKind::Repetition}) {
    if (to_string(d) == s) return d;
  }
  throw ValidationError("unknown decoder '" + s + "'");
}

inline bool is_mlp(DecoderKind d) {
  return d == DecoderKind::MLP_Raw || d == DecoderKind::MLP_TP || d == DecoderKind::MLP_AO;
}

inline double sdr_db_from_mse(double mse) { return 10.0 * std::log10(kSourceVariance / mse); }

// ---------------------------------------------------------------- Monte Carlo

struct SimOptions {
  int grid_points = kDefaultGridPoints;
  unsigned workers = 0;
  /// Required for the MLP decoders.
  std::shared_ptr<const MlpModel> mlp;
};

inline constexpr std::size_t kTrialChunk = 1024;

/// Mean squared error of one (profile, decoder, channel) cell. Trial t draws
/// from its own generator seeded by (seed, t); chunk sums are reduced in
/// index order, so the value does not depend on the worker count.
inline double simulate_mse(const CodeProfile& profile, DecoderKind decoder, const ChannelSpec& spec,
                           long trials, std::uint64_t seed, const SimOptions& options = {}) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  std::function<double(std::span<const double>)> decode;
  std::optional<MapDecoder> map;
  std::optional<AnglesDecoder> angles;
  switch (decoder) {
    case DecoderKind::RawMAP:
      map.emplace(profile, options.grid_points);
      decode = [&](std::span<const double> y) { return map->decode(y); };
      break;
    case DecoderKind::TP_MAP:
      map.emplace(profile, options.grid_points);
      decode = [&](std::span<const double> y) { return map->decode(torus_projection(profile, y).data); };
      break;
    case DecoderKind::AO_MAP:
      angles.emplace(profile, spec.noise_var, options.grid_points);
      decode = [&](std::span<const double> y) { return angles->decode(angles_features(y).data); };
      break;
    case DecoderKind::Repetition:
      break;
    default: {
      if (!options.mlp) throw ValidationError(to_string(decoder) + " needs trained weights");
      const MlpModel& model = *options.mlp;
      decode = [&](std::span<const double> y) { return model.decode(profile, y); };
      break;
    }
  }

  const auto chunks = static_cast<std::size_t>((trials + static_cast<long>(kTrialChunk) - 1) /
                                               static_cast<long>(kTrialChunk));
  Vector sums(chunks, 0.0);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    const long begin = static_cast<long>(c * kTrialChunk);
    const long end = std::min(trials, begin + static_cast<long>(kTrialChunk));
    double acc = 0.0;
    for (long t = begin; t < end; ++t) {
      std::mt19937_64 gen(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      std::uniform_real_distribution<double> source(-1.0, 1.0);
      const double s = source(gen);
      double s_hat = 0.0;
      if (decoder == DecoderKind::Repetition) {
        s_hat = repetition_code(profile.n, s, spec, gen);
      } else {
        const Vector y = awgn_channel(encode(profile, s), spec, gen);
        s_hat = decode(y);
      }
      acc += (s_hat - s) * (s_hat - s);
    }
    sums[c] = acc;
  });
  double total = 0.0;
  for (double v : sums) total += v;
  return total / static_cast<double>(trials);
}

/// SDR in dB. The repetition decoder uses its own per-use power 1/n channel.
inline double simulate_sdr_db(const CodeProfile& profile, DecoderKind decoder, double snr_db, long trials,
                              std::uint64_t seed, const SimOptions& options = {}) {
  const ChannelSpec spec = decoder == DecoderKind::Repetition ? repetition_channel(profile.n, snr_db)
                                                              : ChannelSpec::for_profile(profile, snr_db);
  return sdr_db_from_mse(simulate_mse(profile, decoder, spec, trials, seed, options));
}

// ---------------------------------------------------------------- sweeps

struct SweepRecord {
  std::string profile_id;
  int n = 0;
  DecoderKind decoder = DecoderKind::RawMAP;
  double snr_db = 0.0;
  long trials = 0;
  double sdr_db = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  double opta_db = 0.0;
  double repetition_db = 0.0;
  std::string error;  ///< empty on success
};

struct ExperimentConfig {
  std::vector<std::string> profiles;
  std::vector<double> snr_grid_db = default_snr_grid();
  std::vector<DecoderKind> decoders{DecoderKind::RawMAP};
  long trials = 100000;
  std::uint64_t seed = 0;
  int grid_points = kDefaultGridPoints;
  unsigned workers = 0;
  /// Weights file per MLP decoder.
  std::map<std::string, std::string> mlp_weights;
  bool normalize_profiles = false;

  static std::vector<double> default_snr_grid() {
    std::vector<double> g;
    for (int s = -10; s <= 10; ++s) g.push_back(s);
    return g;
  }

  void validate() const {
    if (profiles.empty()) throw ValidationError("sweep needs at least one profile");
    if (snr_grid_db.empty()) throw ValidationError("sweep needs a nonempty SNR grid");
    if (decoders.empty()) throw ValidationError("sweep needs at least one decoder");
    if (trials < 1) throw ValidationError("trials must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> decoders;
  for (auto d : c.decoders) decoders.push_back(to_string(d));
  j = {{"profiles", c.profiles},         {"snr_grid_db", c.snr_grid_db}, {"decoders", decoders},
       {"trials", c.trials},             {"seed", c.seed},               {"grid_points", c.grid_points},
       {"mlp_weights", c.mlp_weights},   {"normalize_profiles", c.normalize_profiles}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  try {
    c.profiles = j.at("profiles").get<std::vector<std::string>>();
    if (j.contains("snr_grid_db")) c.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
    if (j.contains("decoders")) {
      c.decoders.clear();
      for (const auto& d : j.at("decoders")) c.decoders.push_back(decoder_from_string(d.get<std::string>()));
    }
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.grid_points = j.value("grid_points", c.grid_points);
    if (j.contains("mlp_weights")) c.mlp_weights = j.at("mlp_weights").get<std::map<std::string, std::string>>();
    c.normalize_profiles = j.value("normalize_profiles", c.normalize_profiles);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
}

/// Seed of one sweep cell, a function of its coordinates only.
inline std::uint64_t cell_seed(std::uint64_t base, std::size_t profile, DecoderKind decoder, std::size_t snr) {
  return derive_seed(base, {profile, static_cast<std::uint64_t>(decoder), snr});
}

/// Runs every (profile, decoder, SNR) cell in that order. Each finished record
/// is handed to `sink` before the next cell starts; failures become error rows.
inline std::vector<SweepRecord> run_sweep(const ExperimentConfig& config,
                                          const std::function<void(const SweepRecord&)>& sink = {}) {
  config.validate();
  std::vector<CodeProfile> profiles;
  for (const auto& path : config.profiles) profiles.push_back(load_profile(path, config.normalize_profiles));
  std::map<DecoderKind, std::shared_ptr<const MlpModel>> models;
  for (auto d : config.decoders) {
    if (!is_mlp(d)) continue;
    auto it = config.mlp_weights.find(to_string(d));
    if (it != config.mlp_weights.end()) models[d] = std::make_shared<MlpModel>(load_model(it->second));
  }

  std::vector<SweepRecord> records;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto& profile = profiles[p];
    for (auto decoder : config.decoders) {
      for (std::size_t k = 0; k < config.snr_grid_db.size(); ++k) {
        SweepRecord r;
        r.profile_id = config.profiles[p];
        r.n = profile.n;
        r.decoder = decoder;
        r.snr_db = config.snr_grid_db[k];
        r.trials = config.trials;
        r.seed = cell_seed(config.seed, p, decoder, k);
        const double snr = db_to_linear(r.snr_db);
        r.opta_db = linear_to_db(opta_sdr_bound(snr, profile.n));
        r.repetition_db = linear_to_db(repetition_sdr(snr, profile.n));
        try {
          SimOptions opts{config.grid_points, config.workers, nullptr};
          if (is_mlp(decoder)) {
            auto it = models.find(decoder);
            if (it == models.end()) throw ValidationError(to_string(decoder) + " has no weights file");
            opts.mlp = it->second;
          }
          r.sdr_db = simulate_sdr_db(profile, decoder, r.snr_db, config.trials, r.seed, opts);
          if (!std::isfinite(r.sdr_db)) throw GeometryError("non-finite SDR");
        } catch (const std::exception& e) {
          r.sdr_db = std::numeric_limits<double>::quiet_NaN();
          r.error = e.what();
        }
        if (sink) sink(r);
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

inline std::string sweep_csv_header() {
  return "profile_id,n,decoder,snr_db,trials,seed,sdr_db,opta_db,repetition_db,error";
}

inline std::string to_csv_row(const SweepRecord& r) {
  std::ostringstream out;
  out.precision(17);
  std::string err = r.error;
  std::replace(err.begin(), err.end(), ',', ';');
  std::replace(err.begin(), err.end(), '\n', ' ');
  out << r.profile_id << ',' << r.n << ',' << to_string(r.decoder) << ',' << r.snr_db << ',' << r.trials << ','
      << r.seed << ',' << r.sdr_db << ',' << r.opta_db << ',' << r.repetition_db << ',' << err;
  return out.str();
}

/// Appends records to a CSV, writing the header only for a new or empty file.
class SweepCsvSink {
 public:
  explicit SweepCsvSink(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw ValidationError("cannot open results file " + path);
    out_.seekp(0, std::ios::end);
    if (out_.tellp() == 0) out_ << sweep_csv_header() << '\n';
  }
  void operator()(const SweepRecord& r) {
    out_ << to_csv_row(r) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

/// Config plus every cell seed, enough to regenerate the CSV.
inline nlohmann::json sweep_sidecar(const ExperimentConfig& config, const std::vector<SweepRecord>& records) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& r : records) {
    cells.push_back({{"profile_id", r.profile_id}, {"decoder", to_string(r.decoder)}, {"snr_db", r.snr_db},
                     {"seed", r.seed}, {"ok", r.error.empty()}});
  }
  return {{"config", config}, {"cells", cells}, {"sdr_definition", "(1/3) / mean squared error"}};
}

// ---------------------------------------------------------------- tube geometry

struct GeometryPoint {
  std::string kind;  ///< "centerline" or "surface"
  double alpha = 0.0;
  Vector coords;
};

struct TubeGeometry {
  int n = 0;
  double rho_global = 0.0;
  std::vector<GeometryPoint> points;
};

/// Centerline and tube-surface samples. n=2: the two offset curves at +-rho
/// along the normal. n=3: normal-plane circles. n=4: the tube surface cut by
/// the hyperplane x4 = 0, reported in (x1, x2, x3).
inline TubeGeometry export_tube_geometry(const CodeProfile& profile, int samples, int ring = 64) {
  if (profile.n < 2 || profile.n > 4) throw DomainError("tube export supports n = 2, 3, 4");
  if (samples < 2 || ring < 3) throw DomainError("need at least 2 samples and 3 ring points");
  TubeGeometry g;
  g.n = profile.n;
  g.rho_global = global_circumradius(profile).rho_global;
  const double rho = g.rho_global;
  const double pi = std::numbers::pi;
  for (int k = 0; k < samples; ++k) {
    const double alpha = -pi + 2.0 * pi * k / samples;
    const Vector x = evaluate_curve(profile, alpha);
    g.points.push_back({"centerline", alpha, x});
    const auto frame = frenet_frame(profile, alpha, profile.n);
    const auto& e = frame.vectors;
    if (profile.n == 2) {
      for (double sign : {-1.0, 1.0}) {
        g.points.push_back({"surface", alpha, {x[0] + sign * rho * e[1][0], x[1] + sign * rho * e[1][1]}});
      }
    } else if (profile.n == 3) {
      for (int j = 0; j < ring; ++j) {
        const double phi = 2.0 * pi * j / ring;
        Vector p(3);
        for (int c = 0; c < 3; ++c) p[c] = x[c] + rho * (std::cos(phi) * e[1][c] + std::sin(phi) * e[2][c]);
        g.points.push_back({"surface", alpha, p});
      }
    } else {
      // u on the unit sphere of span(e2, e3, e4) with x4 + rho <u, p> = 0
      const Vector p{e[1][3], e[2][3], e[3][3]};
      const double pn = detail::norm(p);
      if (pn == 0.0 || std::abs(x[3]) > rho * pn) continue;
      const double c = -x[3] / (rho * pn);
      const Vector ph{p[0] / pn, p[1] / pn, p[2] / pn};
      // orthonormal a, b completing ph
      Vector a = std::abs(ph[0]) < 0.9 ? Vector{1, 0, 0} : Vector{0, 1, 0};
      const double d = detail::dot(a, ph);
      for (int i = 0; i < 3; ++i) a[i] -= d * ph[i];
      const double an = detail::norm(a);
      for (double& v : a) v /= an;
      const Vector b{ph[1] * a[2] - ph[2] * a[1], ph[2] * a[0] - ph[0] * a[2], ph[0] * a[1] - ph[1] * a[0]};
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      for (int j = 0; j < ring; ++j) {
        const double phi = 2.0 * pi * j / ring;
        Vector u(3);
        for (int i = 0; i < 3; ++i) u[i] = c * ph[i] + s * (std::cos(phi) * a[i] + std::sin(phi) * b[i]);
        Vector q(4);
        for (int cc = 0; cc < 4; ++cc) {
          q[cc] = x[cc] + rho * (u[0] * e[1][cc] + u[1] * e[2][cc] + u[2] * e[3][cc]);
        }
        g.points.push_back({"surface", alpha, {q[0], q[1], q[2]}});
      }
    }
  }
  return g;
}

inline void write_geometry_csv(const TubeGeometry& g, std::ostream& out) {
  out << "kind,alpha";
  for (int c = 0; c < g.n; ++c) out << ",x" << c + 1;
  out << '\n';
  out.precision(17);
  for (const auto& p : g.points) {
    out << p.kind << ',' << p.alpha;
    for (double v : p.coords) out << ',' << v;
    for (auto c = p.coords.size(); c < static_cast<std::size_t>(g.n); ++c) out << ',';
    out << '\n';
  }
}

// ---------------------------------------------------------------- table reproduction

struct ReportEntry {
  std::string group;  ///< "radii_optimization", "circumradius_oracle" or "digital_comparison"
  std::string item;
  double value = 0.0;
  double golden = 0.0;
  double tolerance = 0.0;
  std::string source;  ///< "published" or "derived"
  bool pass = false;
  /// Informational mismatch that does not count as a failure.
  bool flagged = false;
  std::string note;
};

struct TablesReport {
  std::vector<ReportEntry> entries;
  nlohmann::json optimized_profiles = nlohmann::json::object();

  bool all_passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass || e.flagged; });
  }
};

struct TablesOptions {
  std::vector<int> dimensions{4, 6, 8};
  int seeds = 10;
  SpsaConfig spsa = SpsaConfig::table_reproduction();
  unsigned workers = 0;
  bool include_optimization = true;
};

/// Best of `runs` seeded runs evaluated in parallel; ties go to the lower run index.
inline OptimizationResult optimize_radii_parallel(int n, const SpsaConfig& config, int runs, unsigned workers) {
  if (runs < 1) throw DomainError("need at least one SPSA run");
  std::vector<std::optional<OptimizationResult>> slots(static_cast<std::size_t>(runs));
  parallel_for(slots.size(), workers, [&](std::size_t s) {
    SpsaConfig c = config;
    c.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(s)});
    slots[s] = optimize_radii(n, c);
  });
  std::size_t best = 0;
  for (std::size_t s = 1; s < slots.size(); ++s) {
    if (slots[s]->objective > slots[best]->objective) best = s;
  }
  return std::move(*slots[best]);
}

struct DigitalRow {
  int n;
  double snr_db;
  double sdr_db;
  double rate;
  long ns_1e3;
  long ns_1e6;
};

inline const std::vector<DigitalRow>& published_digital_rows() {
  static const std::vector<DigitalRow> rows{
      {4, 0.5, 12, 0.748, 45, 108},  {4, 3.69, 18, 0.997, 138, 328}, {6, 3.0, 20, 0.720, 290, 686},
      {6, 4.98, 25, 0.859, 55, 132}, {6, 8.39, 30, 0.997, 6, 15},    {8, 3.57, 24, 0.623, 20, 49},
      {8, 5.95, 30, 0.748, 7, 17},   {20, 0.36, 24, 0.249, 4, 11},   {20, 2.89, 36, 0.349, 2, 5},
      {100, -5.45, 20, 0.043, 2, 4}};
  return rows;
}

struct PublishedRadiiRow {
  int n;
  Vector radii;
  double rho_global;
  double density;
};

inline const std::vector<PublishedRadiiRow>& published_radii_rows() {
  static const std::vector<PublishedRadiiRow> rows{
      {4, {0.8165, 0.5774}, 0.8339, 0.3783},
      {6, {0.5835, 0.6463, 0.4918}, 0.7614, 0.1122},
      {8, {0.5125, 0.5162, 0.5551, 0.4035}, 0.7541, 0.0293}};
  return rows;
}

inline ReportEntry make_entry(std::string group, std::string item, double value, double golden, double tol,
                              std::string source, std::string note = {}) {
  ReportEntry e{std::move(group), std::move(item), value, golden, tol, std::move(source), false, false,
                std::move(note)};
  e.pass = std::abs(value - golden) <= tol;
  return e;
}

/// Diff report of optimized radii, the circumradius oracle and the digital
/// block-length comparison against embedded golden values.
inline TablesReport reproduce_tables(const TablesOptions& options = {}) {
  TablesReport report;
  const auto& radii_rows = published_radii_rows();

  // Circumradius oracle at the printed n=4 radii.
  {
    const auto printed = CodeProfile::harmonic(4, radii_rows[0].radii).normalized();
    const auto m = tube_metrics(printed);
    report.entries.push_back(make_entry("circumradius_oracle", "n=4 rho_G at printed radii", m.rho_global,
                                        0.81650, 5e-4, "derived", "attained in the Delta -> 0 limit"));
    auto flag = make_entry("circumradius_oracle", "n=4 printed rho_G", m.rho_global, radii_rows[0].rho_global,
                           5e-4, "published");
    if (!flag.pass) {
      flag.flagged = true;
      const double d_oracle = packing_density(printed, m.rho_global);
      const double d_printed = packing_density(printed, radii_rows[0].rho_global);
      std::ostringstream note;
      note.precision(5);
      note << "printed density " << radii_rows[0].density << " matches rho=" << m.rho_global << " (density "
           << d_oracle << ") rather than rho=" << radii_rows[0].rho_global << " (density " << d_printed << ")";
      flag.note = note.str();
    }
    report.entries.push_back(std::move(flag));
  }

  if (options.include_optimization) {
    for (int n : options.dimensions) {
      const auto row = std::find_if(radii_rows.begin(), radii_rows.end(), [&](const auto& r) { return r.n == n; });
      const auto result = optimize_radii_parallel(n, options.spsa, options.seeds, options.workers);
      const auto metrics = tube_metrics(result.profile);
      report.optimized_profiles[std::to_string(n)] = {{"profile", result.profile},
                                                      {"objective", result.objective},
                                                      {"rho_global", metrics.rho_global},
                                                      {"density", metrics.density}};
      if (row == radii_rows.end()) continue;
      const std::string tag = "n=" + std::to_string(n);
      report.entries.push_back(
          make_entry("radii_optimization", tag + " density", metrics.density, row->density, 0.01, "published"));
      report.entries.push_back(make_entry("radii_optimization", tag + " rho_G", metrics.rho_global,
                                          row->rho_global, 0.02, "published"));
      for (std::size_t i = 0; i < row->radii.size(); ++i) {
        auto e = make_entry("radii_optimization", tag + " r" + std::to_string(i + 1), result.profile.radii[i],
                            row->radii[i], 0.02, "published");
        // only the n=4 radii are pinned; higher-n radii are informational
        if (!e.pass && n != 4) {
          e.flagged = true;
          e.note = "printed radii are not the maximizer of the objective";
        }
        report.entries.push_back(std::move(e));
      }
    }
  }

  for (const auto& row : published_digital_rows()) {
    const double tol = row.n == 4 ? 0.05 : 0.03;
    for (auto [eps, golden] : {std::pair{1e-3, row.ns_1e3}, std::pair{1e-6, row.ns_1e6}}) {
      const auto c = required_source_samples(row.n, row.snr_db, row.sdr_db, eps);
      std::ostringstream item;
      item << "n=" << row.n << " snr=" << row.snr_db << " sdr=" << row.sdr_db << " eps=" << eps << " N_s";
      auto e = make_entry("digital_comparison", item.str(), static_cast<double>(c.source_samples),
                          static_cast<double>(golden), tol * static_cast<double>(golden), "published");
      if (c.rate_above_capacity) e.note = "rate exceeds capacity; formula evaluated as written";
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

inline nlohmann::json to_json(const TablesReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"group", e.group},
                       {"item", e.item},
                       {"value", e.value},
                       {"golden", e.golden},
                       {"tolerance", e.tolerance},
                       {"source", e.source},
                       {"pass", e.pass},
                       {"flagged", e.flagged},
                       {"note", e.note}});
  }
  return {{"entries", entries}, {"optimized_profiles", report.optimized_profiles}, {"all_passed", report.all_passed()}};
}

}  // namespace c3t
