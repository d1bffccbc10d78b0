#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "c3t/c3t.hpp"

namespace {

using c3t::Vector;
using nlohmann::json;

std::vector<Vector> read_vectors(std::istream& in) {
  std::vector<Vector> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    Vector v;
    double x = 0.0;
    while (ls >> x) v.push_back(x);
    if (!v.empty()) rows.push_back(std::move(v));
  }
  return rows;
}

void write_vector(std::ostream& out, const Vector& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  out << '\n';
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw c3t::ValidationError("cannot write " + path);
  return file;
}

std::vector<c3t::FeatureMode> parse_features(const std::vector<std::string>& names) {
  std::vector<c3t::FeatureMode> modes;
  for (const auto& n : names) modes.push_back(c3t::feature_mode_from_string(n));
  return modes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C3T analog code toolkit"};
  app.require_subcommand(1);
  std::cout.precision(12);

  // optimize
  auto* opt = app.add_subcommand("optimize", "optimize code radii by SPSA");
  int opt_n = 4;
  int opt_seeds = 10;
  std::uint64_t opt_seed = 0;
  std::string opt_out;
  std::string opt_trace;
  bool opt_plain = false;
  unsigned opt_workers = 0;
  auto spsa = c3t::SpsaConfig::table_reproduction();
  opt->add_option("--n", opt_n, "dimension")->required();
  opt->add_option("--seeds", opt_seeds, "independent runs");
  opt->add_option("--seed", opt_seed, "base seed");
  opt->add_option("--max-iters", spsa.max_iters, "iteration budget per run");
  opt->add_option("--min-iters", spsa.min_iters, "iterations before the tolerance test");
  opt->add_option("--tolerance", spsa.tolerance, "stop when consecutive J differ by less");
  opt->add_option("--initial-step", spsa.initial_step, "calibrated first step; 0 keeps a0");
  opt->add_flag("--plain-gains", opt_plain, "use the uncalibrated default gains and tolerance");
  opt->add_option("--workers", opt_workers, "threads (0 = all cores)");
  opt->add_option("--out", opt_out, "profile JSON output")->required();
  opt->add_option("--trace", opt_trace, "trace CSV of the winning run");
  opt->callback([&] {
    c3t::SpsaConfig config = opt_plain ? c3t::SpsaConfig{} : spsa;
    config.seed = opt_seed;
    const auto result = c3t::optimize_radii_parallel(opt_n, config, opt_seeds, opt_workers);
    c3t::save_profile(result.profile, opt_out);
    if (!opt_trace.empty()) {
      std::ofstream t(opt_trace);
      t.precision(17);
      t << "iter,J";
      for (std::size_t i = 0; i < result.trace.iterates.front().point.size(); ++i) t << ",p" << i + 1;
      t << '\n';
      for (const auto& it : result.trace.iterates) {
        t << it.k << ',' << it.objective;
        for (double v : it.point) t << ',' << v;
        t << '\n';
      }
    }
    const auto m = c3t::tube_metrics(result.profile);
    std::cout << json{{"objective", result.objective},
                      {"rho_global", m.rho_global},
                      {"density", m.density},
                      {"terminated", c3t::to_string(result.trace.terminated_reason)},
                      {"iterations", result.trace.iterates.size() - 1}}
                     .dump(2)
              << '\n';
  });

  // metrics
  auto* met = app.add_subcommand("metrics", "tube radius, path length and density of a profile");
  std::string met_profile;
  std::string met_csv;
  bool met_normalize = false;
  double met_step = c3t::kDefaultGridStep;
  met->add_option("--profile", met_profile)->required();
  met->add_flag("--normalize", met_normalize, "rescale radii onto the power sphere");
  met->add_option("--grid-step", met_step);
  met->add_option("--profile-csv", met_csv, "write rho(Delta) as CSV");
  met->callback([&] {
    const auto p = c3t::load_profile(met_profile, met_normalize);
    for (const auto& w : p.warnings()) std::cerr << "warning: " << w << '\n';
    const auto m = c3t::tube_metrics(p, met_step);
    std::cout << json{{"rho_global", m.rho_global},
                      {"argmin_delta", m.argmin_delta},
                      {"path_length", m.path_length},
                      {"density", m.density}}
                     .dump(2)
              << '\n';
    if (!met_csv.empty()) {
      const auto prof = c3t::circumradius_profile(p, met_step);
      std::ofstream out(met_csv);
      out.precision(17);
      out << "delta,rho\n0," << prof.limit_at_zero << '\n';
      for (std::size_t i = 0; i < prof.deltas.size(); ++i) out << prof.deltas[i] << ',' << prof.rho_values[i] << '\n';
    }
  });

  // encode
  auto* enc = app.add_subcommand("encode", "map source symbols (one per line) to channel vectors");
  std::string enc_profile;
  double enc_snr = std::nan("");
  std::uint64_t enc_seed = 0;
  bool enc_normalize = false;
  enc->add_option("--profile", enc_profile)->required();
  enc->add_flag("--normalize", enc_normalize);
  enc->add_option("--snr-db", enc_snr, "add channel noise at this SNR");
  enc->add_option("--seed", enc_seed);
  enc->callback([&] {
    const auto p = c3t::load_profile(enc_profile, enc_normalize);
    std::mt19937_64 gen(enc_seed);
    for (const auto& row : read_vectors(std::cin)) {
      for (double s : row) {
        Vector x = c3t::encode(p, s);
        if (!std::isnan(enc_snr)) x = c3t::awgn_channel(x, c3t::ChannelSpec::for_profile(p, enc_snr), gen);
        write_vector(std::cout, x);
      }
    }
  });

  // decode
  auto* dec = app.add_subcommand("decode", "decode channel vectors (one per line) to source estimates");
  std::string dec_profile;
  std::string dec_decoder = "raw";
  std::string dec_weights;
  double dec_snr = std::nan("");
  int dec_grid = c3t::kDefaultGridPoints;
  bool dec_normalize = false;
  dec->add_option("--profile", dec_profile)->required();
  dec->add_flag("--normalize", dec_normalize);
  dec->add_option("--decoder", dec_decoder, "raw|tp|ao|mlp")->check(CLI::IsMember({"raw", "tp", "ao", "mlp"}));
  dec->add_option("--snr-db", dec_snr, "channel SNR (needed by ao)");
  dec->add_option("--grid", dec_grid, "grid points");
  dec->add_option("--weights", dec_weights, "MLP weights JSON");
  dec->callback([&] {
    const auto p = c3t::load_profile(dec_profile, dec_normalize);
    const auto rows = read_vectors(std::cin);
    if (dec_decoder == "raw" || dec_decoder == "tp") {
      c3t::MapDecoder map(p, dec_grid);
      for (const auto& y : rows) {
        std::cout << (dec_decoder == "raw" ? map.decode(y) : map.decode(c3t::torus_projection(p, y).data)) << '\n';
      }
    } else if (dec_decoder == "ao") {
      if (std::isnan(dec_snr)) throw c3t::ValidationError("--snr-db is required for the ao decoder");
      c3t::AnglesDecoder ao(p, c3t::ChannelSpec::for_profile(p, dec_snr).noise_var, dec_grid);
      for (const auto& y : rows) std::cout << ao.decode(c3t::angles_features(y).data) << '\n';
    } else {
      if (dec_weights.empty()) throw c3t::ValidationError("--weights is required for the mlp decoder");
      const auto model = c3t::load_model(dec_weights);
      for (const auto& y : rows) std::cout << model.decode(p, y) << '\n';
    }
  });

  // sweep
  auto* swp = app.add_subcommand("sweep", "Monte Carlo SDR-vs-SNR sweep");
  std::string swp_config;
  std::string swp_out = "sweep.csv";
  std::string swp_sidecar;
  long swp_trials = -1;
  std::int64_t swp_seed = -1;
  unsigned swp_workers = 0;
  std::vector<std::string> swp_profiles;
  std::vector<std::string> swp_decoders;
  std::vector<double> swp_snrs;
  swp->add_option("--config", swp_config, "experiment JSON");
  swp->add_option("--profiles", swp_profiles, "profile files (override)");
  swp->add_option("--decoders", swp_decoders, "decoders (override)");
  swp->add_option("--snr-db", swp_snrs, "SNR grid (override)");
  swp->add_option("--trials", swp_trials);
  swp->add_option("--seed", swp_seed);
  swp->add_option("--workers", swp_workers);
  swp->add_option("--out", swp_out, "results CSV (appended)");
  swp->add_option("--sidecar", swp_sidecar, "config JSON sidecar (default: <out>.json)");
  swp->callback([&] {
    c3t::ExperimentConfig config;
    if (!swp_config.empty()) {
      std::ifstream in(swp_config);
      if (!in) throw c3t::ValidationError("cannot open " + swp_config);
      config = json::parse(in).get<c3t::ExperimentConfig>();
    }
    if (!swp_profiles.empty()) config.profiles = swp_profiles;
    if (!swp_decoders.empty()) {
      config.decoders.clear();
      for (const auto& d : swp_decoders) config.decoders.push_back(c3t::decoder_from_string(d));
    }
    if (!swp_snrs.empty()) config.snr_grid_db = swp_snrs;
    if (swp_trials > 0) config.trials = swp_trials;
    if (swp_seed >= 0) config.seed = static_cast<std::uint64_t>(swp_seed);
    config.workers = swp_workers;
    c3t::SweepCsvSink sink(swp_out);
    const auto records = c3t::run_sweep(config, [&](const c3t::SweepRecord& r) {
      sink(r);
      std::cerr << c3t::to_csv_row(r) << '\n';
    });
    std::ofstream side(swp_sidecar.empty() ? swp_out + ".json" : swp_sidecar);
    side << c3t::sweep_sidecar(config, records).dump(2) << '\n';
  });

  // train-mlp
  auto* trn = app.add_subcommand("train-mlp", "train an MLP decoder on simulated channel outputs");
  std::string trn_profile;
  std::string trn_out;
  std::vector<std::string> trn_features{"raw"};
  bool trn_normalize = false;
  c3t::TrainingConfig tc;
  trn->add_option("--profile", trn_profile)->required();
  trn->add_flag("--normalize", trn_normalize);
  trn->add_option("--features", trn_features, "raw, tp, ao (concatenated)");
  trn->add_option("--epochs", tc.epochs);
  trn->add_option("--examples-per-snr", tc.examples_per_snr);
  trn->add_option("--train-snr-db", tc.train_snrs_db);
  trn->add_option("--lr", tc.learning_rate);
  trn->add_flag("--allow-any-lr", tc.allow_any_learning_rate);
  trn->add_option("--batch", tc.batch_size);
  trn->add_option("--seed", tc.seed);
  trn->add_option("--out", trn_out)->required();
  trn->callback([&] {
    const auto p = c3t::load_profile(trn_profile, trn_normalize);
    tc.features = parse_features(trn_features);
    const auto data = c3t::generate_training_set(p, tc, c3t::derive_seed(tc.seed, {7}));
    const auto arch = c3t::MlpArchitecture::default_for(data.width, p.n);
    const auto result = c3t::mlp_train(arch, data, tc);
    c3t::MlpModel model{result.weights, tc.features, json::object()};
    model.metadata = {{"learning_rate", tc.learning_rate}, {"adam_decay", tc.adam_decay},
                      {"epochs", tc.epochs},               {"examples_per_snr", tc.examples_per_snr},
                      {"train_snrs_db", tc.train_snrs_db}, {"batch_size", tc.batch_size},
                      {"seed", tc.seed},                   {"init", "lecun_uniform"},
                      {"loss", "mse"},                     {"epoch_losses", result.epoch_losses},
                      {"profile", p}};
    c3t::save_model(model, trn_out);
    std::cout << "final loss " << result.epoch_losses.back() << '\n';
  });

  // bounds
  auto* bnd = app.add_subcommand("bounds", "OPTA and repetition SDR in dB");
  std::vector<int> bnd_n{4};
  std::vector<double> bnd_snr = c3t::ExperimentConfig::default_snr_grid();
  bnd->add_option("--n", bnd_n);
  bnd->add_option("--snr-db", bnd_snr);
  bnd->callback([&] {
    std::cout << "n,snr_db,opta_db,repetition_db\n";
    for (int n : bnd_n) {
      for (double s : bnd_snr) {
        const double lin = c3t::db_to_linear(s);
        std::cout << n << ',' << s << ',' << c3t::linear_to_db(c3t::opta_sdr_bound(lin, n)) << ','
                  << c3t::linear_to_db(c3t::repetition_sdr(lin, n)) << '\n';
      }
    }
  });

  // compare-digital
  auto* cmp = app.add_subcommand("compare-digital", "source samples a digital code needs to match an analog point");
  int cmp_n = 0;
  double cmp_snr = 0.0;
  double cmp_sdr = 0.0;
  std::vector<double> cmp_eps{1e-3, 1e-6};
  cmp->add_option("--n", cmp_n, "dimension (omit for the built-in rows)");
  cmp->add_option("--snr-db", cmp_snr);
  cmp->add_option("--sdr-db", cmp_sdr);
  cmp->add_option("--eps", cmp_eps);
  cmp->callback([&] {
    std::cout << "n,snr_db,sdr_db,R,eps,N_c,N_s,rate_above_capacity\n";
    auto emit = [&](int n, double snr, double sdr) {
      for (double e : cmp_eps) {
        const auto r = c3t::required_source_samples(n, snr, sdr, e);
        std::cout << n << ',' << snr << ',' << sdr << ',' << r.rate << ',' << e << ',' << r.block_length << ','
                  << r.source_samples << ',' << (r.rate_above_capacity ? "true" : "false") << '\n';
      }
    };
    if (cmp_n > 0) {
      emit(cmp_n, cmp_snr, cmp_sdr);
    } else {
      for (const auto& row : c3t::published_digital_rows()) emit(row.n, row.snr_db, row.sdr_db);
    }
  });

  // export-tube
  auto* exp = app.add_subcommand("export-tube", "centerline and tube-surface point cloud (n = 2, 3, 4)");
  std::string exp_profile;
  std::string exp_out;
  int exp_samples = 256;
  int exp_ring = 32;
  bool exp_normalize = false;
  exp->add_option("--profile", exp_profile)->required();
  exp->add_flag("--normalize", exp_normalize);
  exp->add_option("--samples", exp_samples);
  exp->add_option("--ring", exp_ring);
  exp->add_option("--out", exp_out, "CSV path (default stdout)");
  exp->callback([&] {
    const auto g = c3t::export_tube_geometry(c3t::load_profile(exp_profile, exp_normalize), exp_samples, exp_ring);
    std::ofstream file;
    c3t::write_geometry_csv(g, open_or_stdout(exp_out, file));
  });

  // reproduce-tables
  auto* rep = app.add_subcommand("reproduce-tables", "diff optimized codes and digital block lengths against goldens");
  c3t::TablesOptions topts;
  std::string rep_out;
  bool rep_skip = false;
  rep->add_option("--seeds", topts.seeds);
  rep->add_option("--max-iters", topts.spsa.max_iters);
  rep->add_option("--workers", topts.workers);
  rep->add_option("--dimensions", topts.dimensions);
  rep->add_flag("--skip-optimization", rep_skip);
  rep->add_option("--out", rep_out, "JSON report path (default stdout)");
  int rep_status = 0;
  rep->callback([&] {
    topts.include_optimization = !rep_skip;
    const auto report = c3t::reproduce_tables(topts);
    for (const auto& e : report.entries) {
      std::cerr << (e.pass ? "PASS " : (e.flagged ? "FLAG " : "FAIL ")) << e.group << ' ' << e.item << " value=" << e.value
                << " golden=" << e.golden << " tol=" << e.tolerance << (e.note.empty() ? "" : " (" + e.note + ")")
                << '\n';
    }
    std::ofstream file;
    open_or_stdout(rep_out, file) << c3t::to_json(report).dump(2) << '\n';
    rep_status = report.all_passed() ? 0 : 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rep_status;
}
