// One PASS/FAIL line per acceptance criterion. Tolerances are pinned here.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "c3t/c3t.hpp"

using namespace c3t;

namespace {

constexpr double kPi = std::numbers::pi;

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int failures = 0;
std::set<int> selected;  // empty runs every criterion

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << "  [" << detail << "]\n";
  std::cout.flush();
}

/// Runs one criterion; an exception is a failure with its message as detail.
void run(int id, const std::string& title, const std::function<bool(std::ostringstream&)>& body) {
  if (!selected.empty() && !selected.count(id)) return;
  std::ostringstream detail;
  detail.precision(6);
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  report(id, pass, title, detail.str());
}

bool within(double value, double golden, double tol) { return std::abs(value - golden) <= tol; }

/// Independent tube radius: min over a Delta grid of the tangent-point
/// circumradius at alpha2 = 0, and the closed-form 1 / chi_1.
double delta_grid_oracle(const CodeProfile& p, double step) {
  double best = 1.0 / first_curvature(p);
  for (double d = step; d <= 2.0 * kPi - step / 2; d += step) {
    best = std::min(best, circumradius_tangent_point(p, d, 0.0));
  }
  return best;
}

/// Adaptive Simpson on [a, b] in extended precision.
template <typename F>
long double adaptive_simpson(F f, long double a, long double b, long double fa, long double fm, long double fb,
                             long double whole, long double tol, int depth) {
  const long double m = 0.5L * (a + b);
  const long double lm = 0.5L * (a + m);
  const long double rm = 0.5L * (m + b);
  const long double flm = f(lm);
  const long double frm = f(rm);
  const long double left = (m - a) / 6.0L * (fa + 4.0L * flm + fm);
  const long double right = (b - m) / 6.0L * (fm + 4.0L * frm + fb);
  const long double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0L * tol) return left + right + delta / 15.0L;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0L, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0L, depth - 1);
}

/// Adaptive Simpson started on 64 panels so a narrow peak cannot slip between
/// the first samples. rel_tol is relative to a composite-rule estimate, since
/// far-tail densities can be as small as 1e-30.
template <typename F>
long double integrate(F f, long double a, long double b, long double rel_tol) {
  constexpr int panels = 64;
  long double rough = 0.0L;
  for (int i = 0; i <= 4 * panels; ++i) rough += std::abs(f(a + (b - a) * i / (4 * panels)));
  const long double tol = rel_tol * rough * (b - a) / (4 * panels);
  long double acc = 0.0L;
  for (int i = 0; i < panels; ++i) {
    const long double lo = a + (b - a) * i / panels;
    const long double hi = a + (b - a) * (i + 1) / panels;
    const long double fa = f(lo);
    const long double fb = f(hi);
    const long double fm = f(0.5L * (lo + hi));
    acc += adaptive_simpson(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0L * (fa + 4.0L * fm + fb), tol / panels, 40);
  }
  return acc;
}

/// Valid harmonic profile with random radii; odd n gets a helix share.
CodeProfile random_profile(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vector r(static_cast<std::size_t>(n / 2));
  double norm = 0.0;
  for (double& v : r) {
    v = u(gen);
    norm += v * v;
  }
  double budget = 1.0;
  double b = 0.0;
  if (n % 2 == 1) {
    const double share = 0.1 + 0.4 * (u(gen) - 0.2) / 0.8;
    b = std::sqrt(share) / kPi;
    budget = 1.0 - share;
  }
  for (double& v : r) v *= std::sqrt(budget / norm);
  return CodeProfile::harmonic(n, r, b);
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  std::cout << "acceptance suite\n";
  const auto& radii_rows = published_radii_rows();
  const SpsaConfig spsa = SpsaConfig::table_reproduction();
  std::map<int, CodeProfile> optimized;

  // 1. n=4 radii: best of 10 SPSA runs, radii +-0.02, density +-0.01, < 2 min.
  run(1, "n=4 optimized radii and density", [&](std::ostringstream& d) {
    Clock clock;
    const auto result = optimize_radii_parallel(4, spsa, 10, 0);
    const double secs = clock.seconds();
    optimized.emplace(4, result.profile);
    const double density = packing_density(result.profile);
    const auto& row = radii_rows[0];
    d << "r=[" << result.profile.radii[0] << ", " << result.profile.radii[1] << "] density=" << density
      << " time=" << secs << "s";
    return within(result.profile.radii[0], row.radii[0], 0.02) && within(result.profile.radii[1], row.radii[1], 0.02) &&
           within(density, row.density, 0.01) && secs < 120.0;
  });

  // 2. n=6 and n=8: density +-0.01, rho_G +-0.02, Delta-grid cross-check, < 10 min.
  run(2, "n=6 and n=8 density and tube radius", [&](std::ostringstream& d) {
    Clock clock;
    bool pass = true;
    for (std::size_t i = 1; i <= 2; ++i) {
      const auto& row = radii_rows[i];
      const auto result = optimize_radii_parallel(row.n, spsa, 10, 0);
      optimized.emplace(row.n, result.profile);
      const auto m = tube_metrics(result.profile);
      const double oracle = delta_grid_oracle(result.profile, 1e-3);
      // the oracle grid can only overshoot the refined minimum
      const bool cross = m.rho_global <= oracle + 1e-12 && oracle - m.rho_global < 1e-4;
      pass = pass && within(m.density, row.density, 0.01) && within(m.rho_global, row.rho_global, 0.02) && cross;
      d << "n=" << row.n << " density=" << m.density << " (" << row.density << ") rho=" << m.rho_global << " ("
        << row.rho_global << ") oracle=" << oracle << "; ";
    }
    const double secs = clock.seconds();
    d << "time=" << secs << "s";
    return pass && secs < 600.0;
  });

  // 3. Circumradius oracle at the printed n=4 radii; printed 0.8339 is a flagged entry.
  run(3, "n=4 circumradius oracle and flagged published value", [&](std::ostringstream& d) {
    const auto printed = CodeProfile::harmonic(4, radii_rows[0].radii).normalized();
    const double rho = global_circumradius(printed).rho_global;
    const double oracle = delta_grid_oracle(printed, 1e-4);
    TablesOptions o;
    o.include_optimization = false;
    const auto rep = reproduce_tables(o);
    bool flagged = false;
    for (const auto& e : rep.entries) {
      if (e.group == "circumradius_oracle" && e.source == "published") {
        flagged = e.flagged && !e.pass && e.note.find("density") != std::string::npos;
        d << "flag note: " << e.note << "; ";
      }
    }
    d << "rho_G=" << rho << " oracle=" << oracle;
    return within(rho, 0.8165, 5e-4) && within(oracle, 0.8165, 5e-4) && flagged;
  });

  // 4. Digital comparison: 10 rows x 2 eps, +-3% (+-5% where R > C), < 1 s.
  run(4, "digital comparison source samples", [&](std::ostringstream& d) {
    Clock clock;
    int ok = 0;
    int total = 0;
    for (const auto& row : published_digital_rows()) {
      for (auto [eps, golden] : {std::pair{1e-3, row.ns_1e3}, std::pair{1e-6, row.ns_1e6}}) {
        const auto c = required_source_samples(row.n, row.snr_db, row.sdr_db, eps);
        const double tol = (row.n == 4 ? 0.05 : 0.03) * golden;
        ++total;
        if (within(static_cast<double>(c.source_samples), golden, tol)) {
          ++ok;
        } else {
          d << "miss n=" << row.n << " eps=" << eps << " got " << c.source_samples << " want " << golden << "; ";
        }
      }
    }
    const double secs = clock.seconds();
    d << ok << "/" << total << " rows, time=" << secs << "s";
    return ok == total && total == 20 && secs < 1.0;
  });

  // 5. RawMAP SDR between the repetition line (-0.2 dB) and OPTA, 1e5 trials, < 5 min.
  run(5, "RawMAP SDR bracketed by OPTA and repetition", [&](std::ostringstream& d) {
    Clock clock;
    bool pass = true;
    std::vector<CodeProfile> profiles{CodeProfile::harmonic(4, {std::sqrt(2.0 / 3.0), std::sqrt(1.0 / 3.0)}, 0.0,
                                                            Stretch::AliasingSafe)};
    if (!optimized.count(6)) optimized.emplace(6, optimize_radii_parallel(6, spsa, 10, 0).profile);
    auto p6 = optimized.at(6);
    p6.stretch = Stretch::AliasingSafe;
    profiles.push_back(p6);
    for (const auto& p : profiles) {
      for (double snr : {-5.0, 0.0, 5.0, 10.0}) {
        const double sdr = simulate_sdr_db(p, DecoderKind::RawMAP, snr, 100000, derive_seed(5, {static_cast<std::uint64_t>(p.n)}));
        const double opta = linear_to_db(opta_sdr_bound(db_to_linear(snr), p.n));
        const double rep = snr + 10.0 * std::log10(p.n) - 0.2;
        const bool cell = sdr <= opta && sdr >= rep;
        pass = pass && cell;
        d << "n=" << p.n << "@" << snr << "dB " << sdr << (cell ? "" : "(out)") << "; ";
      }
    }
    const double secs = clock.seconds();
    d << "time=" << secs << "s";
    return pass && secs < 300.0;
  });

  // 6. Phase likelihood vs adaptive quadrature over the amplitude, rel 1e-6.
  // Sign resolution: 1 + sqrt(pi) q e^{q^2} erfc(-q) matches; the sign-flipped
  // 1 - sqrt(pi) q e^{q^2} erfc(q) is the density of the antipodal phase.
  run(6, "angles-only likelihood vs quadrature", [&](std::ostringstream& d) {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::uniform_real_distribution<double> radius(0.2, 1.0);
    std::uniform_real_distribution<double> log_var(std::log(0.01), std::log(3.0));
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const double r = radius(gen);
      const double eta = angle(gen);
      const double alpha = angle(gen);
      const double var = std::exp(log_var(gen));
      const auto p = CodeProfile::harmonic(2, {r}, 0.0, Stretch::AliasingSafe);
      const double got = std::exp(angles_log_density(p, Vector{eta}, alpha, var));
      const auto f = [&](long double rho) {
        const long double d2 = rho * rho - 2.0L * rho * r * std::cos(eta - alpha) + static_cast<long double>(r) * r;
        return rho / (2.0L * std::numbers::pi_v<long double> * var) * std::exp(-d2 / (2.0L * var));
      };
      const long double want = integrate(f, 0.0L, r + 14.0L * std::sqrt(static_cast<long double>(var)), 1e-13L);
      worst = std::max(worst, static_cast<double>(std::abs(got - want) / want));
    }
    d << "worst rel err=" << worst << " over 100 tuples";
    return worst < 1e-6;
  });

  // 7. Geometry invariants on randomized profiles, n in {2, 3, 4, 6, 8}.
  run(7, "geometry invariants", [&](std::ostringstream& d) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    double spread = 0.0;
    double ortho = 0.0;
    double parity = 0.0;
    double limit = 0.0;
    double symmetry = 0.0;
    for (int n : {2, 3, 4, 6, 8}) {
      for (int trial = 0; trial < 3; ++trial) {
        const auto p = random_profile(n, gen);
        Vector lo(static_cast<std::size_t>(n - 1), 1e300);
        Vector hi(static_cast<std::size_t>(n - 1), -1e300);
        for (int t = 0; t < 64; ++t) {
          const double a = -kPi + 2.0 * kPi * t / 64;
          const auto chi = generalized_curvatures(p, a).values;
          for (std::size_t m = 0; m < chi.size(); ++m) {
            lo[m] = std::min(lo[m], chi[m]);
            hi[m] = std::max(hi[m], chi[m]);
          }
          const auto f = frenet_frame(p, a, n);
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              ortho = std::max(ortho, std::abs(detail::dot(f.vectors[i], f.vectors[j]) - (i == j ? 1.0 : 0.0)));
            }
          }
          const int lowest = p.odd() ? 1 : 0;
          for (int k = lowest; k <= 5; ++k) {
            for (int j = k + 1; j <= 6; j += 2) {
              parity = std::max(parity, std::abs(detail::dot(curve_derivative(p, a, k), curve_derivative(p, a, j))));
            }
          }
        }
        for (std::size_t m = 0; m < lo.size(); ++m) spread = std::max(spread, (hi[m] - lo[m]) / hi[m]);
        const double chi1 = generalized_curvatures(p, angle(gen)).values[0];
        limit = std::max(limit, std::abs(std::sqrt(circumradius_sq_delta(p, 1e-3)) * chi1 - 1.0));
        for (double delta = 0.05; delta < 2.0 * kPi - 0.05; delta += 0.1) {
          const double a = angle(gen);
          const double plus = circumradius_tangent_point(p, a + delta, a);
          const double minus = circumradius_tangent_point(p, a - delta, a);
          const double rho = std::sqrt(circumradius_sq_delta(p, delta));
          symmetry = std::max({symmetry, std::abs(plus - minus) / rho, std::abs(plus - rho) / rho});
        }
      }
    }
    d << "curvature spread=" << spread << " frame=" << ortho << " parity=" << parity << " limit=" << limit
      << " symmetry=" << symmetry;
    return spread < 1e-6 && ortho < 1e-9 && parity < 1e-9 && limit < 1e-4 && symmetry < 1e-6;
  });

  // 8. MLP: gradient check rel < 1e-5, trained SDR at 0 dB within 3 dB of RawMAP, training < 10 min.
  run(8, "MLP decoder gradient and desk-scale SDR", [&](std::ostringstream& d) {
    const auto arch = MlpArchitecture::default_for(4, 4);
    MlpWeights w = MlpWeights::lecun_uniform(arch, 8);
    {
      std::mt19937_64 gen(8);
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      for (auto& l : w.layers) {
        for (double& b : l.biases) b = u(gen);
      }
    }
    Dataset batch;
    batch.width = 4;
    batch.push(Vector{0.4, -0.7, 0.1, 0.9}, 0.25);
    batch.push(Vector{-0.2, 0.5, -1.1, 0.3}, -0.6);
    const std::vector<std::size_t> rows{0, 1};
    MlpWeights grad = MlpWeights::zeros(arch);
    MlpWeights scratch = MlpWeights::zeros(arch);
    loss_and_gradient(w, batch, rows, grad);
    double worst = 0.0;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      for (int part = 0; part < 2; ++part) {
        Vector& params = part == 0 ? w.layers[l].weights : w.layers[l].biases;
        const Vector& analytic = part == 0 ? grad.layers[l].weights : grad.layers[l].biases;
        double diff = 0.0;
        double norm = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
          const double keep = params[i];
          params[i] = keep + 1e-6;
          const double up = loss_and_gradient(w, batch, rows, scratch);
          params[i] = keep - 1e-6;
          const double down = loss_and_gradient(w, batch, rows, scratch);
          params[i] = keep;
          const double fd = (up - down) / 2e-6;
          diff += (fd - analytic[i]) * (fd - analytic[i]);
          norm += fd * fd;
        }
        worst = std::max(worst, std::sqrt(diff / norm));
      }
    }

    const auto p = CodeProfile::harmonic(4, {std::sqrt(2.0 / 3.0), std::sqrt(1.0 / 3.0)}, 0.0, Stretch::AliasingSafe);
    TrainingConfig tc;
    tc.seed = 8;
    Clock clock;
    const auto data = generate_training_set(p, tc, derive_seed(tc.seed, {7}));
    const auto trained = mlp_train(MlpArchitecture::default_for(data.width, 4), data, tc);
    const double secs = clock.seconds();
    SimOptions opts;
    opts.mlp = std::make_shared<MlpModel>(MlpModel{trained.weights, tc.features, {}});
    const double mlp = simulate_sdr_db(p, DecoderKind::MLP_Raw, 0.0, 100000, 80, opts);
    const double map = simulate_sdr_db(p, DecoderKind::RawMAP, 0.0, 100000, 80);
    d << "grad rel err=" << worst << " MLP=" << mlp << "dB RawMAP=" << map << "dB train=" << secs << "s";
    return worst < 1e-5 && std::abs(mlp - map) <= 3.0 && secs < 600.0;
  });

  // 9. Determinism: reproduce-tables and a sweep are bit-identical across worker counts.
  run(9, "determinism across worker counts", [&](std::ostringstream& d) {
    TablesOptions o;
    o.workers = 1;
    const auto a = to_json(reproduce_tables(o)).dump();
    o.workers = 4;
    const auto b = to_json(reproduce_tables(o)).dump();
    const auto again = to_json(reproduce_tables(o)).dump();

    const auto path = (std::filesystem::temp_directory_path() / "c3t_acceptance_profile.json").string();
    save_profile(CodeProfile::harmonic(4, {std::sqrt(2.0 / 3.0), std::sqrt(1.0 / 3.0)}, 0.0, Stretch::AliasingSafe),
                 path);
    ExperimentConfig c;
    c.profiles = {path};
    c.decoders = {DecoderKind::RawMAP, DecoderKind::TP_MAP, DecoderKind::AO_MAP, DecoderKind::Repetition};
    c.snr_grid_db = {-5.0, 0.0, 5.0};
    c.trials = 10000;
    c.seed = 9;
    std::vector<std::string> runs;
    for (unsigned workers : {1U, 4U, 1U}) {
      c.workers = workers;
      std::string csv;
      for (const auto& r : run_sweep(c)) csv += to_csv_row(r) + "\n";
      runs.push_back(csv);
    }
    std::filesystem::remove(path);
    const bool tables = a == b && b == again;
    const bool sweep = runs[0] == runs[1] && runs[1] == runs[2];
    d << "tables " << (tables ? "identical" : "differ") << ", sweep " << (sweep ? "identical" : "differ");
    return tables && sweep;
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
