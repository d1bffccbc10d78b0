#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "c3t/errors.hpp"
#include "c3t/special.hpp"

namespace c3t {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

/// Shannon-lower-bound OPTA: SDR <= (pi e / 6)(1 + SNR)^n, linear units.
inline double opta_sdr_bound(double snr_linear, int n) {
  if (snr_linear < 0.0) throw DomainError("SNR must be >= 0");
  if (n < 1) throw DomainError("n must be >= 1");
  return std::numbers::pi * std::numbers::e / 6.0 * std::pow(1.0 + snr_linear, n);
}

/// Repetition code SDR = n SNR (linear), the unclamped sample-mean estimator.
inline double repetition_sdr(double snr_linear, int n) { return n * snr_linear; }

/// Bits per source symbol of a uniform quantizer reaching sdr_db.
inline double quantizer_rate(double sdr_db) {
  if (!(sdr_db > 0.0)) throw DomainError("SDR must be > 0 dB");
  return sdr_db / 6.02 + 1.0;
}

/// AWGN capacity 0.5 log2(1 + SNR) in bits per channel use.
inline double awgn_capacity(double snr_linear) { return 0.5 * std::log2(1.0 + snr_linear); }

/// Normal-approximation minimal block length N_c for rate R at block error eps.
/// Evaluated as written even when R exceeds capacity.
inline double polyanskiy_block_length(double snr_linear, double rate, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw DomainError("eps must lie in (0, 0.5)");
  if (!(rate > 0.0)) throw DomainError("rate must be > 0");
  const double capacity = awgn_capacity(snr_linear);
  const double gap = capacity - rate;
  if (gap == 0.0) throw DomainError("rate equals capacity");
  const double log2e = std::numbers::log2e;
  const double dispersion = 1.0 - 1.0 / ((1.0 + snr_linear) * (1.0 + snr_linear));
  const double qinv = gaussian_q_inverse(eps);
  return log2e * log2e / (2.0 * gap * gap) * dispersion * qinv * qinv;
}

/// One row of the analog-vs-digital source sample comparison.
struct DigitalComparison {
  int n = 0;
  double snr_db = 0.0;
  double sdr_db = 0.0;
  double bits_per_symbol = 0.0;
  double capacity = 0.0;
  double rate = 0.0;
  double epsilon = 0.0;
  double block_length = 0.0;          ///< N_c
  double source_samples_exact = 0.0;  ///< N_c / n before truncation
  long source_samples = 0;            ///< N_s, whole samples that fit in N_c
  bool rate_above_capacity = false;
};

/// Source samples a digital scheme must queue to match (n, SNR, SDR) at eps.
inline DigitalComparison required_source_samples(int n, double snr_db, double sdr_db, double eps) {
  if (n < 1) throw DomainError("n must be >= 1");
  DigitalComparison row;
  row.n = n;
  row.snr_db = snr_db;
  row.sdr_db = sdr_db;
  row.epsilon = eps;
  row.bits_per_symbol = quantizer_rate(sdr_db);
  row.rate = row.bits_per_symbol / n;
  const double snr = db_to_linear(snr_db);
  row.capacity = awgn_capacity(snr);
  row.rate_above_capacity = row.rate > row.capacity;
  row.block_length = polyanskiy_block_length(snr, row.rate, eps);
  // N_c R / bits = N_c / n
  row.source_samples_exact = row.block_length / n;
  row.source_samples = static_cast<long>(std::floor(row.source_samples_exact));
  return row;
}

}  // namespace c3t
