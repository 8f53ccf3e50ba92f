#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tsbcf {

enum class ResponseMode { kProbit, kContinuous };
enum class TauScaleMode { kHalfNormal, kHalfCauchy };

std::string to_string(ResponseMode mode);
std::string to_string(TauScaleMode mode);
ResponseMode parse_response_mode(const std::string& s);
TauScaleMode parse_tau_scale_mode(const std::string& s);

/// Priors, structural switches and chain lengths for one tsBCF fit.
///
/// The defaults reproduce the main-analysis settings: 200 prognostic trees with
/// (eta, beta) = (0.95, 2) and a half-Cauchy leaf scale, 50 treatment trees with
/// (0.25, 3) and a half-Normal leaf scale, smoothness kappa = 1 for both.
struct ModelConfig {
  int n_mu = 200;
  int n_tau = 50;
  double eta_mu = 0.95;
  double beta_mu = 2.0;
  double eta_tau = 0.25;
  double beta_tau = 3.0;
  double kappa_mu = 1.0;
  double kappa_tau = 1.0;
  double s_mu = 1.0;
  double s_tau = 0.5;
  double nu_mu = 1.0;   // 1 gives the half-Cauchy leaf scale
  double nu_tau = 1.0;  // only used in half-Cauchy tau mode
  TauScaleMode tau_scale_mode = TauScaleMode::kHalfNormal;
  ResponseMode response_mode = ResponseMode::kProbit;
  double sigma_nu = 3.0;
  double sigma_q = 0.90;
  int n_burn = 1000;
  int n_draws = 1000;
  int thin = 1;
  std::uint64_t seed = 1;

  // Structural switches used by the comparator modes and the propensity model.
  bool use_tau_forest = true;
  bool constant_leaves_mu = false;  // leaf curves collapse to scalars (ordinary BART leaves)
  bool constant_leaves_tau = false;
  bool update_xi = true;
  bool update_b = true;
  bool update_delta_mu = true;
  double jitter = 1e-8;
  /// When set, offsets alpha_t are fixed to these values instead of estimated from the data.
  std::optional<std::vector<double>> fixed_offsets;

  /// Throws ValidationError on invalid settings.
  void validate() const;
};

}  // namespace tsbcf
