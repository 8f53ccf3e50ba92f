#include "tsbcf/config.hpp"

#include "tsbcf/data.hpp"

namespace tsbcf {

std::string to_string(ResponseMode mode) {
  return mode == ResponseMode::kProbit ? "probit" : "continuous";
}

std::string to_string(TauScaleMode mode) {
  return mode == TauScaleMode::kHalfNormal ? "half-normal" : "half-cauchy";
}

ResponseMode parse_response_mode(const std::string& s) {
  if (s == "probit") return ResponseMode::kProbit;
  if (s == "continuous") return ResponseMode::kContinuous;
  throw ValidationError("unknown response mode '" + s + "'");
}

TauScaleMode parse_tau_scale_mode(const std::string& s) {
  if (s == "half-normal") return TauScaleMode::kHalfNormal;
  if (s == "half-cauchy") return TauScaleMode::kHalfCauchy;
  throw ValidationError("unknown tau scale mode '" + s + "'");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
  };
  require(n_mu >= 1 && n_tau >= 1, "tree counts must be at least 1");
  require(eta_mu > 0 && eta_mu < 1 && eta_tau > 0 && eta_tau < 1, "eta must lie in (0, 1)");
  require(beta_mu >= 0 && beta_tau >= 0, "beta must be non-negative");
  require(kappa_mu > 0 && kappa_tau > 0, "kappa must be positive");
  require(s_mu > 0 && s_tau > 0, "leaf scales must be positive");
  require(nu_mu > 0 && nu_tau > 0, "shrinkage degrees of freedom must be positive");
  require(sigma_nu > 0 && sigma_q > 0 && sigma_q < 1, "invalid residual-variance prior");
  require(n_burn >= 0, "burn-in must be non-negative");
  require(n_draws >= 1, "need at least one retained draw");
  require(thin >= 1, "thin must be at least 1");
  require(jitter > 0, "jitter must be positive");
}

}  // namespace tsbcf
