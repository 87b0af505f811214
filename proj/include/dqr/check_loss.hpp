#ifndef DQR_CHECK_LOSS_HPP_
#define DQR_CHECK_LOSS_HPP_

#include <stdexcept>

namespace dqr {

inline void require_quantile_level(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("quantile level tau must lie in (0,1)");
  }
}

//! Check (quantile) loss: u * (tau - 1[u < 0]).
inline double check_loss(double u, double tau) {
  require_quantile_level(tau);
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

//! Soft-thresholding operator S_a(v) = (v - a)_+ - (-v - a)_+.
inline double soft_threshold(double v, double a) {
  if (v > a) return v - a;
  if (v < -a) return v + a;
  return 0.0;
}

//! Proximal operator of the weighted check loss:
//! argmin_r { w * rho_tau(r) + (rho/2) * (r - v)^2 }.
//!
//! Positive homogeneity of the check loss gives the closed form
//! S_{w/(2 rho)}(v - w (2 tau - 1) / (2 rho)).
inline double check_prox(double v, double tau, double rho, double w = 1.0) {
  require_quantile_level(tau);
  if (!(rho > 0.0)) throw std::invalid_argument("check_prox: rho must be positive");
  if (!(w > 0.0)) throw std::invalid_argument("check_prox: w must be positive");
  return soft_threshold(v - w * (2.0 * tau - 1.0) / (2.0 * rho), w / (2.0 * rho));
}

}  // namespace dqr

#endif  // DQR_CHECK_LOSS_HPP_
