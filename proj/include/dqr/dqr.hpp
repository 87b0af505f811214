#ifndef DQR_DQR_HPP_
#define DQR_DQR_HPP_

// Umbrella header: bivariate directional quantile regression with varying
// coefficients, propagation-separation refinement across directions, and
// directional quantile envelope construction.

#include "dqr/admm.hpp"
#include "dqr/check_loss.hpp"
#include "dqr/commands.hpp"
#include "dqr/config.hpp"
#include "dqr/dataset.hpp"
#include "dqr/design.hpp"
#include "dqr/distributions.hpp"
#include "dqr/envelope.hpp"
#include "dqr/errors.hpp"
#include "dqr/io.hpp"
#include "dqr/parallel.hpp"
#include "dqr/ps.hpp"
#include "dqr/rng.hpp"
#include "dqr/simulation.hpp"
#include "dqr/spline_basis.hpp"
#include "dqr/variance.hpp"

#endif  // DQR_DQR_HPP_
