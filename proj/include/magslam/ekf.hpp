#pragma once

#include "magslam/core.hpp"

#include <utility>

namespace magslam {

/// Variances of the odometry noise entering the dynamics.
struct ProcessNoise {
  double q_pos = 0.0;    // variance of e_p per axis [m^2]
  double q_omega = 0.0;  // variance of e_omega [rad^2/s^2]
};

/// Filter process noise derived from the params: sigma^2 scaled by
/// process_noise_scale.
ProcessNoise process_noise_from(const SlamParams& params);

/// Body-to-world rotation: R(psi) = [[cos psi, sin psi], [-sin psi, cos psi]].
Mat2 rotation_matrix(double heading);

/// d/dpsi of rotation_matrix.
Mat2 rotation_matrix_derivative(double heading);

/// Mean propagation through the dynamics:
///   p'   = p + R(psi) * odom_pos
///   psi' = psi + dt * (odom_gyro - b_omega)
///   b'   = b, landmarks unchanged.
VecX propagate_mean(const StateBelief& belief, const SensorSample& sample);

/// Dense linearization of the dynamics about the belief mean.
/// state: (4+2K)x(4+2K), identity except dp'/dpsi and dpsi'/db = -dt.
/// noise: (4+2K)x3 mapping (e_px, e_py, e_omega); carries -R(psi) and -dt
/// because the noise enters the dynamics subtractively.
struct DynamicsJacobians {
  MatX state;
  MatX noise;
};

DynamicsJacobians dynamics_jacobians(const StateBelief& belief, const SensorSample& sample);

/// Kalman time update: mean propagated, cov = F P F^T + G Q G^T with
/// Q = diag(q_pos, q_pos, q_omega), re-symmetrized. Throws NumericalError
/// if the covariance degenerates.
StateBelief time_update(const StateBelief& belief, const SensorSample& sample,
                        const ProcessNoise& noise);

/// Allocation-free variant mutating the belief; same result as time_update.
void time_update_in_place(StateBelief& belief, const SensorSample& sample,
                          const ProcessNoise& noise);

/// Appends one landmark with zero mean and p0_landmark * I2 covariance,
/// decoupled from all existing states.
StateBelief augment_landmark(const StateBelief& belief, double p0_landmark);

/// Loop-closure measurement update: pseudo-measurement p - l_k = 0 with
/// noise sigma_lc^2 * I2, Joseph-form covariance update. Diagnostics carry
/// the pre-update residual, innovation covariance and marginal likelihood.
std::pair<StateBelief, UpdateDiagnostics> landmark_measurement_update(
    const StateBelief& belief, int landmark_index, double sigma_lc);

/// Gaussian predictive density of the matched measurement:
///   p(y) = exp(-0.5 eps^T S^-1 eps) / (2 pi sqrt(|S|)).
double marginal_likelihood(const UpdateDiagnostics& diag);

}  // namespace magslam
