#include "magslam/ekf.hpp"

#include <cmath>
#include <numbers>

namespace magslam {

ProcessNoise process_noise_from(const SlamParams& params) {
  return {params.process_noise_scale * params.sigma_p * params.sigma_p,
          params.process_noise_scale * params.sigma_omega * params.sigma_omega};
}

Mat2 rotation_matrix(double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Mat2 r;
  r << c, s, -s, c;
  return r;
}

Mat2 rotation_matrix_derivative(double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  Mat2 r;
  r << -s, c, -c, -s;
  return r;
}

VecX propagate_mean(const StateBelief& belief, const SensorSample& sample) {
  VecX mean = belief.mean;
  mean.head<2>() += rotation_matrix(belief.heading()) * sample.odom_pos;
  mean(2) += sample.dt * (sample.odom_gyro - belief.gyro_bias());
  return mean;
}

DynamicsJacobians dynamics_jacobians(const StateBelief& belief, const SensorSample& sample) {
  const int n = belief.dim();
  DynamicsJacobians jac;
  jac.state = MatX::Identity(n, n);
  jac.state.block<2, 1>(0, 2) = rotation_matrix_derivative(belief.heading()) * sample.odom_pos;
  jac.state(2, 3) = -sample.dt;
  jac.noise = MatX::Zero(n, 3);
  jac.noise.block<2, 2>(0, 0) = -rotation_matrix(belief.heading());
  jac.noise(2, 2) = -sample.dt;
  return jac;
}

StateBelief time_update(const StateBelief& belief, const SensorSample& sample,
                        const ProcessNoise& noise) {
  StateBelief out = belief;
  time_update_in_place(out, sample, noise);
  return out;
}

void time_update_in_place(StateBelief& belief, const SensorSample& sample,
                          const ProcessNoise& noise) {
  const Vec2 dp_dpsi = rotation_matrix_derivative(belief.heading()) * sample.odom_pos;
  const double dt = sample.dt;

  belief.mean.head<2>() += rotation_matrix(belief.heading()) * sample.odom_pos;
  belief.mean(2) += dt * (sample.odom_gyro - belief.gyro_bias());

  // F P with F = I + dp_dpsi into (p rows, psi col), -dt into (psi row, b col);
  // rows 0 and 1 read row 2 before it is rewritten, then the same for the
  // right multiplication by F^T.
  MatX& p = belief.cov;
  p.row(0) += dp_dpsi(0) * p.row(2);
  p.row(1) += dp_dpsi(1) * p.row(2);
  p.row(2) -= dt * p.row(3);
  p.col(0) += dp_dpsi(0) * p.col(2);
  p.col(1) += dp_dpsi(1) * p.col(2);
  p.col(2) -= dt * p.col(3);
  // G Q G^T collapses to diag(q_pos, q_pos, dt^2 q_omega, 0, ...) since
  // R(psi) diag(q,q) R(psi)^T = q I2.
  p(0, 0) += noise.q_pos;
  p(1, 1) += noise.q_pos;
  p(2, 2) += dt * dt * noise.q_omega;

  // in-place symmetrization
  const int n = static_cast<int>(p.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (p(i, j) + p(j, i));
      p(i, j) = m;
      p(j, i) = m;
    }
  }

  if (!belief.mean.allFinite() || !p.allFinite()) {
    throw NumericalError("time update produced non-finite state");
  }
  const double floor = -1e-9 * std::max(1.0, p.trace());
  if (p.diagonal().minCoeff() < floor) {
    throw NumericalError("time update lost positive semidefiniteness");
  }
}

StateBelief augment_landmark(const StateBelief& belief, double p0_landmark) {
  const int n = belief.dim();
  StateBelief out;
  out.landmark_count = belief.landmark_count + 1;
  out.mean = VecX::Zero(n + 2);
  out.mean.head(n) = belief.mean;
  out.cov = MatX::Zero(n + 2, n + 2);
  out.cov.topLeftCorner(n, n) = belief.cov;
  out.cov(n, n) = p0_landmark;
  out.cov(n + 1, n + 1) = p0_landmark;
  return out;
}

namespace {

Mat2 invert_spd_2x2(const Mat2& s, double* det_out) {
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  if (!(det > 0.0) || !(s(0, 0) > 0.0) || !std::isfinite(det)) {
    throw NumericalError("residual covariance is not positive definite");
  }
  Mat2 inv;
  inv << s(1, 1), -s(0, 1), -s(1, 0), s(0, 0);
  inv /= det;
  if (det_out) *det_out = det;
  return inv;
}

}  // namespace

std::pair<StateBelief, UpdateDiagnostics> landmark_measurement_update(
    const StateBelief& belief, int landmark_index, double sigma_lc) {
  if (landmark_index < 0 || landmark_index >= belief.landmark_count) {
    throw std::out_of_range("landmark index out of range");
  }
  const int lc = 4 + 2 * landmark_index;
  const double r = sigma_lc * sigma_lc;

  UpdateDiagnostics diag;
  diag.residual = belief.position() - belief.landmark(landmark_index);

  // H selects p - l_k, so P H^T and S come from column/row differences.
  MatX pht = belief.cov.leftCols<2>() - belief.cov.middleCols<2>(lc);
  Mat2 s = pht.topRows<2>() - pht.middleRows<2>(lc);
  s += r * Mat2::Identity();
  s = 0.5 * (s + s.transpose()).eval();
  diag.residual_cov = s;
  const Mat2 s_inv = invert_spd_2x2(s, nullptr);
  diag.marginal_likelihood = marginal_likelihood(diag);

  const MatX gain = pht * s_inv;

  StateBelief out = belief;
  out.mean = belief.mean - gain * diag.residual;  // measurement value is zero

  // Joseph form: (I - K H) P (I - K H)^T + r K K^T
  MatX a = belief.cov - gain * pht.transpose();
  MatX ah = a.leftCols<2>() - a.middleCols<2>(lc);
  out.cov = a - ah * gain.transpose() + r * (gain * gain.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();

  if (!out.mean.allFinite() || !out.cov.allFinite()) {
    throw NumericalError("measurement update produced non-finite state");
  }
  return {std::move(out), diag};
}

double marginal_likelihood(const UpdateDiagnostics& diag) {
  double det = 0.0;
  const Mat2 s_inv = invert_spd_2x2(diag.residual_cov, &det);
  const double quad = diag.residual.dot(s_inv * diag.residual);
  return std::exp(-0.5 * quad) / (2.0 * std::numbers::pi * std::sqrt(det));
}

}  // namespace magslam
