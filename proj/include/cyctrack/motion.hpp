#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "cyctrack/error.hpp"
#include "cyctrack/geometry.hpp"

namespace cyctrack {

inline constexpr int kStateDim = 10;
inline constexpr int kMeasDim = 7;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using MeasVector = Eigen::Matrix<double, kMeasDim, 1>;
using MeasMatrix = Eigen::Matrix<double, kMeasDim, kMeasDim>;

/// State layout: cx, cy, cz, yaw, length, width, height, vx, vy, vz.
namespace state_index {
inline constexpr int kX = 0, kY = 1, kZ = 2, kYaw = 3;
inline constexpr int kLength = 4, kWidth = 5, kHeight = 6;
inline constexpr int kVx = 7, kVy = 8, kVz = 9;
}  // namespace state_index

struct NoiseConfig {
  double process_pos_std = 0.5;
  double process_vel_std = 1.0;
  double process_yaw_std = 0.1;
  double process_dim_std = 0.05;
  double meas_pos_std = 0.5;
  double meas_yaw_std = 0.1;
  double meas_dim_std = 0.2;
  double init_vel_var = 100.0;

  void validate() const {
    for (double v : {process_pos_std, process_vel_std, process_yaw_std, process_dim_std,
                     meas_pos_std, meas_yaw_std, meas_dim_std, init_vel_var}) {
      if (!(v > 0.0)) throw ContractViolation("noise parameters must be strictly positive");
    }
  }
};

struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateMatrix covariance = StateMatrix::Identity();
};

namespace detail {

inline MeasMatrix measurement_noise(const NoiseConfig& n) {
  MeasVector d;
  const double p = n.meas_pos_std * n.meas_pos_std;
  const double y = n.meas_yaw_std * n.meas_yaw_std;
  const double s = n.meas_dim_std * n.meas_dim_std;
  d << p, p, p, y, s, s, s;
  return d.asDiagonal();
}

inline MeasVector box_to_measurement(const Box3D& z) {
  MeasVector m;
  m << z.cx, z.cy, z.cz, z.yaw, z.length, z.width, z.height;
  return m;
}

}  // namespace detail

/// Cold start from a first observation: pose and dims from the box, zero
/// velocity with a large variance.
inline KalmanState init_state(const Box3D& z, const NoiseConfig& n) {
  using namespace state_index;
  KalmanState s;
  s.mean.head<kMeasDim>() = detail::box_to_measurement(z);
  s.covariance.setZero();
  s.covariance.topLeftCorner<kMeasDim, kMeasDim>() = detail::measurement_noise(n);
  for (int i = kVx; i <= kVz; ++i) s.covariance(i, i) = n.init_vel_var;
  return s;
}

/// Constant velocity in x/y/z, random walk on yaw and dims.
inline KalmanState predict(const KalmanState& s, double dt, const NoiseConfig& n) {
  using namespace state_index;
  if (!(dt > 0.0)) throw ContractViolation("predict requires dt > 0");
  StateMatrix F = StateMatrix::Identity();
  F(kX, kVx) = dt;
  F(kY, kVy) = dt;
  F(kZ, kVz) = dt;

  StateVector q;
  const double p = n.process_pos_std * n.process_pos_std;
  const double v = n.process_vel_std * n.process_vel_std;
  const double y = n.process_yaw_std * n.process_yaw_std;
  const double d = n.process_dim_std * n.process_dim_std;
  q << p, p, p, y, d, d, d, v, v, v;

  KalmanState out;
  out.mean = F * s.mean;
  out.covariance = F * s.covariance * F.transpose();
  out.covariance.diagonal() += q;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

/// Kalman correction with a box observation. The yaw innovation is wrapped
/// into (-pi, pi]; the covariance uses the Joseph form.
inline KalmanState update(const KalmanState& s, const Box3D& z, const NoiseConfig& n) {
  using namespace state_index;
  Eigen::Matrix<double, kMeasDim, kStateDim> H =
      Eigen::Matrix<double, kMeasDim, kStateDim>::Zero();
  H.leftCols<kMeasDim>().setIdentity();

  MeasVector innovation = detail::box_to_measurement(z) - H * s.mean;
  innovation(kYaw) = normalize_angle(innovation(kYaw));

  const MeasMatrix R = detail::measurement_noise(n);
  MeasMatrix S = H * s.covariance * H.transpose() + R;
  S = 0.5 * (S + S.transpose()).eval();

  Eigen::LLT<MeasMatrix> llt(S);
  if (llt.info() != Eigen::Success) {
    S.diagonal().array() += 1e-6;
    llt.compute(S);
    if (llt.info() != Eigen::Success) {
      throw NumericFailure("innovation covariance is singular");
    }
  }
  // K = P H^T S^-1, solved as S K^T = H P.
  const Eigen::Matrix<double, kStateDim, kMeasDim> K =
      llt.solve(H * s.covariance).transpose();

  KalmanState out;
  out.mean = s.mean + K * innovation;
  const StateMatrix I_KH = StateMatrix::Identity() - K * H;
  out.covariance = I_KH * s.covariance * I_KH.transpose() + K * R * K.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.mean(kYaw) = normalize_angle(out.mean(kYaw));
  for (int i = kLength; i <= kHeight; ++i) out.mean(i) = std::max(out.mean(i), 0.01);
  if (!out.mean.allFinite() || !out.covariance.allFinite()) {
    throw NumericFailure("Kalman update produced non-finite values");
  }
  return out;
}

inline Box3D state_to_box(const KalmanState& s) {
  using namespace state_index;
  const auto& m = s.mean;
  return Box3D(m(kX), m(kY), m(kZ), std::max(m(kLength), 0.01),
               std::max(m(kWidth), 0.01), std::max(m(kHeight), 0.01), m(kYaw));
}

}  // namespace cyctrack
