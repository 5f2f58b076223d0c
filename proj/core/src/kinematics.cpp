#include "cbf_taskstack/kinematics.hpp"

#include "cbf_taskstack/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace cbf_taskstack::kin {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v)
{
  Eigen::Matrix3d S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

Eigen::Isometry3d joint_motion(const Joint& j, double q)
{
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  if (j.type == JointType::kRevolute) {
    T.linear() = Eigen::AngleAxisd(q, j.axis.normalized()).toRotationMatrix();
  } else {
    T.translation() = q * j.axis.normalized();
  }
  return T;
}

void check_dim(const RobotModel& model, const Eigen::VectorXd& q)
{
  if (q.size() != model.dof()) {
    throw DimensionMismatch("configuration has " + std::to_string(q.size()) + " entries, robot '" +
                            model.name + "' has " + std::to_string(model.dof()) + " joints");
  }
}

bool same(const Eigen::Isometry3d& a, const Eigen::Isometry3d& b)
{
  return a.matrix() == b.matrix();
}

}  // namespace

bool Joint::operator==(const Joint& o) const
{
  return type == o.type && axis == o.axis && same(link, o.link);
}

bool RobotModel::operator==(const RobotModel& o) const
{
  return name == o.name && joints == o.joints && limits_lower.size() == o.limits_lower.size() &&
         limits_lower == o.limits_lower && limits_upper.size() == o.limits_upper.size() &&
         limits_upper == o.limits_upper && same(tool, o.tool);
}

void RobotModel::validate() const
{
  if (joints.empty()) {
    throw ConfigError("robot '" + name + "' must have at least one joint");
  }
  const auto n = static_cast<Eigen::Index>(joints.size());
  if (limits_lower.size() != n || limits_upper.size() != n) {
    throw ConfigError("robot '" + name + "' limits must have one entry per joint");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(limits_lower(i) < limits_upper(i))) {
      throw ConfigError("robot '" + name + "' joint " + std::to_string(i) +
                        ": lower limit must be below upper limit");
    }
    if (joints[static_cast<std::size_t>(i)].axis.norm() < 1e-12) {
      throw ConfigError("robot '" + name + "' joint " + std::to_string(i) + " has a zero axis");
    }
  }
}

Eigen::Isometry3d make_transform(const Eigen::Vector3d& translation, const Eigen::Matrix3d& rotation)
{
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rotation;
  T.translation() = translation;
  return T;
}

Eigen::Matrix3d rpy_to_matrix(double roll, double pitch, double yaw)
{
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

RobotModel from_dh(std::string name, const std::vector<DHParameters>& dh,
                   Eigen::VectorXd lower, Eigen::VectorXd upper)
{
  RobotModel model;
  model.name = std::move(name);
  Eigen::Isometry3d previous_fixed = Eigen::Isometry3d::Identity();
  for (const auto& row : dh) {
    Joint j;
    j.type = JointType::kRevolute;
    j.axis = Eigen::Vector3d::UnitZ();
    j.link = previous_fixed * Eigen::AngleAxisd(row.theta, Eigen::Vector3d::UnitZ());
    model.joints.push_back(j);

    previous_fixed = Eigen::Translation3d(0.0, 0.0, row.d) * Eigen::Translation3d(row.a, 0.0, 0.0) *
                     Eigen::AngleAxisd(row.alpha, Eigen::Vector3d::UnitX());
  }
  model.tool = previous_fixed;
  model.limits_lower = std::move(lower);
  model.limits_upper = std::move(upper);
  model.validate();
  return model;
}

RobotModel demo_7dof()
{
  constexpr double kPi = std::numbers::pi;
  constexpr double kLink = 0.3;
  const std::vector<DHParameters> dh = {
      {0.0, -kPi / 2, kLink, 0.0},
      {0.0, kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, kLink, 0.0},
      {0.0, -kPi / 2, 0.0, 0.0},
      {0.0, -kPi / 2, kLink, 0.0},
      {0.0, kPi / 2, 0.0, 0.0},
      {0.0, 0.0, kLink, 0.0},
  };
  Eigen::VectorXd upper(7);
  upper << 2.9, 2.0, 2.9, 2.0, 2.9, 2.0, 3.0;
  return from_dh("demo_7dof", dh, -upper, upper);
}

RobotModel planar_arm(const std::vector<double>& link_lengths, double limit)
{
  RobotModel model;
  model.name = "planar_" + std::to_string(link_lengths.size()) + "link";
  double previous = 0.0;
  for (double len : link_lengths) {
    Joint j;
    j.axis = Eigen::Vector3d::UnitZ();
    j.link = Eigen::Isometry3d(Eigen::Translation3d(previous, 0.0, 0.0));
    model.joints.push_back(j);
    previous = len;
  }
  model.tool = Eigen::Isometry3d(Eigen::Translation3d(previous, 0.0, 0.0));
  const auto n = static_cast<Eigen::Index>(link_lengths.size());
  model.limits_lower = Eigen::VectorXd::Constant(n, -limit);
  model.limits_upper = Eigen::VectorXd::Constant(n, limit);
  model.validate();
  return model;
}

std::vector<Eigen::Isometry3d> joint_frames(const RobotModel& model, const Eigen::VectorXd& q)
{
  check_dim(model, q);
  std::vector<Eigen::Isometry3d> frames;
  frames.reserve(model.joints.size() + 1);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  for (std::size_t i = 0; i < model.joints.size(); ++i) {
    T = T * model.joints[i].link;
    frames.push_back(T);
    T = T * joint_motion(model.joints[i], q(static_cast<Eigen::Index>(i)));
  }
  frames.push_back(T * model.tool);
  return frames;
}

Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q)
{
  const auto frames = joint_frames(model, q);
  return {frames.back().translation(), frames.back().linear()};
}

Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Eigen::VectorXd& q,
                                   const Eigen::Isometry3d& offset)
{
  const auto frames = joint_frames(model, q);
  const Eigen::Vector3d point = (frames.back() * offset).translation();
  const int n = model.dof();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, n);
  for (int i = 0; i < n; ++i) {
    const auto& joint = model.joints[static_cast<std::size_t>(i)];
    const Eigen::Vector3d z = frames[static_cast<std::size_t>(i)].linear() * joint.axis.normalized();
    if (joint.type == JointType::kRevolute) {
      J.block<3, 1>(0, i) = z.cross(point - frames[static_cast<std::size_t>(i)].translation());
      J.block<3, 1>(3, i) = z;
    } else {
      J.block<3, 1>(0, i) = z;
    }
  }
  return J;
}

Eigen::VectorXd DynamicsModel::f(const Eigen::VectorXd& x) const
{
  return drift ? drift(x) : Eigen::VectorXd::Zero(x.size());
}

Eigen::MatrixXd DynamicsModel::g(const Eigen::VectorXd& x) const
{
  return input_map ? input_map(x) : Eigen::MatrixXd::Identity(x.size(), x.size());
}

void CameraModel::validate() const
{
  if (!(focal.x() > 0.0) || !(focal.y() > 0.0)) {
    throw ConfigError("camera focal lengths must be positive");
  }
  if (!(z_min > 0.0)) {
    throw ConfigError("camera z_min must be positive");
  }
}

bool CameraModel::operator==(const CameraModel& o) const
{
  return focal == o.focal && principal_point == o.principal_point && same(mount, o.mount) &&
         target_point == o.target_point && z_min == o.z_min;
}

Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& p)
{
  if (!(p.z() > cam.z_min)) {
    throw BehindCamera("target depth " + std::to_string(p.z()) + " m is not in front of the camera");
  }
  return {cam.focal.x() * p.x() / p.z() + cam.principal_point.x(),
          cam.focal.y() * p.y() / p.z() + cam.principal_point.y()};
}

Eigen::Vector3d target_in_camera(const RobotModel& model, const CameraModel& cam, const Eigen::VectorXd& q)
{
  const auto frames = joint_frames(model, q);
  const Eigen::Isometry3d camera = frames.back() * cam.mount;
  return camera.inverse() * cam.target_point;
}

TaskMap TaskMap::joint_identity(std::shared_ptr<const RobotModel> robot)
{
  TaskMap m;
  m.kind_ = TaskMapKind::kJointIdentity;
  m.output_dim_ = robot->dof();
  m.robot_ = std::move(robot);
  return m;
}

TaskMap TaskMap::ee_position(std::shared_ptr<const RobotModel> robot)
{
  TaskMap m;
  m.kind_ = TaskMapKind::kEePosition;
  m.output_dim_ = 3;
  m.robot_ = std::move(robot);
  return m;
}

TaskMap TaskMap::image_feature(std::shared_ptr<const RobotModel> robot,
                               std::shared_ptr<const CameraModel> camera)
{
  if (!camera) {
    throw ConfigError("image_feature map requires a camera model");
  }
  camera->validate();
  TaskMap m;
  m.kind_ = TaskMapKind::kImageFeature;
  m.output_dim_ = 2;
  m.robot_ = std::move(robot);
  m.camera_ = std::move(camera);
  return m;
}

TaskMap TaskMap::custom(std::shared_ptr<const RobotModel> robot, int output_dim, OutputFn output,
                        JacobianFn jacobian)
{
  if (output_dim <= 0 || !output || !jacobian) {
    throw ConfigError("custom map needs a positive output dimension and both evaluators");
  }
  TaskMap m;
  m.kind_ = TaskMapKind::kCustom;
  m.output_dim_ = output_dim;
  m.robot_ = std::move(robot);
  m.custom_output_ = std::move(output);
  m.custom_jacobian_ = std::move(jacobian);
  return m;
}

void TaskMap::check_state(const RobotState& state) const
{
  check_dim(*robot_, state.q);
}

Eigen::VectorXd TaskMap::output(const RobotState& state) const
{
  check_state(state);
  switch (kind_) {
    case TaskMapKind::kJointIdentity:
      return state.q;
    case TaskMapKind::kEePosition:
      return forward_kinematics(*robot_, state.q).position;
    case TaskMapKind::kImageFeature:
      return project(*camera_, target_in_camera(*robot_, *camera_, state.q));
    case TaskMapKind::kCustom:
      return custom_output_(state.q);
  }
  return {};
}

Eigen::MatrixXd TaskMap::jacobian(const RobotState& state) const
{
  check_state(state);
  const int n = robot_->dof();
  switch (kind_) {
    case TaskMapKind::kJointIdentity:
      return Eigen::MatrixXd::Identity(n, n);
    case TaskMapKind::kEePosition:
      return geometric_jacobian(*robot_, state.q).topRows(3);
    case TaskMapKind::kImageFeature: {
      const auto frames = joint_frames(*robot_, state.q);
      const Eigen::Isometry3d camera = frames.back() * camera_->mount;
      const Eigen::Vector3d p = camera.inverse() * camera_->target_point;
      if (!(p.z() > camera_->z_min)) {
        throw BehindCamera("target depth " + std::to_string(p.z()) + " m is not in front of the camera");
      }
      const Eigen::MatrixXd Jcam = geometric_jacobian(*robot_, state.q, camera_->mount);
      const Eigen::Vector3d r = camera_->target_point - camera.translation();
      // d(p_cam)/dq = R' ([r]x J_w - J_v)
      const Eigen::MatrixXd dp =
          camera.linear().transpose() * (skew(r) * Jcam.bottomRows(3) - Jcam.topRows(3));
      const double z = p.z();
      Eigen::Matrix<double, 2, 3> ds;
      ds << camera_->focal.x() / z, 0.0, -camera_->focal.x() * p.x() / (z * z),
            0.0, camera_->focal.y() / z, -camera_->focal.y() * p.y() / (z * z);
      return ds * dp;
    }
    case TaskMapKind::kCustom:
      return custom_jacobian_(state.q);
  }
  return {};
}

Eigen::MatrixXd numeric_jacobian(const TaskMap& map, const RobotState& state, double step)
{
  if (!(step > 0.0)) {
    throw ConfigError("finite-difference step must be positive");
  }
  const auto n = state.q.size();
  Eigen::MatrixXd J(map.output_dim(), n);
  RobotState probe = state;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe.q(i) = state.q(i) + step;
    const Eigen::VectorXd plus = map.output(probe);
    probe.q(i) = state.q(i) - step;
    const Eigen::VectorXd minus = map.output(probe);
    probe.q(i) = state.q(i);
    J.col(i) = (plus - minus) / (2.0 * step);
  }
  return J;
}

}  // namespace cbf_taskstack::kin
