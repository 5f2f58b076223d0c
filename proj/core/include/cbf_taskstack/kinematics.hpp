#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cbf_taskstack::kin {

enum class JointType { kRevolute, kPrismatic };

/**
 * One joint of a serial chain. `link` is the fixed transform from the
 * previous joint's moving frame (or the base) to this joint's frame; the
 * joint then rotates about / slides along `axis` expressed in that frame.
 */
struct Joint
{
  JointType type = JointType::kRevolute;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Isometry3d link = Eigen::Isometry3d::Identity();

  bool operator==(const Joint& o) const;
};

struct RobotModel
{
  std::string name;
  std::vector<Joint> joints;
  Eigen::VectorXd limits_lower;
  Eigen::VectorXd limits_upper;
  /// Fixed transform from the last joint frame to the end effector.
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();

  int dof() const { return static_cast<int>(joints.size()); }

  /// Throws ConfigError when the model violates its invariants.
  void validate() const;

  bool operator==(const RobotModel& o) const;
};

struct RobotState
{
  Eigen::VectorXd q;
  double t = 0.0;
};

/// Standard Denavit-Hartenberg row: Rz(theta + q) Tz(d) Tx(a) Rx(alpha).
struct DHParameters
{
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta = 0.0;
};

/// Converts a revolute DH table to the per-joint product-of-transforms form.
RobotModel from_dh(std::string name, const std::vector<DHParameters>& dh,
                   Eigen::VectorXd lower, Eigen::VectorXd upper);

/// 7-DoF demo arm with alternating axes and 0.3 m links.
RobotModel demo_7dof();

/// Planar arm with revolute joints about z, links along x.
RobotModel planar_arm(const std::vector<double>& link_lengths, double limit = 3.0);

struct Pose
{
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

/// Throws DimensionMismatch.
Pose forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

/// World poses of each joint frame (after its link transform, before its
/// motion), followed by the end-effector frame.
std::vector<Eigen::Isometry3d> joint_frames(const RobotModel& model, const Eigen::VectorXd& q);

/// 6 x n geometric Jacobian of a point rigidly attached to the end effector,
/// given by `offset` in the end-effector frame. Rows: linear, then angular.
Eigen::MatrixXd geometric_jacobian(const RobotModel& model, const Eigen::VectorXd& q,
                                   const Eigen::Isometry3d& offset = Eigen::Isometry3d::Identity());

/// Single-integrator dynamics by default: f = 0, g = I.
struct DynamicsModel
{
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> input_map;

  Eigen::VectorXd f(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd g(const Eigen::VectorXd& x) const;

  static DynamicsModel velocity_resolved() { return {}; }
};

struct CameraModel
{
  Eigen::Vector2d focal{500.0, 500.0};
  Eigen::Vector2d principal_point{320.0, 240.0};
  /// Camera pose in the end-effector frame.
  Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
  /// Observed point in the world frame.
  Eigen::Vector3d target_point = Eigen::Vector3d::Zero();
  double z_min = 1e-6;

  void validate() const;
  bool operator==(const CameraModel& o) const;
};

/// Pinhole projection of a camera-frame point. Throws BehindCamera.
Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& p_cam);

/// Target point expressed in the camera frame at configuration q.
Eigen::Vector3d target_in_camera(const RobotModel& model, const CameraModel& cam,
                                 const Eigen::VectorXd& q);

enum class TaskMapKind { kJointIdentity, kEePosition, kImageFeature, kCustom };

/// Output map sigma = k(q) of a task together with its analytic Jacobian.
class TaskMap
{
public:
  using OutputFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  static TaskMap joint_identity(std::shared_ptr<const RobotModel> robot);
  static TaskMap ee_position(std::shared_ptr<const RobotModel> robot);
  static TaskMap image_feature(std::shared_ptr<const RobotModel> robot,
                               std::shared_ptr<const CameraModel> camera);
  static TaskMap custom(std::shared_ptr<const RobotModel> robot, int output_dim,
                        OutputFn output, JacobianFn jacobian);

  TaskMapKind kind() const { return kind_; }
  int output_dim() const { return output_dim_; }
  const RobotModel& robot() const { return *robot_; }
  const std::shared_ptr<const CameraModel>& camera() const { return camera_; }

  Eigen::VectorXd output(const RobotState& state) const;
  Eigen::MatrixXd jacobian(const RobotState& state) const;

private:
  TaskMap() = default;
  void check_state(const RobotState& state) const;

  TaskMapKind kind_ = TaskMapKind::kJointIdentity;
  int output_dim_ = 0;
  std::shared_ptr<const RobotModel> robot_;
  std::shared_ptr<const CameraModel> camera_;
  OutputFn custom_output_;
  JacobianFn custom_jacobian_;
};

inline Eigen::VectorXd task_output(const TaskMap& map, const RobotState& state)
{
  return map.output(state);
}

inline Eigen::MatrixXd task_jacobian(const TaskMap& map, const RobotState& state)
{
  return map.jacobian(state);
}

/// Central finite differences of task_output, one column per joint.
Eigen::MatrixXd numeric_jacobian(const TaskMap& map, const RobotState& state, double step = 1e-6);

Eigen::Isometry3d make_transform(const Eigen::Vector3d& translation, const Eigen::Matrix3d& rotation);
Eigen::Matrix3d rpy_to_matrix(double roll, double pitch, double yaw);

}  // namespace cbf_taskstack::kin
