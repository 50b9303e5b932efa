#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsim/geom.hpp"

namespace hsim {

enum class JointType { Fixed, Revolute, Prismatic, PlanarBase };

struct Joint {
  std::string name;
  JointType type = JointType::Fixed;
  std::string parent;
  std::string child;
  Pose origin;                   // child frame relative to parent at q = 0
  Vec3 axis{0.0, 0.0, 1.0};      // in the joint origin frame
  double lo = 0.0, hi = 0.0;     // position limits (per planar-base dof: x, y, theta share)
  double vmax = 1.0;             // velocity limit, >= 0
};

struct LinkShape {
  Shape shape;
  Pose local;  // shape frame relative to link frame
};

struct Link {
  std::string name;
  std::vector<LinkShape> shapes;
};

struct DofInfo {
  std::string name;
  int joint = -1;  // index into joints()
  int sub = 0;     // planar base: 0=x, 1=y, 2=theta
  double lo = 0.0, hi = 0.0;
  double vmax = 1.0;
};

class KinematicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rigid kinematic tree. Root link sits at identity in the world frame.
/// DOF order is fixed at finalize() time: depth-first over the tree.
class KinematicTree {
 public:
  void add_link(Link link);
  void add_joint(Joint joint);

  /// Validates tree structure and freezes the DOF ordering. Throws
  /// KinematicError on cycles, multiple roots, bad limits or a second
  /// planar-base joint.
  void finalize();

  bool finalized() const { return finalized_; }
  int dof_count() const { return static_cast<int>(dofs_.size()); }
  const std::vector<DofInfo>& dofs() const { return dofs_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::string& root_link() const { return links_[root_].name; }

  bool has_link(const std::string& name) const;
  int link_index(const std::string& name) const;  // throws KinematicError
  int dof_index(const std::string& dof_name) const;  // -1 if absent

  /// World poses of all links for configuration q (dof order).
  std::vector<Pose> fk_all(std::span<const double> q) const;

  Pose link_pose(std::span<const double> q, const std::string& link) const;

  /// 6 x dof_count() Jacobian of a reference point rigidly attached to
  /// `link`: rows 0-2 linear velocity of the point, rows 3-5 angular.
  Eigen::MatrixXd jacobian(std::span<const double> q, const std::string& link,
                           const Vec3& ref_point_world) const;

  /// Links on the chain from root to `link` (inclusive), by index.
  std::vector<int> chain_to(const std::string& link) const;

  /// Index of the joint whose child is this link, -1 for the root.
  int parent_joint(int link_index) const { return parent_joint_of_link_[link_index]; }

 private:
  Pose joint_transform(const Joint& j, std::span<const double> q, int dof_start) const;

  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::map<std::string, int> link_index_;
  std::map<std::string, int> joint_index_;
  std::map<std::string, int> dof_index_;
  std::vector<int> parent_joint_of_link_;
  std::vector<int> dfs_links_;   // topological order, root first
  std::vector<int> joint_dof_start_;
  std::vector<DofInfo> dofs_;
  int root_ = -1;
  bool finalized_ = false;
};

}  // namespace hsim
