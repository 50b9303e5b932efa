#include "hsim/kinematics.hpp"

#include <algorithm>

namespace hsim {

void KinematicTree::add_link(Link link) {
  if (finalized_) throw KinematicError("tree already finalized");
  if (link_index_.count(link.name)) throw KinematicError("duplicate link " + link.name);
  link_index_[link.name] = static_cast<int>(links_.size());
  links_.push_back(std::move(link));
}

void KinematicTree::add_joint(Joint joint) {
  if (finalized_) throw KinematicError("tree already finalized");
  if (joint_index_.count(joint.name)) throw KinematicError("duplicate joint " + joint.name);
  if (joint.lo > joint.hi) throw KinematicError("joint " + joint.name + ": lo > hi");
  if (joint.vmax < 0.0) throw KinematicError("joint " + joint.name + ": negative vmax");
  joint_index_[joint.name] = static_cast<int>(joints_.size());
  joints_.push_back(std::move(joint));
}

void KinematicTree::finalize() {
  if (finalized_) return;
  const int nl = static_cast<int>(links_.size());
  parent_joint_of_link_.assign(nl, -1);
  int planar_count = 0;
  for (int ji = 0; ji < static_cast<int>(joints_.size()); ++ji) {
    const Joint& j = joints_[ji];
    auto pit = link_index_.find(j.parent);
    auto cit = link_index_.find(j.child);
    if (pit == link_index_.end() || cit == link_index_.end())
      throw KinematicError("joint " + j.name + " references unknown link");
    if (parent_joint_of_link_[cit->second] != -1)
      throw KinematicError("link " + j.child + " has two parent joints");
    parent_joint_of_link_[cit->second] = ji;
    if (j.type == JointType::PlanarBase && ++planar_count > 1)
      throw KinematicError("more than one planar-base joint");
  }
  root_ = -1;
  for (int li = 0; li < nl; ++li) {
    if (parent_joint_of_link_[li] == -1) {
      if (root_ != -1) throw KinematicError("multiple root links");
      root_ = li;
    }
  }
  if (root_ == -1) throw KinematicError("no root link (cycle)");

  // children sorted by joint declaration order for a stable DFS
  std::vector<std::vector<int>> child_joints(nl);
  for (int ji = 0; ji < static_cast<int>(joints_.size()); ++ji)
    child_joints[link_index_[joints_[ji].parent]].push_back(ji);

  dfs_links_.clear();
  joint_dof_start_.assign(joints_.size(), -1);
  dofs_.clear();
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int li = stack.back();
    stack.pop_back();
    dfs_links_.push_back(li);
    // push in reverse so declaration order is visited first
    for (auto it = child_joints[li].rbegin(); it != child_joints[li].rend(); ++it)
      stack.push_back(link_index_[joints_[*it].child]);
    if (int pj = parent_joint_of_link_[li]; pj != -1) {
      const Joint& j = joints_[pj];
      joint_dof_start_[pj] = static_cast<int>(dofs_.size());
      switch (j.type) {
        case JointType::Fixed:
          joint_dof_start_[pj] = -1;
          break;
        case JointType::Revolute:
        case JointType::Prismatic:
          dofs_.push_back({j.name, pj, 0, j.lo, j.hi, j.vmax});
          break;
        case JointType::PlanarBase:
          dofs_.push_back({j.name + "/x", pj, 0, j.lo, j.hi, j.vmax});
          dofs_.push_back({j.name + "/y", pj, 1, j.lo, j.hi, j.vmax});
          dofs_.push_back({j.name + "/theta", pj, 2, -1e9, 1e9, j.vmax});
          break;
      }
    }
  }
  if (dfs_links_.size() != static_cast<size_t>(nl))
    throw KinematicError("disconnected links (forest, not a tree)");
  for (int di = 0; di < static_cast<int>(dofs_.size()); ++di) dof_index_[dofs_[di].name] = di;
  finalized_ = true;
}

bool KinematicTree::has_link(const std::string& name) const { return link_index_.count(name) > 0; }

int KinematicTree::link_index(const std::string& name) const {
  auto it = link_index_.find(name);
  if (it == link_index_.end()) throw KinematicError("unknown link " + name);
  return it->second;
}

int KinematicTree::dof_index(const std::string& dof_name) const {
  auto it = dof_index_.find(dof_name);
  return it == dof_index_.end() ? -1 : it->second;
}

Pose KinematicTree::joint_transform(const Joint& j, std::span<const double> q,
                                    int dof_start) const {
  switch (j.type) {
    case JointType::Fixed:
      return j.origin;
    case JointType::Revolute:
      return j.origin * Pose::rot_axis(j.axis, q[dof_start]);
    case JointType::Prismatic:
      return j.origin * Pose{j.axis.normalized() * q[dof_start], Quat::Identity()};
    case JointType::PlanarBase:
      return j.origin * Pose::translation(q[dof_start], q[dof_start + 1], 0.0) *
             Pose::rot_z(q[dof_start + 2]);
  }
  return j.origin;
}

std::vector<Pose> KinematicTree::fk_all(std::span<const double> q) const {
  if (!finalized_) throw KinematicError("tree not finalized");
  if (q.size() != dofs_.size()) throw KinematicError("configuration size mismatch");
  std::vector<Pose> poses(links_.size());
  for (int li : dfs_links_) {
    int pj = parent_joint_of_link_[li];
    if (pj == -1) {
      poses[li] = Pose::identity();
    } else {
      const Joint& j = joints_[pj];
      poses[li] = poses[link_index_.at(j.parent)] * joint_transform(j, q, joint_dof_start_[pj]);
    }
  }
  return poses;
}

Pose KinematicTree::link_pose(std::span<const double> q, const std::string& link) const {
  return fk_all(q)[link_index(link)];
}

std::vector<int> KinematicTree::chain_to(const std::string& link) const {
  std::vector<int> chain;
  int li = link_index(link);
  while (li != -1) {
    chain.push_back(li);
    int pj = parent_joint_of_link_[li];
    li = pj == -1 ? -1 : link_index_.at(joints_[pj].parent);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

Eigen::MatrixXd KinematicTree::jacobian(std::span<const double> q, const std::string& link,
                                        const Vec3& ref_point_world) const {
  std::vector<Pose> poses = fk_all(q);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, dof_count());
  for (int li : chain_to(link)) {
    int pj = parent_joint_of_link_[li];
    if (pj == -1) continue;
    const Joint& j = joints_[pj];
    int ds = joint_dof_start_[pj];
    if (j.type == JointType::Fixed) continue;
    // frame the joint motion acts in: parent pose composed with the origin
    Pose jf = poses[link_index_.at(j.parent)] * j.origin;
    if (j.type == JointType::Revolute) {
      Vec3 axis_w = jf.q * j.axis.normalized();
      J.block<3, 1>(0, ds) = axis_w.cross(ref_point_world - jf.t);
      J.block<3, 1>(3, ds) = axis_w;
    } else if (j.type == JointType::Prismatic) {
      J.block<3, 1>(0, ds) = jf.q * j.axis.normalized();
    } else {  // PlanarBase
      Vec3 ex = jf.q * Vec3::UnitX();
      Vec3 ey = jf.q * Vec3::UnitY();
      Vec3 ez = jf.q * Vec3::UnitZ();
      // rotation axis passes through the translated base position
      Vec3 base_pos = jf.apply(Vec3(q[ds], q[ds + 1], 0.0));
      J.block<3, 1>(0, ds) = ex;
      J.block<3, 1>(0, ds + 1) = ey;
      J.block<3, 1>(0, ds + 2) = ez.cross(ref_point_world - base_pos);
      J.block<3, 1>(3, ds + 2) = ez;
    }
  }
  return J;
}

}  // namespace hsim
