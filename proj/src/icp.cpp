#include "hsim/icp.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hsim {

namespace {

/// Static kd-tree over a point set; node i splits its range at the median
/// along the widest-spread axis.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& pts) : pts_(pts) {
    idx_.resize(pts.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    axis_.assign(pts.size(), 0);
    build(0, static_cast<int>(pts.size()));
  }

  int nearest(const Vec3& q) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::max();
    search(0, static_cast<int>(pts_.size()), q, best, best_d2);
    return best;
  }

 private:
  void build(int lo, int hi) {
    if (hi - lo <= 1) return;
    Vec3 mn = pts_[idx_[lo]], mx = mn;
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(pts_[idx_[i]]);
      mx = mx.cwiseMax(pts_[idx_[i]]);
    }
    int ax;
    (mx - mn).maxCoeff(&ax);
    int mid = (lo + hi) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](int a, int b) { return pts_[a](ax) < pts_[b](ax); });
    axis_[mid] = ax;
    build(lo, mid);
    build(mid + 1, hi);
  }

  void search(int lo, int hi, const Vec3& q, int& best, double& best_d2) const {
    if (hi <= lo) return;
    int mid = (lo + hi) / 2;
    int p = idx_[mid];
    double d2 = (pts_[p] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = p;
    }
    if (hi - lo == 1) return;
    int ax = axis_[mid];
    double delta = q(ax) - pts_[p](ax);
    if (delta < 0) {
      search(lo, mid, q, best, best_d2);
      if (delta * delta < best_d2) search(mid + 1, hi, q, best, best_d2);
    } else {
      search(mid + 1, hi, q, best, best_d2);
      if (delta * delta < best_d2) search(lo, mid, q, best, best_d2);
    }
  }

  const std::vector<Vec3>& pts_;
  std::vector<int> idx_;
  std::vector<int> axis_;
};

}  // namespace

std::vector<Quat> axis_candidates(bool paper12) {
  static const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1},
                                  {0, 2, 1}, {1, 0, 2}, {2, 1, 0}};
  std::vector<Quat> out;
  for (int pi = 0; pi < 6; ++pi) {
    bool even = pi < 3;
    if (paper12 && !even) continue;
    for (int sbits = 0; sbits < 8; ++sbits) {
      Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
      for (int col = 0; col < 3; ++col)
        m(perms[pi][col], col) = (sbits >> col) & 1 ? -1.0 : 1.0;
      if (m.determinant() < 0.0) continue;  // proper rotations only
      out.emplace_back(m);
    }
  }
  return out;
}

IcpResult icp(const std::vector<Vec3>& model, const std::vector<Vec3>& target, const Pose& init,
              int max_iters, double tol) {
  if (model.empty() || target.empty()) throw std::invalid_argument("icp needs nonempty clouds");
  KdTree tree(target);
  IcpResult r;
  r.transform = init;
  double prev_mse = std::numeric_limits<double>::max();

  std::vector<Vec3> moved(model.size());
  std::vector<int> corr(model.size());
  for (int iter = 0; iter < max_iters; ++iter) {
    Vec3 cm = Vec3::Zero(), ct = Vec3::Zero();
    double mse = 0.0;
    for (size_t i = 0; i < model.size(); ++i) {
      moved[i] = r.transform.apply(model[i]);
      corr[i] = tree.nearest(moved[i]);
      const Vec3& nn = target[corr[i]];
      mse += (moved[i] - nn).squaredNorm();
      cm += moved[i];
      ct += nn;
    }
    mse /= static_cast<double>(model.size());
    r.score = mse;
    r.iterations = iter + 1;
    if (prev_mse - mse < tol) break;
    prev_mse = mse;

    cm /= static_cast<double>(model.size());
    ct /= static_cast<double>(model.size());
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < model.size(); ++i)
      h += (moved[i] - cm) * (target[corr[i]] - ct).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Matrix3d rot = v * u.transpose();
    if (rot.determinant() < 0.0) {
      v.col(2) = -v.col(2);
      rot = v * u.transpose();
    }
    Pose step{ct - rot * cm, Quat(rot)};
    r.transform = step * r.transform;
  }
  return r;
}

}  // namespace hsim
