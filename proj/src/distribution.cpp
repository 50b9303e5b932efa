#include "hsim/distribution.hpp"

#include <numeric>
#include <sstream>

namespace hsim {

bool PoseDistribution::empty_support() const {
  for (double v : w)
    if (v > 0.0) return false;
  return true;
}

void PoseDistribution::normalize() {
  double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (sum <= 0.0) throw EmptySupport("pose distribution has empty support");
  for (double& v : w) v /= sum;
}

int PoseDistribution::argmax() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(w.size()); ++i)
    if (w[i] > w[best]) best = i;
  return best;
}

int PoseDistribution::sample_index(Rng& rng) const {
  double u = rng.uniform(0.0, 1.0);
  double acc = 0.0;
  int last_support = -1;
  for (int i = 0; i < static_cast<int>(w.size()); ++i) {
    if (w[i] <= 0.0) continue;
    last_support = i;
    acc += w[i];
    if (u <= acc) return i;
  }
  if (last_support < 0) throw EmptySupport("sampling from empty support");
  return last_support;  // guard against rounding at u ≈ 1
}

Pose PoseDistribution::sample(Rng& rng) const {
  int i = sample_index(rng);
  int it = i % ntheta;
  int iy = (i / ntheta) % ny;
  int ix = i / (ntheta * ny);
  return pose_at(ix, iy, it);
}

std::string PoseDistribution::to_csv() const {
  std::ostringstream out;
  out << "x,y,theta,weight\n";
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int it = 0; it < ntheta; ++it) {
        double v = at(ix, iy, it);
        if (v > 0.0)
          out << x_of(ix) << "," << y_of(iy) << "," << theta_of(it) << "," << v << "\n";
      }
  return out.str();
}

}  // namespace hsim
