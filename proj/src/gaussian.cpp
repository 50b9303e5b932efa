#include "hsim/gaussian.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hsim {

namespace {

double wrap_pi(double a) { return std::remainder(a, 2.0 * M_PI); }

double circular_mean(const std::vector<double>& angles) {
  double s = 0, c = 0;
  for (double a : angles) {
    s += std::sin(a);
    c += std::cos(a);
  }
  return std::atan2(s, c);
}

}  // namespace

double GaussianModel::density(const Eigen::VectorXd& x) const {
  Eigen::VectorXd d = x - mean;
  if (theta_index >= 0) d(theta_index) = wrap_pi(x(theta_index) - mean(theta_index));
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("covariance not positive-definite");
  Eigen::VectorXd y = llt.matrixL().solve(d);
  double log_det = 0.0;
  for (int i = 0; i < cov.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  double k = static_cast<double>(cov.rows());
  double log_p = -0.5 * (y.squaredNorm() + log_det + k * std::log(2.0 * M_PI));
  return std::exp(log_p);
}

GaussianModel fit(const std::vector<Episode>& episodes, const std::string& task_key,
                  const FitOptions& opt) {
  std::vector<const Episode*> ok;
  for (const Episode& e : episodes)
    if (e.task_key == task_key && e.success) ok.push_back(&e);
  if (ok.empty()) throw InsufficientData("no successful episodes for " + task_key);
  int k = static_cast<int>(ok.front()->params.size());
  for (const Episode* e : ok)
    if (static_cast<int>(e->params.size()) != k)
      throw EpisodeSchemaError("inconsistent parameter dimension for " + task_key);
  int n = static_cast<int>(ok.size());
  if (n < k + 1)
    throw InsufficientData("need at least " + std::to_string(k + 1) + " successes for " +
                           task_key + ", have " + std::to_string(n));

  GaussianModel m;
  m.task_key = task_key;
  m.count = n;
  m.theta_index = (opt.theta_index >= 0 && opt.theta_index < k) ? opt.theta_index : -1;
  m.mean = Eigen::VectorXd::Zero(k);
  for (const Episode* e : ok)
    for (int i = 0; i < k; ++i) m.mean(i) += e->params[i];
  m.mean /= n;
  if (m.theta_index >= 0) {
    std::vector<double> angles;
    angles.reserve(n);
    for (const Episode* e : ok) angles.push_back(e->params[m.theta_index]);
    m.mean(m.theta_index) = circular_mean(angles);
  }

  m.cov = Eigen::MatrixXd::Zero(k, k);
  for (const Episode* e : ok) {
    Eigen::VectorXd d(k);
    for (int i = 0; i < k; ++i) d(i) = e->params[i] - m.mean(i);
    if (m.theta_index >= 0) d(m.theta_index) = wrap_pi(d(m.theta_index));
    m.cov += d * d.transpose();
  }
  m.cov /= n;
  m.cov += opt.ridge * Eigen::MatrixXd::Identity(k, k);
  return m;
}

void GaussianModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model: " + path);
  out.precision(17);
  int k = static_cast<int>(mean.size());
  out << "hsim-gaussian-1\n" << task_key << "\n" << k << " " << count << " " << theta_index
      << "\n";
  for (int i = 0; i < k; ++i) out << mean(i) << (i + 1 == k ? "\n" : " ");
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) out << cov(i, j) << (j + 1 == k ? "\n" : " ");
}

static GaussianModel load_model_stream(std::istream& in, const std::string& path) {
  std::string tag;
  std::getline(in, tag);
  if (tag != "hsim-gaussian-1") throw std::runtime_error("bad model file format: " + path);
  GaussianModel m;
  std::getline(in, m.task_key);
  int k = 0;
  in >> k >> m.count >> m.theta_index;
  if (!in || k <= 0) throw std::runtime_error("bad model file header: " + path);
  m.mean.resize(k);
  for (int i = 0; i < k; ++i) in >> m.mean(i);
  m.cov.resize(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) in >> m.cov(i, j);
  if (!in) throw std::runtime_error("truncated model file: " + path);
  return m;
}

GaussianModel GaussianModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  return load_model_stream(in, path);
}

CombinedDistribution combine(const GaussianModel& model, const PoseDistribution& prior) {
  if (model.mean.size() != 3)
    throw std::invalid_argument("combine expects a base-pose model (x, y, theta)");
  CombinedDistribution out;
  out.learned = model;
  out.prior = prior;
  out.product = prior;
  Eigen::VectorXd x(3);
  for (int ix = 0; ix < prior.nx; ++ix)
    for (int iy = 0; iy < prior.ny; ++iy)
      for (int it = 0; it < prior.ntheta; ++it) {
        double p = prior.at(ix, iy, it);
        if (p <= 0.0) {
          out.product.at(ix, iy, it) = 0.0;
          continue;
        }
        x << prior.x_of(ix), prior.y_of(iy), prior.theta_of(it);
        out.product.at(ix, iy, it) = p * model.density(x);
      }
  try {
    out.product.normalize();
  } catch (const EmptySupport&) {
    throw EmptySupport("combined distribution has empty support");
  }
  return out;
}

std::vector<Eigen::Vector3d> sample(const CombinedDistribution& dist, uint64_t seed, int n) {
  if (dist.product.empty_support()) throw EmptySupport("sampling from empty support");
  Rng rng = Rng(seed).derive("specialized-sample");
  std::vector<Eigen::Vector3d> out;
  out.reserve(n);
  const PoseDistribution& d = dist.product;
  for (int i = 0; i < n; ++i) {
    int idx = d.sample_index(rng);
    int it = idx % d.ntheta;
    int iy = (idx / d.ntheta) % d.ny;
    int ix = idx / (d.ntheta * d.ny);
    out.emplace_back(d.x_of(ix), d.y_of(iy), d.theta_of(it));
  }
  return out;
}

}  // namespace hsim
