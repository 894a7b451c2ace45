#include "gmcop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gmcop {

namespace {

/// sum_{s != s'} |x_s - x_s'| in O(S log S) via sorted prefix sums.
double pairwise_abs_sum(Eigen::VectorXd x) {
  std::sort(x.data(), x.data() + x.size());
  double acc = 0.0;
  double prefix = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    acc += i * x[i] - prefix;
    prefix += x[i];
  }
  return 2.0 * acc;
}

}  // namespace

double mnll(const JointModel& model, const ImtsInstance& instance) {
  const int n = instance.query_count();
  if (n < 1) throw std::invalid_argument("mnll: no queries");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const ImtsInstance single = with_queries(instance, {i});
    acc += -joint_loglik(model, single);
  }
  return acc / n;
}

double empirical_w1(Eigen::VectorXd a, Eigen::VectorXd b) {
  if (a.size() != b.size()) throw std::invalid_argument("empirical_w1: length mismatch");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  return (a - b).cwiseAbs().mean();
}

double energy_score(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target) {
  const int s = static_cast<int>(samples.rows());
  if (s < 2) throw std::invalid_argument("energy_score: need at least two samples");
  if (samples.cols() != target.size())
    throw std::invalid_argument("energy_score: dimension mismatch");
  double to_target = 0.0;
  for (int i = 0; i < s; ++i) to_target += (samples.row(i).transpose() - target).norm();
  to_target /= s;
  double pairwise = 0.0;
  if (samples.cols() == 1) {
    pairwise = pairwise_abs_sum(samples.col(0));
  } else {
    for (int i = 0; i < s; ++i)
      for (int j = i + 1; j < s; ++j)
        pairwise += 2.0 * (samples.row(i) - samples.row(j)).norm();
  }
  return to_target - pairwise / (2.0 * s * (s - 1.0));
}

double crps(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target) {
  const int s = static_cast<int>(samples.rows());
  if (s < 2) throw std::invalid_argument("crps: need at least two samples");
  if (samples.cols() != target.size()) throw std::invalid_argument("crps: dimension mismatch");
  double acc = 0.0;
  for (int d = 0; d < samples.cols(); ++d) {
    const double to_target = (samples.col(d).array() - target[d]).abs().mean();
    const double pairwise = pairwise_abs_sum(samples.col(d));
    acc += to_target - pairwise / (2.0 * s * (s - 1.0));
  }
  return acc / samples.cols();
}

double mse(const Eigen::MatrixXd& samples, const Eigen::VectorXd& target) {
  if (samples.rows() < 1) throw std::invalid_argument("mse: no samples");
  if (samples.cols() != target.size()) throw std::invalid_argument("mse: dimension mismatch");
  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  return (mean - target).squaredNorm() / target.size();
}

double ks_uniform_statistic(Eigen::VectorXd u) {
  std::sort(u.data(), u.data() + u.size());
  const int n = static_cast<int>(u.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    d = std::max(d, std::abs((i + 1.0) / n - u[i]));
    d = std::max(d, std::abs(u[i] - static_cast<double>(i) / n));
  }
  return d;
}

namespace {

struct InstanceMetrics {
  std::map<std::string, double> values;
};

InstanceMetrics evaluate_instance(const JointModel& model, const ImtsInstance& inst,
                                  const std::vector<std::string>& metrics, int sample_count,
                                  std::uint64_t seed) {
  InstanceMetrics out;
  bool need_samples = false;
  for (const auto& m : metrics)
    need_samples = need_samples || m == "mse" || m == "es" || m == "crps" || m == "w1";

  Eigen::MatrixXd samples;
  Eigen::MatrixXd marg_samples;
  if (need_samples) {
    Rng rng(seed);
    samples = model.has_copula ? sample_joint(model, inst, sample_count, rng)
                               : sample_marginals(model, inst, sample_count, rng);
    marg_samples = sample_marginals(model, inst, sample_count, rng);
  }
  for (const auto& m : metrics) {
    if (m == "njnll") {
      out.values[m] = -joint_loglik(model, inst) / inst.query_count();
    } else if (m == "mnll") {
      out.values[m] = mnll(model, inst);
    } else if (m == "mse") {
      out.values[m] = mse(samples, inst.targets);
    } else if (m == "es") {
      out.values[m] = energy_score(samples, inst.targets);
    } else if (m == "crps") {
      out.values[m] = crps(samples, inst.targets);
    } else if (m == "w1") {
      double acc = 0.0;
      for (int d = 0; d < samples.cols(); ++d)
        acc += empirical_w1(samples.col(d), marg_samples.col(d));
      out.values[m] = acc / samples.cols();
    }
  }
  return out;
}

}  // namespace

MetricReport evaluate_model(const JointModel& model, const Dataset& data,
                            const std::vector<std::string>& metrics, int sample_count,
                            std::uint64_t seed, int threads) {
  for (const auto& m : metrics) {
    const auto& known = known_metrics();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      std::string valid;
      for (const auto& k : known) valid += (valid.empty() ? "" : ", ") + k;
      throw std::invalid_argument("evaluate_model: unknown metric '" + m +
                                  "' (valid: " + valid + ")");
    }
  }
  const int n = static_cast<int>(data.instances.size());
  MetricReport report;
  report.metric_names = metrics;
  report.sample_count = sample_count;
  report.per_instance.resize(n, static_cast<int>(metrics.size()));

  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = seed ^ (0x9E3779B97F4A7C15ull * (i + 1));

  auto run_range = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const InstanceMetrics im =
          evaluate_instance(model, data.instances[i], metrics, sample_count, seeds[i]);
      for (std::size_t m = 0; m < metrics.size(); ++m)
        report.per_instance(i, static_cast<int>(m)) = im.values.at(metrics[m]);
    }
  };

  if (threads <= 1 || n < 2) {
    run_range(0, n);
  } else {
    const int workers = std::min(threads, n);
    std::vector<std::future<void>> futures;
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(n, begin + chunk);
      if (begin >= end) break;
      futures.push_back(std::async(std::launch::async, run_range, begin, end));
    }
    for (auto& f : futures) f.get();
  }

  const int mcount = static_cast<int>(metrics.size());
  report.means.resize(mcount);
  report.stddevs.resize(mcount);
  for (int m = 0; m < mcount; ++m) {
    const auto col = report.per_instance.col(m);
    report.means[m] = col.mean();
    report.stddevs[m] =
        n > 1 ? std::sqrt((col.array() - report.means[m]).square().sum() / (n - 1)) : 0.0;
  }
  return report;
}

void write_metric_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metric_csv: cannot open " + path);
  out << "instance";
  for (const auto& m : report.metric_names) out << "," << m;
  out << "\n";
  out.precision(17);
  for (int i = 0; i < report.per_instance.rows(); ++i) {
    out << i;
    for (int m = 0; m < report.per_instance.cols(); ++m) out << "," << report.per_instance(i, m);
    out << "\n";
  }
  out << "mean";
  for (int m = 0; m < report.means.size(); ++m) out << "," << report.means[m];
  out << "\nstddev";
  for (int m = 0; m < report.stddevs.size(); ++m) out << "," << report.stddevs[m];
  out << "\n";
}

std::string format_metric_table(const MetricReport& report) {
  std::ostringstream os;
  os << std::setw(10) << "metric" << std::setw(16) << "mean" << std::setw(16) << "stddev"
     << "\n";
  for (std::size_t m = 0; m < report.metric_names.size(); ++m)
    os << std::setw(10) << report.metric_names[m] << std::setw(16) << std::setprecision(6)
       << report.means[static_cast<int>(m)] << std::setw(16)
       << report.stddevs[static_cast<int>(m)] << "\n";
  os << "(S = " << report.sample_count << ", instances = " << report.per_instance.rows()
     << ")\n";
  return os.str();
}

}  // namespace gmcop
