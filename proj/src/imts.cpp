#include "gmcop/imts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace gmcop {

using nlohmann::json;

void validate(const Dataset& d) {
  if (d.channels < 1) throw std::invalid_argument("Dataset: channels < 1");
  for (std::size_t i = 0; i < d.instances.size(); ++i) {
    const auto& inst = d.instances[i];
    if (inst.targets.size() != static_cast<Eigen::Index>(inst.queries.size()))
      throw std::invalid_argument("Dataset: instance " + std::to_string(i) +
                                  " targets/queries length mismatch");
    for (const auto& o : inst.history)
      if (o.channel < 0 || o.channel >= d.channels)
        throw std::invalid_argument("Dataset: instance " + std::to_string(i) +
                                    " history channel out of range");
    for (const auto& q : inst.queries)
      if (q.channel < 0 || q.channel >= d.channels)
        throw std::invalid_argument("Dataset: instance " + std::to_string(i) +
                                    " query channel out of range");
  }
}

// --- toys --------------------------------------------------------------------

Eigen::MatrixXd gen_x_shape(const ToySpec& spec, std::vector<int>* labels) {
  if (spec.count < 1) throw std::invalid_argument("gen_x_shape: count < 1");
  // Per-ridge correlation 1/sqrt(1+noise^2); the default hits 0.95.
  const double noise = spec.noise > 0.0 ? spec.noise : 0.32879797193902364;
  Rng rng(spec.seed);
  Eigen::MatrixXd out(spec.count, 2);
  if (labels) labels->resize(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const int ridge = rng.uniform() < 0.5 ? 0 : 1;
    const double x = rng.normal();
    const double y = (ridge == 0 ? x : -x) + noise * rng.normal();
    out(i, 0) = x;
    out(i, 1) = y;
    if (labels) (*labels)[i] = ridge;
  }
  return out;
}

Eigen::MatrixXd gen_ring(const ToySpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("gen_ring: count < 1");
  const double r0 = 2.0;
  const double eps = spec.noise > 0.0 ? spec.noise : 0.15;
  Rng rng(spec.seed);
  Eigen::MatrixXd out(spec.count, 2);
  for (int i = 0; i < spec.count; ++i) {
    const double r = r0 + eps * rng.normal();
    const double a = 6.283185307179586477 * rng.uniform();
    out(i, 0) = r * std::cos(a);
    out(i, 1) = r * std::sin(a);
  }
  return out;
}

Eigen::MatrixXd gen_cluster3d(const ToySpec& spec, std::vector<int>* labels) {
  if (spec.count < 1) throw std::invalid_argument("gen_cluster3d: count < 1");
  const double sd = spec.noise > 0.0 ? spec.noise : 0.3;
  const double sd2 = sd / 3.0;  // quasi-discrete cluster coordinate
  const Eigen::Vector3d center_a(-2.5, -2.0, 2.5);
  const Eigen::Vector3d center_b(2.5, 2.0, -2.5);
  Rng rng(spec.seed);
  Eigen::MatrixXd out(spec.count, 3);
  if (labels) labels->resize(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    const int c = rng.uniform() < 0.5 ? 0 : 1;
    const Eigen::Vector3d& mu = c == 0 ? center_a : center_b;
    out(i, 0) = mu[0] + sd * rng.normal();
    out(i, 1) = mu[1] + sd2 * rng.normal();
    out(i, 2) = mu[2] + sd * rng.normal();
    if (labels) (*labels)[i] = c;
  }
  return out;
}

Dataset toy_dataset(const ToySpec& spec) {
  Eigen::MatrixXd samples;
  switch (spec.kind) {
    case ToyKind::x_shape:
      samples = gen_x_shape(spec);
      break;
    case ToyKind::ring:
      samples = gen_ring(spec);
      break;
    case ToyKind::cluster3d:
      samples = gen_cluster3d(spec);
      break;
  }
  const int dims = static_cast<int>(samples.cols());
  Dataset d;
  d.channels = dims;
  d.instances.reserve(samples.rows());
  const double pseudo_t = 0.5;
  for (int i = 0; i < samples.rows(); ++i) {
    ImtsInstance inst;
    inst.queries.reserve(dims);
    for (int c = 0; c < dims; ++c) inst.queries.push_back({pseudo_t, c});
    inst.targets = samples.row(i).transpose();
    d.instances.push_back(std::move(inst));
  }
  return d;
}

// --- synthetic IMTS -----------------------------------------------------------

double ImtsLatent::eval(int channel, double t) const {
  double own = 0.0, shared = 0.0;
  for (int k = 0; k < 3; ++k) {
    own += own_amp(channel, k) * std::sin(own_freq(channel, k) * t + own_phase(channel, k));
    shared += shared_amp[k] * std::sin(shared_freq[k] * t + shared_phase[k]);
  }
  return std::sqrt(1.0 - dependence) * own + std::sqrt(dependence) * shared;
}

Dataset gen_imts(const ImtsGenSpec& spec, std::vector<ImtsLatent>* latents) {
  if (!(spec.sparsity > 0.0 && spec.sparsity <= 1.0))
    throw std::invalid_argument("gen_imts: sparsity outside (0,1]");
  if (spec.horizon <= 0.0 || spec.grid < 5)
    throw std::invalid_argument("gen_imts: degenerate horizon/grid");
  if (spec.dependence < 0.0 || spec.dependence > 1.0)
    throw std::invalid_argument("gen_imts: dependence outside [0,1]");
  Rng rng(spec.seed);
  Dataset d;
  d.channels = spec.channels;
  if (latents) latents->clear();
  const double split_t = 0.8 * spec.horizon;
  for (int s = 0; s < spec.count; ++s) {
    ImtsLatent lat;
    lat.dependence = spec.dependence;
    lat.own_amp.resize(spec.channels, 3);
    lat.own_freq.resize(spec.channels, 3);
    lat.own_phase.resize(spec.channels, 3);
    lat.shared_amp.resize(3);
    lat.shared_freq.resize(3);
    lat.shared_phase.resize(3);
    auto rand_freq = [&] { return (1.0 + 5.0 * rng.uniform()) * 6.283185307179586477 / spec.horizon; };
    for (int c = 0; c < spec.channels; ++c)
      for (int k = 0; k < 3; ++k) {
        lat.own_amp(c, k) = 0.4 + 0.6 * rng.uniform();
        lat.own_freq(c, k) = rand_freq();
        lat.own_phase(c, k) = 6.283185307179586477 * rng.uniform();
      }
    for (int k = 0; k < 3; ++k) {
      lat.shared_amp[k] = 0.4 + 0.6 * rng.uniform();
      lat.shared_freq[k] = rand_freq();
      lat.shared_phase[k] = 6.283185307179586477 * rng.uniform();
    }

    ImtsInstance inst;
    std::vector<double> target_vals;
    for (int c = 0; c < spec.channels; ++c) {
      for (int g = 0; g < spec.grid; ++g) {
        const double t = (g + 0.5) * spec.horizon / spec.grid;
        if (spec.sparsity < 1.0 && rng.uniform() >= spec.sparsity) continue;
        const double y = lat.eval(c, t) + spec.obs_noise * rng.normal();
        if (t < split_t) {
          inst.history.push_back({t, c, y});
        } else {
          inst.queries.push_back({t, c});
          target_vals.push_back(y);
        }
      }
    }
    if (inst.queries.empty()) {
      // Guarantee at least one forecast target per instance.
      const double t = split_t + 0.5 * (spec.horizon - split_t);
      const int c = static_cast<int>(rng.uniform() * spec.channels) % spec.channels;
      inst.queries.push_back({t, c});
      target_vals.push_back(lat.eval(c, t) + spec.obs_noise * rng.normal());
    }
    inst.targets = Eigen::Map<Eigen::VectorXd>(target_vals.data(), target_vals.size());
    d.instances.push_back(std::move(inst));
    if (latents) latents->push_back(std::move(lat));
  }
  return d;
}

// --- io ------------------------------------------------------------------------

void save_imts(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_imts: cannot open " + path);
  json header;
  header["channels"] = d.channels;
  header["version"] = 1;
  out << header.dump() << "\n";
  for (const auto& inst : d.instances) {
    json rec;
    rec["history"] = json::array();
    for (const auto& o : inst.history) rec["history"].push_back({o.t, o.channel, o.value});
    rec["queries"] = json::array();
    for (const auto& q : inst.queries) rec["queries"].push_back({q.t, q.channel});
    rec["targets"] = std::vector<double>(inst.targets.data(),
                                         inst.targets.data() + inst.targets.size());
    out << rec.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_imts: write failed for " + path);
}

Dataset load_imts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_imts: cannot open " + path);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("load_imts: " + path + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) throw std::runtime_error("load_imts: empty file " + path);
  line_no = 1;
  Dataset d;
  try {
    json header = json::parse(line);
    if (!header.contains("channels") || !header.contains("version")) fail("malformed header");
    if (header["version"].get<int>() != 1) fail("unsupported version");
    d.channels = header["channels"].get<int>();
  } catch (const json::exception& e) {
    fail(std::string("header parse error: ") + e.what());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      ImtsInstance inst;
      for (const auto& h : rec.at("history")) {
        Observation o{h.at(0).get<double>(), h.at(1).get<int>(), h.at(2).get<double>()};
        if (o.channel < 0 || o.channel >= d.channels) fail("history channel out of range");
        inst.history.push_back(o);
      }
      for (const auto& q : rec.at("queries")) {
        QueryPoint qp{q.at(0).get<double>(), q.at(1).get<int>()};
        if (qp.channel < 0 || qp.channel >= d.channels) fail("query channel out of range");
        inst.queries.push_back(qp);
      }
      const auto tv = rec.at("targets").get<std::vector<double>>();
      if (tv.size() != inst.queries.size()) fail("targets/queries length mismatch");
      inst.targets = Eigen::Map<const Eigen::VectorXd>(tv.data(), tv.size());
      d.instances.push_back(std::move(inst));
    } catch (const json::exception& e) {
      fail(std::string("record parse error: ") + e.what());
    }
  }
  return d;
}

// --- splits ----------------------------------------------------------------------

SplitIndices split_indices(int count, double train_frac, double val_frac,
                           std::uint64_t seed) {
  if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac >= 1.0)
    throw std::invalid_argument("split_indices: bad fractions");
  std::vector<int> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  // Fisher-Yates with our own uniform draws for cross-platform determinism.
  for (int i = count - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  const int n_train = static_cast<int>(std::round(train_frac * count));
  const int n_val = static_cast<int>(std::round(val_frac * count));
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + std::min(count, n_train + n_val));
  s.test.assign(idx.begin() + std::min(count, n_train + n_val), idx.end());
  return s;
}

Dataset subset(const Dataset& d, const std::vector<int>& indices) {
  Dataset out;
  out.channels = d.channels;
  out.instances.reserve(indices.size());
  for (int i : indices) out.instances.push_back(d.instances.at(i));
  return out;
}

}  // namespace gmcop
