#include "gmcop/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gmcop {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return v;
}

void add_meta(ParamStore& store, const std::string& key, double value) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = value;
  store.add("meta/" + key, m);
}

double get_meta(const ParamStore& store, const std::string& key) {
  return store.at("meta/" + key)(0, 0);
}

}  // namespace

void save_store(const std::string& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_store: cannot open " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(store.size()));
  for (const auto& name : store.names()) {
    const Eigen::MatrixXd& m = store.at(name);
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(m.rows()));
    write_pod(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod(out, m(r, c));
  }
  if (!out) throw std::runtime_error("save_store: write failed for " + path);
}

ParamStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_store: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_store: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw std::runtime_error("load_store: unsupported version in " + path);
  const auto count = read_pod<std::uint64_t>(in, path);
  ParamStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("load_store: truncated file " + path);
    const auto rows = read_pod<std::uint64_t>(in, path);
    const auto cols = read_pod<std::uint64_t>(in, path);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint64_t r = 0; r < rows; ++r)
      for (std::uint64_t c = 0; c < cols; ++c) m(r, c) = read_pod<double>(in, path);
    store.add(name, std::move(m));
  }
  return store;
}

void save_model(const std::string& path, const JointModel& model) {
  ParamStore store;
  add_meta(store, "format", 1);
  add_meta(store, "channels", model.marg.enc.channels);
  add_meta(store, "horizon", model.marg.enc.horizon);
  add_meta(store, "channel_embed_dim", model.marg.enc.channel_embed_dim);
  add_meta(store, "obs_hidden", model.marg.enc.obs_hidden);
  add_meta(store, "pool_dim", model.marg.enc.pool_dim);
  add_meta(store, "final_hidden", model.marg.enc.final_hidden);
  add_meta(store, "embed_dim", model.marg.enc.embed_dim);
  add_meta(store, "time_freqs", model.marg.enc.time_freqs);
  add_meta(store, "flow_layers", model.marg.flow_layers);
  add_meta(store, "flow_width", model.marg.flow_width);
  add_meta(store, "cond_layers", model.marg.cond_layers);
  add_meta(store, "cond_hidden", model.marg.cond_hidden);
  add_meta(store, "has_copula", model.has_copula ? 1 : 0);
  if (model.has_copula) {
    add_meta(store, "cop_channel_embed_dim", model.cop.enc.channel_embed_dim);
    add_meta(store, "cop_obs_hidden", model.cop.enc.obs_hidden);
    add_meta(store, "cop_pool_dim", model.cop.enc.pool_dim);
    add_meta(store, "cop_final_hidden", model.cop.enc.final_hidden);
    add_meta(store, "cop_embed_dim", model.cop.enc.embed_dim);
    add_meta(store, "cop_time_freqs", model.cop.enc.time_freqs);
    add_meta(store, "components", model.cop.components);
    add_meta(store, "corr_rank", model.cop.corr_rank);
    add_meta(store, "head_hidden", model.cop.head_hidden);
    add_meta(store, "mix_gc", model.cop.mix_gc ? 1 : 0);
  }
  for (const auto& name : model.params.names()) store.add(name, model.params.at(name));
  save_store(path, store);
}

JointModel load_model(const std::string& path) {
  ParamStore store = load_store(path);
  JointModel model;
  auto geti = [&](const std::string& k) { return static_cast<int>(get_meta(store, k)); };
  model.marg.enc.prefix = "marginal/enc";
  model.marg.enc.channels = geti("channels");
  model.marg.enc.horizon = get_meta(store, "horizon");
  model.marg.enc.channel_embed_dim = geti("channel_embed_dim");
  model.marg.enc.obs_hidden = geti("obs_hidden");
  model.marg.enc.pool_dim = geti("pool_dim");
  model.marg.enc.final_hidden = geti("final_hidden");
  model.marg.enc.embed_dim = geti("embed_dim");
  model.marg.enc.time_freqs = geti("time_freqs");
  model.marg.flow_layers = geti("flow_layers");
  model.marg.flow_width = geti("flow_width");
  model.marg.cond_layers = geti("cond_layers");
  model.marg.cond_hidden = geti("cond_hidden");
  model.has_copula = geti("has_copula") != 0;
  if (model.has_copula) {
    model.cop.enc.prefix = "copula/enc";
    model.cop.enc.channels = model.marg.enc.channels;
    model.cop.enc.horizon = model.marg.enc.horizon;
    model.cop.enc.global_summary = true;
    model.cop.enc.channel_embed_dim = geti("cop_channel_embed_dim");
    model.cop.enc.obs_hidden = geti("cop_obs_hidden");
    model.cop.enc.pool_dim = geti("cop_pool_dim");
    model.cop.enc.final_hidden = geti("cop_final_hidden");
    model.cop.enc.embed_dim = geti("cop_embed_dim");
    model.cop.enc.time_freqs = geti("cop_time_freqs");
    model.cop.components = geti("components");
    model.cop.corr_rank = geti("corr_rank");
    model.cop.head_hidden = geti("head_hidden");
    model.cop.mix_gc = geti("mix_gc") != 0;
  }
  for (const auto& name : store.names())
    if (name.rfind("meta/", 0) != 0) model.params.add(name, store.at(name));
  return model;
}

}  // namespace gmcop
