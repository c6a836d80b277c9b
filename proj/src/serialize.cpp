#include "qrl/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qrl {

namespace {

constexpr char kCkptMagic[8] = {'Q', 'R', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr char kEpisMagic[8] = {'Q', 'R', 'L', 'E', 'P', 'I', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_vec(std::ostream& os, const std::vector<double>& v) {
  put_u64(os, v.size());
  for (double x : v) put_f64(os, x);
}

void need(std::istream& is, const char* what) {
  if (!is) throw std::runtime_error(std::string("binary container truncated while reading ") + what);
}
std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  need(is, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  need(is, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }
std::string get_str(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ull << 32)) throw std::runtime_error("binary container: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  need(is, "string");
  return s;
}
std::vector<double> get_vec(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  if (n > (1ull << 32)) throw std::runtime_error("binary container: implausible vector length");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(is);
  return v;
}

void check_header(std::istream& is, const char* magic, const char* what) {
  char m[8];
  is.read(m, 8);
  if (!is || std::memcmp(m, magic, 8) != 0) throw std::runtime_error(std::string("not a ") + what + " file");
  const std::uint32_t v = get_u32(is);
  if (v != kVersion) throw std::runtime_error(std::string(what) + ": unsupported version " + std::to_string(v));
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCkptMagic, 8);
  put_u32(os, kVersion);
  put_str(os, ck.model_kind);
  put_i32(os, ck.input_dim);
  put_i32(os, ck.action_dim);
  put_i32(os, ck.lstm_units);
  put_u64(os, ck.dense.size());
  for (int w : ck.dense) put_i32(os, w);
  put_f64(os, ck.init_std);
  put_vec(os, ck.theta);
  put_vec(os, ck.adam.m);
  put_vec(os, ck.adam.v);
  put_u64(os, static_cast<std::uint64_t>(ck.adam.step));
  put_i32(os, ck.epoch);
  put_u64(os, static_cast<std::uint64_t>(ck.episodes));
  put_u64(os, ck.seed);
  put_f64(os, ck.best_metric);
  put_str(os, ck.config);
  if (!os) throw std::runtime_error("write_checkpoint: stream error");
}

Checkpoint read_checkpoint(std::istream& is) {
  check_header(is, kCkptMagic, "checkpoint");
  Checkpoint ck;
  ck.model_kind = get_str(is);
  ck.input_dim = get_i32(is);
  ck.action_dim = get_i32(is);
  ck.lstm_units = get_i32(is);
  const std::uint64_t nd = get_u64(is);
  if (nd > 64) throw std::runtime_error("checkpoint: implausible layer count");
  ck.dense.resize(nd);
  for (auto& w : ck.dense) w = get_i32(is);
  ck.init_std = get_f64(is);
  ck.theta = get_vec(is);
  ck.adam.m = get_vec(is);
  ck.adam.v = get_vec(is);
  ck.adam.step = static_cast<std::int64_t>(get_u64(is));
  ck.epoch = get_i32(is);
  ck.episodes = static_cast<std::int64_t>(get_u64(is));
  ck.seed = get_u64(is);
  ck.best_metric = get_f64(is);
  ck.config = get_str(is);
  if (ck.adam.m.size() != ck.theta.size() || ck.adam.v.size() != ck.theta.size())
    throw std::runtime_error("checkpoint: Adam moments do not match the weights");
  return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    write_checkpoint(os, ck);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint to " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint(is);
}

Checkpoint make_checkpoint(const TrainableModel& model, const AdamState& adam, int epoch, std::int64_t episodes,
                           std::uint64_t seed, double best_metric, const std::string& config) {
  Checkpoint ck;
  ck.model_kind = model.kind();
  ck.input_dim = model.input_dim();
  ck.action_dim = model.action_dim();
  if (const auto* rec = dynamic_cast<const RecurrentGaussianModel*>(&model)) {
    ck.lstm_units = rec->params().arch().lstm_units;
    ck.dense = rec->params().arch().dense;
    ck.init_std = rec->params().arch().init_std;
  }
  ck.theta = model.theta();
  ck.adam = adam;
  ck.epoch = epoch;
  ck.episodes = episodes;
  ck.seed = seed;
  ck.best_metric = best_metric;
  ck.config = config;
  return ck;
}

std::unique_ptr<TrainableModel> model_from_checkpoint(const Checkpoint& ck) {
  std::unique_ptr<TrainableModel> model;
  if (ck.model_kind == "recurrent") {
    PolicyArch arch{ck.input_dim, ck.action_dim, ck.lstm_units, ck.dense, ck.init_std};
    model = std::make_unique<RecurrentGaussianModel>(PolicyParams(arch, 0));
  } else if (ck.model_kind == "constant") {
    model = std::make_unique<ConstantGaussianModel>(ck.input_dim, std::vector<double>(ck.action_dim, 0.0),
                                                    std::vector<double>(ck.action_dim, 0.0));
  } else {
    throw std::runtime_error("checkpoint: unknown model kind '" + ck.model_kind + "'");
  }
  if (model->theta().size() != ck.theta.size()) throw std::runtime_error("checkpoint: weight count mismatch");
  model->theta() = ck.theta;
  return model;
}

void write_batch(std::ostream& os, const Batch& batch) {
  os.write(kEpisMagic, 8);
  put_u32(os, kVersion);
  const std::uint32_t B = static_cast<std::uint32_t>(batch.episodes.size());
  const std::uint32_t T = B ? static_cast<std::uint32_t>(batch.episodes[0].steps.size()) : 0;
  const std::uint32_t A = (B && T) ? static_cast<std::uint32_t>(batch.episodes[0].steps[0].raw.size()) : 0;
  put_u32(os, B);
  put_u32(os, T);
  put_u32(os, A);
  for (const auto& ep : batch.episodes) {
    if (ep.steps.size() != T) throw std::invalid_argument("write_batch: ragged episodes");
    put_f64(os, ep.reward);
    put_u32(os, ep.history);
    put_f64(os, ep.max_leak);
    for (const auto& s : ep.steps) {
      if (s.raw.size() != A) throw std::invalid_argument("write_batch: ragged actions");
      for (double x : s.raw) put_f64(os, x);
      put_i32(os, s.observation);
      put_f64(os, s.log_prob);
      put_f64(os, s.value);
      put_i32(os, s.node);
    }
  }
  if (!os) throw std::runtime_error("write_batch: stream error");
}

Batch read_batch(std::istream& is) {
  check_header(is, kEpisMagic, "episode batch");
  const std::uint32_t B = get_u32(is), T = get_u32(is), A = get_u32(is);
  Batch batch;
  batch.episodes.resize(B);
  for (auto& ep : batch.episodes) {
    ep.reward = get_f64(is);
    ep.outcome.reward = ep.reward;
    ep.history = get_u32(is);
    ep.max_leak = get_f64(is);
    ep.steps.resize(T);
    for (auto& s : ep.steps) {
      s.raw.resize(A);
      for (auto& x : s.raw) x = get_f64(is);
      s.observation = get_i32(is);
      s.log_prob = get_f64(is);
      s.value = get_f64(is);
      s.node = get_i32(is);
    }
  }
  return batch;
}

}  // namespace qrl
