#pragma once
// Versioned little-endian binary containers for checkpoints and episode batches.
//
// Checkpoint ("QRLCKPT\0", version 1): kind, dimensions, architecture, theta, Adam
// moments and step, epoch, episodes, seed, best metric, canonical config text.
// Episode batch ("QRLEPIS\0", version 1): u32 B, u32 T, u32 A, then per episode
// f64 reward, u32 history, f64 max_leak and per step A x f64 raw, i32 observation,
// f64 log_prob, f64 value, i32 node. Strings are u64 length + bytes; vectors u64
// count + elements.

#include "qrl/env.hpp"
#include "qrl/neural.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace qrl {

struct Checkpoint {
  std::string model_kind = "recurrent";  // recurrent | constant
  int input_dim = 0, action_dim = 0;
  int lstm_units = 0;
  std::vector<int> dense;
  double init_std = 0.3;
  std::vector<double> theta;
  AdamState adam;
  int epoch = 0;
  std::int64_t episodes = 0;
  std::uint64_t seed = 0;
  double best_metric = 0.0;
  std::string config;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);
void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);

Checkpoint make_checkpoint(const TrainableModel& model, const AdamState& adam, int epoch, std::int64_t episodes,
                           std::uint64_t seed, double best_metric, const std::string& config);
// Rebuilds the model with the stored weights.
std::unique_ptr<TrainableModel> model_from_checkpoint(const Checkpoint& ck);

void write_batch(std::ostream& os, const Batch& batch);
// Restores steps, rewards and histories; actions are re-derived by the caller if needed.
Batch read_batch(std::istream& is);

}  // namespace qrl
