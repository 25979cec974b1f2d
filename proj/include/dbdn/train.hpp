#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbdn/data.hpp"
#include "dbdn/model.hpp"

namespace dbdn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers mirroring each parameter, plus the step count.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::uint64_t t = 0;
};

/// One Adam update (no weight decay). The step count is incremented before
/// bias correction. Parameters are updated in place from their grad buffers;
/// a parameter without a grad buffer is treated as having zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr,
               const AdamConfig& cfg = {});

struct TrainSchedule {
  double lr0 = 1e-4;
  std::uint64_t halve_every = 200000;
  std::uint64_t total = 1000000;
  int batch = 16;
  int hr_patch = kHrPatch;

  void validate() const;
};

/// lr0 * 0.5^floor(step / halve_every).
double lr_at(std::uint64_t step, const TrainSchedule& sched);

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::uint64_t step, double loss);
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

struct TrainOptions {
  std::filesystem::path output_dir;        // empty: keep everything in memory
  std::uint64_t checkpoint_every = 1000;   // 0 disables periodic checkpoints
  std::uint64_t log_every = 1;
  std::optional<std::filesystem::path> resume;  // checkpoint written by train()
  /// Called after every step with (step, lr, loss).
  std::function<void(std::uint64_t, double, double)> on_step;
};

struct TrainResult {
  Network net;
  AdamState adam;
  std::uint64_t steps_done = 0;     // total steps including resumed ones
  std::vector<double> losses;       // losses of the steps run in this call
  std::vector<std::filesystem::path> checkpoints;
};

/// Pairs tensors from a batch of sample pairs: (lr, hr).
std::pair<Tensor, Tensor> batch_tensors(const std::vector<SamplePair>& batch);

/// Runs one sample -> forward -> L1 -> backward -> Adam step. Returns the loss.
double train_step(Network& net, AdamState& adam, const TrainingSet& data,
                  const TrainSchedule& sched, std::uint64_t seed, std::uint64_t step);

/// Full loop. With an output_dir it writes loss.csv ("step,lr,loss"),
/// ckpt_<step>.dbdn (+ .adam optimizer state) and, when at least one step
/// ran, final.dbdn.
TrainResult train(const ModelConfig& cfg, const TrainingSet& data, const TrainSchedule& sched,
                  std::uint64_t seed, const TrainOptions& options = {});

/// Optimizer state sidecar: "DBDA" | version | step | t | per-parameter m, v.
void save_adam_state(const AdamState& state, std::uint64_t step,
                     const std::filesystem::path& path);
AdamState load_adam_state(const std::filesystem::path& path, std::uint64_t* step = nullptr);

/// The sidecar path used next to a checkpoint.
std::filesystem::path adam_path_for(const std::filesystem::path& checkpoint);

}  // namespace dbdn
