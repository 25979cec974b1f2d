#include "dbdn/train.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dbdn/checkpoint.hpp"

namespace dbdn {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kAdamVersion = 1;

std::vector<Tensor> parameter_tensors(const Network& net) {
  std::vector<Tensor> out;
  for (const NamedParameter& p : net.parameters()) out.push_back(p.tensor);
  return out;
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  put_u32(b, static_cast<std::uint32_t>(v));
  put_u32(b, static_cast<std::uint32_t>(v >> 32));
}

std::string format_loss_row(std::uint64_t step, double lr, double loss) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g\n", static_cast<unsigned long long>(step), lr,
                loss);
  return buf;
}

}  // namespace

void adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0f);
      state.v.emplace_back(p.numel(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.numel()) {
      throw ShapeError("adam_step: state shape mismatch for parameter " + std::to_string(k));
    }
    auto data = p.data_mut();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float g = grad.empty() ? 0.0f : grad[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      data[i] -= static_cast<float>(lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

void TrainSchedule::validate() const {
  if (!(lr0 > 0.0) || halve_every == 0 || batch < 1 || hr_patch < 1) {
    throw std::invalid_argument("schedule: lr0, halve_every, batch and patch must be positive");
  }
}

double lr_at(std::uint64_t step, const TrainSchedule& sched) {
  return sched.lr0 * std::ldexp(1.0, -static_cast<int>(step / sched.halve_every));
}

NonFiniteLoss::NonFiniteLoss(std::uint64_t step, double loss)
    : std::runtime_error("non-finite loss " + std::to_string(loss) + " at step " +
                         std::to_string(step)),
      step_(step) {}

std::pair<Tensor, Tensor> batch_tensors(const std::vector<SamplePair>& batch) {
  std::vector<ImageRGB> lr, hr;
  lr.reserve(batch.size());
  hr.reserve(batch.size());
  for (const SamplePair& p : batch) {
    lr.push_back(p.lr);
    hr.push_back(p.hr);
  }
  return {to_tensor(lr), to_tensor(hr)};
}

double train_step(Network& net, AdamState& adam, const TrainingSet& data,
                  const TrainSchedule& sched, std::uint64_t seed, std::uint64_t step) {
  std::mt19937_64 rng = step_rng(seed, step);
  const auto [lr_img, hr_img] = batch_tensors(sample_batch(data, sched.batch, rng, sched.hr_patch));
  net.set_requires_grad(true);
  net.zero_grad();
  Tape tape;
  double loss_value = 0.0;
  {
    TapeScope scope(tape);
    const Tensor loss = l1_loss(forward(net, lr_img), hr_img);
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) throw NonFiniteLoss(step, loss_value);
    tape.backward(loss);
  }
  tape.clear();
  std::vector<Tensor> params = parameter_tensors(net);
  adam_step(params, adam, lr_at(step, sched));
  return loss_value;
}

TrainResult train(const ModelConfig& cfg, const TrainingSet& data, const TrainSchedule& sched,
                  std::uint64_t seed, const TrainOptions& options) {
  sched.validate();
  if (data.hr.empty()) throw std::runtime_error("train: empty training set");
  if (data.scale != cfg.scale) {
    throw std::invalid_argument("train: data scale does not match model scale");
  }
  TrainResult result;
  std::uint64_t start = 0;
  if (options.resume) {
    result.net = load_checkpoint(*options.resume);
    if (!(result.net.config == cfg)) {
      throw std::invalid_argument("train: resume checkpoint config differs from requested model");
    }
    result.adam = load_adam_state(adam_path_for(*options.resume), &start);
  } else {
    result.net = build_network(cfg, seed);
  }

  const bool to_disk = !options.output_dir.empty();
  std::ofstream log;
  auto write_checkpoint = [&](const fs::path& name, std::uint64_t step) {
    const fs::path path = options.output_dir / name;
    save_checkpoint(result.net, path);
    save_adam_state(result.adam, step, adam_path_for(path));
    result.checkpoints.push_back(path);
  };
  if (to_disk) {
    fs::create_directories(options.output_dir);
    const fs::path log_path = options.output_dir / "loss.csv";
    if (options.resume && fs::exists(log_path)) {
      log.open(log_path, std::ios::app);
    } else {
      log.open(log_path, std::ios::trunc);
      log << "step,lr,loss\n";
    }
    if (!options.resume) write_checkpoint("ckpt_0.dbdn", 0);
  }

  for (std::uint64_t step = start; step < sched.total; ++step) {
    const double loss = train_step(result.net, result.adam, data, sched, seed, step);
    const double lr = lr_at(step, sched);
    result.losses.push_back(loss);
    if (log.is_open() && options.log_every > 0 && step % options.log_every == 0) {
      log << format_loss_row(step, lr, loss);
    }
    if (options.on_step) options.on_step(step, lr, loss);
    const std::uint64_t done = step + 1;
    if (to_disk && options.checkpoint_every > 0 && done % options.checkpoint_every == 0) {
      write_checkpoint("ckpt_" + std::to_string(done) + ".dbdn", done);
    }
  }
  result.steps_done = std::max(start, sched.total);
  if (to_disk && !result.losses.empty()) {
    log.flush();
    write_checkpoint("final.dbdn", result.steps_done);
  }
  return result;
}

fs::path adam_path_for(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".adam";
  return p;
}

void save_adam_state(const AdamState& state, std::uint64_t step, const fs::path& path) {
  std::vector<std::uint8_t> b{'D', 'B', 'D', 'A'};
  put_u32(b, kAdamVersion);
  put_u64(b, step);
  put_u64(b, state.t);
  put_u32(b, static_cast<std::uint32_t>(state.m.size()));
  for (std::size_t k = 0; k < state.m.size(); ++k) {
    put_u32(b, static_cast<std::uint32_t>(state.m[k].size()));
    for (float x : state.m[k]) put_u32(b, std::bit_cast<std::uint32_t>(x));
    for (float x : state.v[k]) put_u32(b, std::bit_cast<std::uint32_t>(x));
  }
  write_file_bytes(path, b);
}

AdamState load_adam_state(const fs::path& path, std::uint64_t* step) {
  const std::vector<std::uint8_t> b = read_file_bytes(path);
  std::size_t pos = 0;
  auto u32 = [&]() {
    if (b.size() - pos < 4) throw CheckpointError("optimizer state truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  };
  auto u64 = [&]() {
    const std::uint64_t lo = u32();
    return lo | (static_cast<std::uint64_t>(u32()) << 32);
  };
  if (b.size() < 4 || std::string(b.begin(), b.begin() + 4) != "DBDA") {
    throw CheckpointError("bad optimizer state magic");
  }
  pos = 4;
  if (u32() != kAdamVersion) throw CheckpointError("unsupported optimizer state version");
  const std::uint64_t saved_step = u64();
  AdamState state;
  state.t = u64();
  const std::uint32_t count = u32();
  state.m.resize(count);
  state.v.resize(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t n = u32();
    state.m[k].resize(n);
    state.v[k].resize(n);
    for (float& x : state.m[k]) x = std::bit_cast<float>(u32());
    for (float& x : state.v[k]) x = std::bit_cast<float>(u32());
  }
  if (pos != b.size()) throw CheckpointError("trailing bytes in optimizer state");
  if (step) *step = saved_step;
  return state;
}

}  // namespace dbdn
