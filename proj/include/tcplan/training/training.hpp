#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tcplan/corpus/instances.hpp"
#include "tcplan/json_fields.hpp"
#include "tcplan/planner/model.hpp"

namespace tcplan::training {

using planner::Example;
using planner::Model;
using planner::Weights;
using tensorlab::Tensor;

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 10;
  std::size_t warmup_steps = 200;
  std::size_t batch_size = 4;  // dialogues per optimizer step
  std::uint64_t seed = 1;
  double clip_norm = 1.0;      // 0 disables clipping
  // Stops after this many optimizer steps when nonzero; the schedule then
  // ends at max_steps.
  std::size_t max_steps = 0;

  // Throws ConfigError. total_steps is the schedule length of the run.
  void validate(std::size_t total_steps) const;

  static TrainConfig desk_scale();
  static TrainConfig paper_scale();
};

json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const json& j, TrainConfig base = {});

// Linear 0 -> peak over warmup, then linear peak -> 0 at total.
double lr_at(std::size_t step, double peak, std::size_t warmup, std::size_t total);

class Adam {
 public:
  explicit Adam(const Weights& shape, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // One update of every tensor; grads follow the weight registration order.
  void step(Weights& w, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

double global_norm(const std::vector<Tensor>& grads);
// Rescales grads to norm max_norm when larger; returns the norm before.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// All instances of one dialogue; knowledge is encoded once per group.
struct ExampleGroup {
  std::string id;
  std::vector<Example> examples;
};

// Groups instances by sample (sorted by sample id, then turn) and builds
// teacher-forced examples.
std::vector<ExampleGroup> make_groups(const Model& model, const std::vector<corpus::Instance>& instances);

// Mean cross-entropy over every plan token of `groups`, with its gradient
// accumulated into `grads` (registration order) when non-null.
double batch_loss(const Model& model, const std::vector<const ExampleGroup*>& groups, std::vector<Tensor>* grads);

// Share of plan-token positions whose argmax equals the label.
double token_accuracy(const Model& model, const std::vector<ExampleGroup>& groups);

struct StepLog {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean of step losses
  double dev_token_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Weights best;              // weights of the selected epoch
  std::size_t best_epoch = 0;
  double best_dev_token_accuracy = 0.0;
  std::size_t total_steps = 0;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
};

struct TrainHooks {
  std::ostream* log = nullptr;                      // JSON lines: step, lr, loss
  std::function<void(const EpochLog&)> on_epoch;
  std::filesystem::path dump_dir;                   // state dump on non-finite loss
};

// Adam with warmup/linear decay and global-norm clipping; batches are
// groups of dialogues in a seeded shuffle. Selects the epoch with the best dev
// plan-token accuracy (earliest on ties; last epoch without dev data) and
// leaves model.weights at that epoch. Non-finite loss raises TrainingError
// after writing a state dump.
TrainResult train(Model& model, const std::vector<ExampleGroup>& train_groups,
                  const std::vector<ExampleGroup>& dev_groups, const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace tcplan::training
