#include "tcplan/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "tcplan/error.hpp"
#include "tcplan/rng.hpp"

namespace tcplan::training {

using tensorlab::Graph;
using tensorlab::Var;

void TrainConfig::validate(std::size_t total_steps) const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_steps == 0 && epochs == 0) throw ConfigError("epochs must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  if (warmup_steps >= total_steps) {
    throw ConfigError("warmup_steps (" + std::to_string(warmup_steps) + ") must be below the total step count (" +
                      std::to_string(total_steps) + ")");
  }
}

TrainConfig TrainConfig::desk_scale() { return TrainConfig{}; }

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.lr = 1e-5;
  c.warmup_steps = 3000;
  c.batch_size = 8;
  return c;
}

json config_to_json(const TrainConfig& c) {
  json j = json::object();
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  j["warmup_steps"] = c.warmup_steps;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["clip_norm"] = c.clip_norm;
  j["max_steps"] = c.max_steps;
  return j;
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  FieldReader r(j, "train");
  r.get("lr", c.lr);
  r.get("epochs", c.epochs);
  r.get("warmup_steps", c.warmup_steps);
  r.get("batch_size", c.batch_size);
  r.get("seed", c.seed);
  r.get("clip_norm", c.clip_norm);
  r.get("max_steps", c.max_steps);
  r.finish();
  return c;
}

double lr_at(std::size_t step, double peak, std::size_t warmup, std::size_t total) {
  if (step >= total) return 0.0;
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

Adam::Adam(const Weights& shape, double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    m_.emplace_back(shape.tensor(i).rows(), shape.tensor(i).cols());
    v_.emplace_back(shape.tensor(i).rows(), shape.tensor(i).cols());
  }
}

void Adam::step(Weights& w, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != w.size() || m_.size() != w.size()) throw TrainingError("Adam: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& p = w.tensor(i).values();
    auto& m = m_[i].values();
    auto& v = v_[i].values();
    const auto& g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

double global_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const auto& t : grads)
    for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& t : grads)
      for (double& v : t.values()) v *= f;
  }
  return norm;
}

std::vector<ExampleGroup> make_groups(const Model& model, const std::vector<corpus::Instance>& instances) {
  std::map<std::string, std::vector<const corpus::Instance*>> by_id;
  for (const auto& inst : instances) by_id[inst.sample->id].push_back(&inst);
  std::vector<ExampleGroup> out;
  for (auto& [id, list] : by_id) {
    std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->turn < b->turn; });
    ExampleGroup group{id, {}};
    for (const auto* inst : list) group.examples.push_back(planner::make_example(model, *inst));
    out.push_back(std::move(group));
  }
  return out;
}

namespace {

bool same_knowledge(const ExampleGroup& group) {
  for (const auto& ex : group.examples) {
    if (ex.input.knowledge != group.examples.front().input.knowledge ||
        ex.input.knowledge_pos != group.examples.front().input.knowledge_pos)
      return false;
  }
  return true;
}

// Knowledge encoded once when every example of the group shares it.
std::optional<encoders::EncodedKnowledge> shared_knowledge(Graph& g, const Model& model, const ExampleGroup& group) {
  if (group.examples.empty() || !same_knowledge(group)) return std::nullopt;
  const auto& in = group.examples.front().input;
  return encoders::encode_knowledge(g, model.weights, model.config, in.knowledge, in.knowledge_pos);
}

int argmax_row(const Tensor& t, std::size_t row) {
  const auto r = t.row_span(row);
  int best = 0;
  for (std::size_t j = 1; j < r.size(); ++j)
    if (r[j] > r[best]) best = static_cast<int>(j);
  return best;
}

}  // namespace

double batch_loss(const Model& model, const std::vector<const ExampleGroup*>& groups, std::vector<Tensor>* grads) {
  std::size_t total_tokens = 0;
  for (const auto* group : groups)
    for (const auto& ex : group->examples) total_tokens += ex.plan_tokens();
  if (total_tokens == 0) throw TrainingError("batch has no plan tokens");

  double loss = 0.0;
  for (const auto* group : groups) {
    if (group->examples.empty()) continue;
    Graph g(grads != nullptr);
    const auto knowledge = shared_knowledge(g, model, *group);
    std::optional<Var> sum;
    for (const auto& ex : group->examples) {
      const auto ctx = encoders::encode(g, model.weights, model.config, ex.input, knowledge ? &*knowledge : nullptr);
      // Token-weighted share of the batch mean.
      const double share = static_cast<double>(ex.plan_tokens()) / static_cast<double>(total_tokens);
      const Var l = tensorlab::scale(planner::example_loss(g, model, ex, ctx), share);
      sum = sum ? tensorlab::add(*sum, l) : l;
    }
    loss += sum->value()[0];
    if (grads != nullptr) {
      g.backward(*sum);
      for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const Var p = g.param(model.weights.tensor(i));
        if (!g.has_grad(p.id)) continue;
        auto& dst = (*grads)[i].values();
        const auto& src = g.grad(p).values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
  }
  return loss;
}

double token_accuracy(const Model& model, const std::vector<ExampleGroup>& groups) {
  std::size_t hit = 0, total = 0;
  for (const auto& group : groups) {
    Graph g(false);
    const auto knowledge = shared_knowledge(g, model, group);
    for (const auto& ex : group.examples) {
      const auto ctx = encoders::encode(g, model.weights, model.config, ex.input, knowledge ? &*knowledge : nullptr);
      const Tensor& logits = planner::forward(g, model, ctx, ex.decoder_ids).value();
      for (std::size_t i = 0; i < ex.labels.size(); ++i) {
        if (ex.labels[i] == planner::kIgnoreLabel) continue;
        ++total;
        hit += argmax_row(logits, i) == ex.labels[i];
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

namespace {

[[noreturn]] void abort_training(const Model& model, const TrainHooks& hooks, std::size_t step, double lr,
                                 double loss, const std::vector<const ExampleGroup*>& batch,
                                 const std::vector<Tensor>& grads, const std::string& reason) {
  json dump = json::object();
  dump["reason"] = reason;
  dump["step"] = step;
  dump["lr"] = lr;
  dump["loss"] = std::isfinite(loss) ? json(loss) : json(std::to_string(loss));
  json ids = json::array();
  for (const auto* group : batch) ids.push_back(group->id);
  dump["batch"] = std::move(ids);
  json tensors = json::array();
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    double wn = 0.0, gn = 0.0;
    bool finite = true;
    for (double v : model.weights.tensor(i).values()) wn += v * v, finite = finite && std::isfinite(v);
    if (i < grads.size())
      for (double v : grads[i].values()) gn += v * v;
    tensors.push_back({{"name", model.weights.name(i)},
                       {"weight_norm", std::to_string(std::sqrt(wn))},
                       {"grad_norm", std::to_string(std::sqrt(gn))},
                       {"finite", finite}});
  }
  dump["tensors"] = std::move(tensors);

  const auto dir = hooks.dump_dir.empty() ? std::filesystem::temp_directory_path() : hooks.dump_dir;
  const auto path = dir / ("tcplan_nonfinite_step" + std::to_string(step) + ".json");
  std::ofstream(path) << dump.dump(1) << '\n';
  throw TrainingError("non-finite loss at step " + std::to_string(step) + " (" + reason + "); state dumped to " +
                      path.string());
}

}  // namespace

TrainResult train(Model& model, const std::vector<ExampleGroup>& train_groups,
                  const std::vector<ExampleGroup>& dev_groups, const TrainConfig& cfg, const TrainHooks& hooks) {
  if (train_groups.empty()) throw TrainingError("no training instances");
  const std::size_t per_epoch = (train_groups.size() + cfg.batch_size - 1) / std::max<std::size_t>(cfg.batch_size, 1);
  const std::size_t total = cfg.max_steps > 0 ? cfg.max_steps : cfg.epochs * per_epoch;
  cfg.validate(total);

  TrainResult result;
  result.total_steps = total;
  Adam adam(model.weights);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  bool have_best = false;
  for (std::size_t epoch = 1; step < total; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size() && step < total; begin += cfg.batch_size) {
      std::vector<const ExampleGroup*> batch;
      for (std::size_t i = begin; i < std::min(order.size(), begin + cfg.batch_size); ++i)
        batch.push_back(&train_groups[order[i]]);

      std::vector<Tensor> grads;
      for (std::size_t i = 0; i < model.weights.size(); ++i)
        grads.emplace_back(model.weights.tensor(i).rows(), model.weights.tensor(i).cols());
      const double lr = lr_at(step, cfg.lr, cfg.warmup_steps, total);
      double loss = 0.0;
      try {
        loss = batch_loss(model, batch, &grads);
      } catch (const NumericError& e) {
        abort_training(model, hooks, step, lr, NAN, batch, grads, e.what());
      }
      if (!std::isfinite(loss)) abort_training(model, hooks, step, lr, loss, batch, grads, "loss");
      const double norm = clip_global_norm(grads, cfg.clip_norm);
      if (!std::isfinite(norm)) abort_training(model, hooks, step, lr, loss, batch, grads, "gradient norm");
      adam.step(model.weights, grads, lr);
      model.weights.round_to_float();

      result.steps.push_back({step, lr, loss, norm});
      if (hooks.log) {
        json line = {{"step", step}, {"lr", lr}, {"loss", loss}};
        *hooks.log << line.dump() << '\n';
      }
      loss_sum += loss;
      ++epoch_steps;
      ++step;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(epoch_steps, 1));
    log.dev_token_accuracy = dev_groups.empty() ? 0.0 : token_accuracy(model, dev_groups);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.epochs.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(log);

    if (dev_groups.empty() || !have_best || log.dev_token_accuracy > result.best_dev_token_accuracy) {
      result.best = model.weights;
      result.best_epoch = epoch;
      result.best_dev_token_accuracy = log.dev_token_accuracy;
      have_best = true;
    }
  }
  model.weights = result.best;
  return result;
}

}  // namespace tcplan::training
