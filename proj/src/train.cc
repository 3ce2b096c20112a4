#include "fwfm/train.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fwfm/errors.h"
#include "fwfm/eval.h"
#include "fwfm/random.h"

namespace fwfm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Salt that separates the shuffle stream from the initialisation stream.
constexpr std::uint64_t kShuffleSalt = 0x5eed5eed5eed5eedULL;

double auc_or_nan(const ModelParams& params, const Dataset& data) {
  if (data.size() == 0) return kNaN;
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) return kNaN;
  return evaluate(params, data).auc;
}

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

std::string fmt_double(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (optimizer == OptimizerKind::kAdam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("adam epsilon must be > 0");
  }
}

ModelDims TrainConfig::dims_for(const FieldSchema& schema) const {
  return {schema.n_features(), schema.n_fields(), k, hash_space, ffm_hash_space};
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"eta", cfg.eta},
          {"lambda", cfg.lambda},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"optimizer", cfg.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"beta1", cfg.adam.beta1},
          {"beta2", cfg.adam.beta2},
          {"adam_eps", cfg.adam.eps},
          {"seed", cfg.seed},
          {"select_best_on_validation", cfg.select_best_on_validation},
          {"l2_mode", cfg.l2_mode == L2Mode::kLazy ? "lazy" : "eager"},
          {"k", cfg.k},
          {"hash_space", cfg.hash_space},
          {"ffm_hash_space", cfg.ffm_hash_space},
          {"skip_train_auc", cfg.skip_train_auc}};
}

TrainConfig config_from_json(const nlohmann::json& doc, const TrainConfig& base) {
  if (!doc.is_object()) throw ConfigError("a config must be a JSON object");
  TrainConfig cfg = base;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "eta") cfg.eta = value.get<double>();
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "epochs") cfg.epochs = value.get<std::size_t>();
      else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      else if (key == "beta1") cfg.adam.beta1 = value.get<double>();
      else if (key == "beta2") cfg.adam.beta2 = value.get<double>();
      else if (key == "adam_eps") cfg.adam.eps = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "select_best_on_validation") cfg.select_best_on_validation = value.get<bool>();
      else if (key == "k") cfg.k = value.get<std::uint64_t>();
      else if (key == "hash_space") cfg.hash_space = value.get<std::uint64_t>();
      else if (key == "ffm_hash_space") cfg.ffm_hash_space = value.get<std::uint64_t>();
      else if (key == "skip_train_auc") cfg.skip_train_auc = value.get<bool>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "adam") cfg.optimizer = OptimizerKind::kAdam;
        else if (name == "sgd") cfg.optimizer = OptimizerKind::kSgd;
        else throw ConfigError("unknown optimizer '" + name + "'");
      } else if (key == "l2_mode") {
        const auto name = value.get<std::string>();
        if (name == "lazy") cfg.l2_mode = L2Mode::kLazy;
        else if (name == "eager") cfg.l2_mode = L2Mode::kEager;
        else throw ConfigError("unknown l2_mode '" + name + "'");
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_auc", number_or_null(e.train_auc)},
                           {"validation_auc", number_or_null(e.validation_auc)},
                           {"mean_train_loss", number_or_null(e.mean_train_loss)},
                           {"seconds", e.seconds}});
  }
  return {{"model", std::string(model_name(kind))},
          {"config", fwfm::to_json(config)},
          {"parameter_count", parameter_count},
          {"best_epoch", best_epoch},
          {"epochs", std::move(epochs_json)}};
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,train_auc,validation_auc,mean_train_loss,seconds\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt_double(e.train_auc) + "," + fmt_double(e.validation_auc) + "," +
           fmt_double(e.mean_train_loss) + "," + fmt_double(e.seconds) + "\n";
  }
  return out;
}

Optimizer::Optimizer(ModelParams& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
  cfg_.validate();
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const auto& table = params_.blocks[b];
    if (cfg_.optimizer == OptimizerKind::kAdam) {
      m_[b].assign(table.values.size(), 0.0);
      v_[b].assign(table.values.size(), 0.0);
    }
    last_[b].assign(table.rows(), 0);
  }
}

void Optimizer::update_scalar(double& theta, double& m, double& v, double g) {
  if (cfg_.optimizer == OptimizerKind::kSgd) {
    theta -= cfg_.eta * g;
    return;
  }
  const auto& a = cfg_.adam;
  m = a.beta1 * m + (1.0 - a.beta1) * g;
  v = a.beta2 * v + (1.0 - a.beta2) * g * g;
  const double m_hat = m / (1.0 - beta1_pow_);
  const double v_hat = v / (1.0 - beta2_pow_);
  theta -= cfg_.eta * m_hat / (std::sqrt(v_hat) + a.eps);
}

void Optimizer::update_row(std::size_t b, std::size_t row, std::span<const double> g) {
  auto& table = params_.blocks[b];
  const std::size_t width = table.width;
  double* theta = table.values.data() + row * width;
  const auto elapsed = static_cast<double>(t_ - last_[b][row]);
  last_[b][row] = t_;
  const double lambda = cfg_.lambda;
  if (cfg_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t c = 0; c < width; ++c) theta[c] -= cfg_.eta * (g[c] + lambda * theta[c]);
    return;
  }
  double* m = m_[b].data() + row * width;
  double* v = v_[b].data() + row * width;
  for (std::size_t c = 0; c < width; ++c)
    update_scalar(theta[c], m[c], v[c], g[c] + lambda * theta[c] * elapsed);
}

void Optimizer::catch_up(std::size_t b, std::size_t row) {
  const auto pending = t_ - last_[b][row];
  if (pending == 0) return;
  last_[b][row] = t_;
  const double decay = std::pow(1.0 - cfg_.eta * cfg_.lambda, static_cast<double>(pending));
  for (double& x : params_.blocks[b].row(row)) x *= decay;
}

// Plain SGD decays rows exactly; the rows an instance reads must be brought
// up to date before its gradient is taken.
void Optimizer::catch_up(const Instance& inst) {
  const auto& dims = params_.dims;
  const std::size_t n = inst.active.size();
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    if (params_.blocks[b].values.empty()) continue;
    switch (static_cast<Block>(b)) {
      case Block::kLinear:
      case Block::kEmbedding:
      case Block::kFeatureLinear:
        for (FeatureId i : inst.active) catch_up(b, i);
        break;
      case Block::kPairHash:
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t c = a + 1; c < n; ++c) catch_up(b, poly2_hash(inst.active[a], inst.active[c], dims.hash_space));
        break;
      case Block::kFieldEmbedding:
        for (FieldId a = 0; a < n; ++a)
          for (FieldId t = 0; t < n; ++t)
            if (t != a) catch_up(b, ffm_row(params_, inst.active[a], a, t));
        break;
      case Block::kFieldPair:
      case Block::kFieldLinear:
        for (std::size_t row = 0; row < params_.blocks[b].rows(); ++row) catch_up(b, row);
        break;
    }
  }
}

double Optimizer::step(std::span<const Instance* const> batch) {
  if (batch.empty()) return 0.0;
  if (cfg_.optimizer == OptimizerKind::kSgd && cfg_.l2_mode == L2Mode::kLazy && cfg_.lambda > 0.0)
    for (const Instance* inst : batch) catch_up(*inst);
  double loss_sum = 0.0;
  const SparseGradient* grad = nullptr;
  if (batch.size() == 1) {
    gradient(params_, *batch[0], scratch_);
    loss_sum = scratch_.loss;
    grad = &scratch_.grad;
  } else {
    const double scale = 1.0 / static_cast<double>(batch.size());
    batch_grad_.reset(params_);
    for (const Instance* inst : batch) {
      gradient(params_, *inst, scratch_);
      loss_sum += scratch_.loss;
      batch_grad_.d_w0 += scale * scratch_.grad.d_w0;
      for (std::size_t b = 0; b < kNumBlocks; ++b) {
        const auto& src = scratch_.grad.blocks[b];
        for (std::size_t i = 0; i < src.size(); ++i) batch_grad_.blocks[b].add(src.keys[i], src.row(i), scale);
      }
    }
    batch_grad_.coalesce();
    grad = &batch_grad_;
  }
  if (!std::isfinite(loss_sum)) throw DivergedError(t_ + 1, cfg_.eta);

  ++t_;
  beta1_pow_ *= cfg_.adam.beta1;
  beta2_pow_ *= cfg_.adam.beta2;
  update_scalar(params_.w0, w0_m_, w0_v_, grad->d_w0);

  if (cfg_.l2_mode == L2Mode::kLazy) {
    for (std::size_t b = 0; b < kNumBlocks; ++b) {
      const auto& rows = grad->blocks[b];
      for (std::size_t i = 0; i < rows.size(); ++i) update_row(b, rows.keys[i], rows.row(i));
    }
    return loss_sum;
  }

  // Eager: every row takes a step, untouched rows with a zero loss gradient.
  std::vector<double> zeros;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const auto& rows = grad->blocks[b];
    const std::size_t width = params_.blocks[b].width;
    zeros.assign(width, 0.0);
    std::size_t next = 0;
    for (std::size_t row = 0; row < params_.blocks[b].rows(); ++row) {
      if (next < rows.size() && rows.keys[next] == row) {
        update_row(b, row, rows.row(next));
        ++next;
      } else {
        update_row(b, row, zeros);
      }
    }
  }
  return loss_sum;
}

void Optimizer::flush() {
  if (cfg_.optimizer != OptimizerKind::kSgd || cfg_.lambda == 0.0) return;
  for (std::size_t b = 0; b < kNumBlocks; ++b)
    for (std::size_t row = 0; row < params_.blocks[b].rows(); ++row) catch_up(b, row);
}

TrainResult train_from(ModelParams init, const Dataset& train_data, const Dataset& valid_data,
                       const TrainConfig& cfg) {
  cfg.validate();
  if (!(train_data.schema.n_features() == init.dims.n_features &&
        train_data.schema.n_fields() == init.dims.n_fields))
    throw ContractError("training data does not match the model dimensions");
  if (valid_data.size() > 0 && valid_data.schema.n_features() != init.dims.n_features)
    throw ContractError("validation data does not share the training schema");

  TrainResult result;
  result.params = std::move(init);
  ModelParams& params = result.params;
  TrainReport& report = result.report;
  report.kind = params.kind;
  report.config = cfg;
  report.parameter_count = parameter_count(params);

  Optimizer opt(params, cfg);
  Rng rng(mix64(cfg.seed ^ kShuffleSalt));
  std::vector<const Instance*> order;
  order.reserve(train_data.size());
  for (const auto& inst : train_data.instances) order.push_back(&inst);

  std::optional<ModelParams> best;
  double best_auc = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle(std::span(order), rng);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - i);
      loss_sum += opt.step(std::span<const Instance* const>(order.data() + i, len));
    }
    opt.flush();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_train_loss = order.empty() ? kNaN : loss_sum / static_cast<double>(order.size());
    rec.train_auc = cfg.skip_train_auc ? kNaN : auc_or_nan(params, train_data);
    rec.validation_auc = auc_or_nan(params, valid_data);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);

    if (!std::isnan(rec.validation_auc) && rec.validation_auc > best_auc) {
      best_auc = rec.validation_auc;
      report.best_epoch = epoch;
      if (cfg.select_best_on_validation) best = params;
    }
  }
  if (report.best_epoch == 0) report.best_epoch = report.epochs.size();
  if (cfg.select_best_on_validation && best) params = std::move(*best);
  return result;
}

TrainResult train(ModelKind kind, const Dataset& train_data, const Dataset& valid_data, const TrainConfig& cfg) {
  cfg.validate();
  return train_from(init_params(kind, cfg.dims_for(train_data.schema), cfg.seed), train_data, valid_data, cfg);
}

std::vector<SweepRow> sweep(ModelKind kind, std::span<const TrainConfig> grid, const Dataset& train_data,
                            const Dataset& valid_data) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows;
  for (const auto& cfg : grid) {
    SweepRow row;
    row.kind = kind;
    row.config = cfg;
    const auto start = std::chrono::steady_clock::now();
    try {
      row.parameter_count = parameter_count(kind, cfg.dims_for(train_data.schema));
      auto result = train(kind, train_data, valid_data, cfg);
      row.train_auc = result.report.best().train_auc;
      row.validation_auc = result.report.best().validation_auc;
    } catch (const Error& e) {
      row.train_auc = row.validation_auc = kNaN;
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out =
      "model,k,eta,lambda,epochs,batch_size,optimizer,seed,hash_space,ffm_hash_space,parameters,"
      "train_auc,validation_auc,seconds,error\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    std::string error = r.error.value_or("");
    for (char& ch : error)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    out += std::string(model_name(r.kind)) + "," + std::to_string(c.k) + "," + fmt_double(c.eta) + "," +
           fmt_double(c.lambda) + "," + std::to_string(c.epochs) + "," + std::to_string(c.batch_size) + "," +
           (c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd") + "," + std::to_string(c.seed) + "," +
           std::to_string(c.hash_space) + "," + std::to_string(c.ffm_hash_space) + "," +
           std::to_string(r.parameter_count) + "," + fmt_double(r.train_auc) + "," + fmt_double(r.validation_auc) +
           "," + fmt_double(r.seconds) + "," + error + "\n";
  }
  return out;
}

}  // namespace fwfm
