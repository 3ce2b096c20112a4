#include "fwfm/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "fwfm/corpus.h"
#include "fwfm/errors.h"
#include "fwfm/eval.h"
#include "fwfm/fieldstats.h"
#include "fwfm/models.h"
#include "fwfm/synth.h"
#include "fwfm/train.h"
#include "json.hpp"

namespace fwfm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Usage problems detected after CLI11 parsing (bad model name, malformed grid).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct DataOptions {
  std::string train, valid, test;
  std::uint64_t tau = 0;
  double neg_keep = 1.0;
};

struct LoadedData {
  Dataset train, valid, test;
  bool has_test = false;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path + ": malformed JSON: " + e.what());
  }
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(); }

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

ModelKind model_from_flag(const std::string& name) {
  auto kind = parse_model_kind(name);
  if (!kind) throw UsageError("unknown model '" + name + "'");
  return *kind;
}

// Fresh schema from the training file, frequency filter fitted on it,
// negatives downsampled; validation and test parsed frozen and remapped.
LoadedData load_data(const DataOptions& opts, std::uint64_t seed) {
  const auto train_lines = read_lines(opts.train);
  const auto valid_lines = read_lines(opts.valid);
  std::vector<std::string> test_lines;
  if (!opts.test.empty()) test_lines = read_lines(opts.test);
  const std::size_t n_fields =
      std::max({count_fields(train_lines), count_fields(valid_lines), count_fields(test_lines)});

  Dataset raw_train = parse_libffm(train_lines, FieldSchema(n_fields), false, Role::kTrain);
  auto filtered = apply_frequency_filter(raw_train, opts.tau);

  LoadedData data;
  data.train = std::move(filtered.data);
  if (opts.neg_keep < 1.0) data.train = downsample_negatives(data.train, opts.neg_keep, seed);
  data.valid = filtered.filter.apply(parse_libffm(valid_lines, raw_train.schema, true, Role::kValidation));
  if (!opts.test.empty()) {
    data.test = filtered.filter.apply(parse_libffm(test_lines, raw_train.schema, true, Role::kTest));
    data.has_test = true;
  }
  return data;
}

double auc_or_nan(const ModelParams& params, const Dataset& data) {
  try {
    return evaluate(params, data).auc;
  } catch (const UndefinedMetricError&) {
    return std::nan("");
  }
}

void add_data_options(CLI::App* cmd, DataOptions& d, bool with_test) {
  cmd->add_option("--train", d.train, "training file (libffm, optionally gzip)")->required();
  cmd->add_option("--valid", d.valid, "validation file")->required();
  if (with_test) cmd->add_option("--test", d.test, "test file");
  cmd->add_option("--tau", d.tau, "replace features seen fewer than tau times in training by NULL");
  cmd->add_option("--neg-keep", d.neg_keep, "keep rate for training negatives, in (0, 1]");
}

void add_train_config_options(CLI::App* cmd, TrainConfig& cfg, std::string& optimizer, std::string& l2_mode) {
  cmd->add_option("--k", cfg.k, "embedding dimension K");
  cmd->add_option("--eta", cfg.eta, "learning rate");
  cmd->add_option("--lambda", cfg.lambda, "L2 coefficient");
  cmd->add_option("--epochs", cfg.epochs, "number of epochs t");
  cmd->add_option("--batch-size", cfg.batch_size, "instances per update");
  cmd->add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  cmd->add_option("--beta1", cfg.adam.beta1, "Adam beta1");
  cmd->add_option("--beta2", cfg.adam.beta2, "Adam beta2");
  cmd->add_option("--adam-eps", cfg.adam.eps, "Adam epsilon");
  cmd->add_option("--l2-mode", l2_mode, "lazy or eager")->check(CLI::IsMember({"lazy", "eager"}));
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_flag("!--final-snapshot", cfg.select_best_on_validation,
                "keep the last epoch instead of the best validation epoch");
  cmd->add_flag("--skip-train-auc", cfg.skip_train_auc, "skip the per-epoch training AUC pass");
}

void finish_config(TrainConfig& cfg, const std::string& optimizer, const std::string& l2_mode) {
  cfg.optimizer = optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  cfg.l2_mode = l2_mode == "eager" ? L2Mode::kEager : L2Mode::kLazy;
}

void apply_hash_space(ModelKind kind, std::optional<std::uint64_t> hash_space, TrainConfig& cfg) {
  if (!hash_space) return;
  if (*hash_space == 0) throw UsageError("--hash-space must be >= 1");
  if (kind == ModelKind::kFFM) cfg.ffm_hash_space = *hash_space;
  else cfg.hash_space = *hash_space;
}

// train ------------------------------------------------------------------

struct TrainArgs {
  std::string model;
  DataOptions data;
  TrainConfig cfg;
  std::string optimizer = "adam", l2_mode = "lazy";
  std::optional<std::uint64_t> hash_space;
  std::string out;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  const ModelKind kind = model_from_flag(args.model);
  TrainConfig cfg = args.cfg;
  finish_config(cfg, args.optimizer, args.l2_mode);
  apply_hash_space(kind, args.hash_space, cfg);
  cfg.validate();

  const LoadedData data = load_data(args.data, cfg.seed);
  auto result = train(kind, data.train, data.valid, cfg);
  const auto& params = result.params;

  const double train_auc = auc_or_nan(params, data.train);
  const double valid_auc = auc_or_nan(params, data.valid);
  const double test_auc = data.has_test ? auc_or_nan(params, data.test) : std::nan("");

  save_snapshot(params, args.out);
  data.train.schema.save(args.out + ".schema.json");
  json report = result.report.to_json();
  report["final"] = {{"train_auc", number_or_null(train_auc)},
                     {"validation_auc", number_or_null(valid_auc)},
                     {"test_auc", number_or_null(test_auc)},
                     {"n_train", data.train.size()},
                     {"n_validation", data.valid.size()},
                     {"n_test", data.test.size()},
                     {"n_features", data.train.schema.n_features()},
                     {"n_fields", data.train.schema.n_fields()}};
  write_text(args.out + ".report.json", report.dump(1) + "\n");
  write_text(args.out + ".report.csv", result.report.to_csv());

  out << "model\tparameters\ttrain_auc\tvalidation_auc\ttest_auc\n";
  out << model_name(kind) << '\t' << result.report.parameter_count << '\t' << fmt(train_auc) << '\t'
      << fmt(valid_auc) << '\t' << fmt(test_auc) << '\n';
  return kExitOk;
}

// analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string train;
  std::vector<std::string> models;
  std::string out_dir;
  std::string schema;
};

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out) {
  if (args.models.empty()) throw UsageError("--models needs at least one snapshot");
  fs::create_directories(args.out_dir);
  const auto lines = read_lines(args.train);
  const std::string first_schema = args.schema.empty() ? args.models.front() + ".schema.json" : args.schema;
  const FieldSchema schema = FieldSchema::load(first_schema);
  const Dataset train = parse_libffm(lines, schema, true, Role::kTrain);
  const auto& names = schema.field_names();

  const FieldPairMatrix mi = mutual_information(train);
  emit_heatmap(mi, names, (fs::path(args.out_dir) / "mi.csv").string());

  auto corr = [&](const FieldPairMatrix& m) -> json {
    try {
      return pearson(m, mi);
    } catch (const UndefinedMetricError&) {
      return nullptr;
    }
  };

  json models = json::array();
  std::vector<std::string> used_stems;
  for (const auto& path : args.models) {
    const ModelParams params = load_snapshot(path);
    if (params.dims.n_features != schema.n_features() || params.dims.n_fields != schema.n_fields())
      throw ContractError(path + " was not trained on the schema in " + first_schema);
    std::string stem = fs::path(path).stem().string();
    while (std::find(used_stems.begin(), used_stems.end(), stem) != used_stems.end()) stem += "_";
    used_stems.push_back(stem);
    const auto file = [&](const std::string& suffix) {
      return (fs::path(args.out_dir) / (stem + suffix)).string();
    };

    json entry = {{"snapshot", path}, {"model", std::string(model_name(params.kind))}};
    json pearsons = json::object();
    if (params.kind == ModelKind::kLR || params.kind == ModelKind::kPoly2) {
      entry["note"] = "no embeddings; learned strength undefined";
    } else {
      const auto strength = learned_strength(params, train);
      emit_heatmap(strength, names, file("_strength.csv"));
      entry["strength_csv"] = stem + "_strength.csv";
      pearsons["strength_vs_mi"] = corr(strength);
      if (!strength.unobserved().empty()) {
        json pairs = json::array();
        for (const auto& [a, b] : strength.unobserved()) pairs.push_back({names.at(a), names.at(b)});
        entry["unobserved_pairs"] = pairs;
      }
      if (is_fwfm(params.kind)) {
        const auto r = r_weights(params);
        const auto without_r = strength_without_r(params, train);
        emit_heatmap(r, names, file("_r.csv"));
        emit_heatmap(without_r, names, file("_strength_without_r.csv"));
        entry["r_csv"] = stem + "_r.csv";
        entry["strength_without_r_csv"] = stem + "_strength_without_r.csv";
        pearsons["without_r_vs_mi"] = corr(without_r);
        pearsons["r_alone_vs_mi"] = corr(abs_values(r));
      }
    }
    entry["pearson"] = pearsons;
    models.push_back(entry);
    out << stem << " (" << model_name(params.kind) << ")";
    for (const auto& [key, value] : pearsons.items())
      out << "  " << key << "=" << (value.is_null() ? std::string("undefined") : fmt(value.get<double>()));
    out << '\n';
  }
  const json summary = {{"train", args.train},
                        {"schema", first_schema},
                        {"n_instances", train.size()},
                        {"mutual_information_csv", "mi.csv"},
                        {"models", models}};
  write_text((fs::path(args.out_dir) / "analysis.json").string(), summary.dump(1) + "\n");
  return kExitOk;
}

// synth ------------------------------------------------------------------

struct SynthArgs {
  PlantOptions plant;
  std::string plant_spec;
  std::string out;
  bool samples_set = false, seed_set = false;
};

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  PlantOptions opts = args.plant;
  std::optional<SynthSpec> spec;
  if (!args.plant_spec.empty()) {
    const json doc = read_json(args.plant_spec);
    if (!doc.is_object()) throw UsageError(args.plant_spec + ": plant spec must be a JSON object");
    if (doc.contains("v_star")) {
      spec = SynthSpec::from_json(doc);
    } else {
      try {
        for (const auto& [key, value] : doc.items()) {
          if (key == "levels") opts.levels = value.get<std::vector<double>>();
          else if (key == "k") opts.k = value.get<std::size_t>();
          else if (key == "embedding_scale") opts.embedding_scale = value.get<double>();
          else if (key == "bias") opts.bias = value.get<double>();
          else if (key == "label_noise") opts.label_noise = value.get<double>();
          else if (key == "zipf_s") opts.zipf_s = value.get<double>();
          else throw UsageError(args.plant_spec + ": unknown plant option '" + key + "'");
        }
      } catch (const json::exception& e) {
        throw UsageError(args.plant_spec + ": " + e.what());
      }
    }
  }
  if (!spec) {
    spec = make_planted_spec(opts);
  } else {
    if (args.samples_set) spec->n_samples = opts.n_samples;
    if (args.seed_set) spec->seed = opts.seed;
  }
  const Dataset data = generate(*spec);
  write_libffm(args.out, data);
  write_planted_sidecar(*spec, args.out + ".planted.json");
  out << "wrote " << data.size() << " instances (" << data.positives() << " positive) to " << args.out << '\n';
  return kExitOk;
}

// sweep ------------------------------------------------------------------

struct SweepArgs {
  std::string grid;
  std::string model;
  DataOptions data;
  std::uint64_t seed = 1;
  std::string out;
};

struct Grid {
  std::optional<ModelKind> kind;
  std::vector<TrainConfig> configs;
};

Grid parse_grid(const json& doc) {
  Grid grid;
  try {
    TrainConfig base;
    json configs;
    if (doc.is_array()) {
      configs = doc;
    } else if (doc.is_object()) {
      for (const auto& [key, value] : doc.items())
        if (key != "model" && key != "base" && key != "configs" && key != "axes")
          throw UsageError("unknown grid key '" + key + "'");
      if (doc.contains("model")) grid.kind = model_from_flag(doc.at("model").get<std::string>());
      if (doc.contains("base")) base = config_from_json(doc.at("base"));
      if (doc.contains("configs")) configs = doc.at("configs");
      if (doc.contains("axes")) {
        // Cartesian product, first axis varying slowest.
        std::vector<json> product = {json::object()};
        for (const auto& [key, values] : doc.at("axes").items()) {
          if (!values.is_array() || values.empty()) throw UsageError("grid axis '" + key + "' must be a list");
          std::vector<json> next;
          for (const auto& partial : product)
            for (const auto& value : values) {
              json cell = partial;
              cell[key] = value;
              next.push_back(cell);
            }
          product = std::move(next);
        }
        if (configs.is_null()) configs = json::array();
        for (auto& cell : product) configs.push_back(cell);
      }
    } else {
      throw UsageError("grid must be a JSON array or object");
    }
    if (!configs.is_array() || configs.empty()) throw UsageError("grid has no configs");
    for (const auto& c : configs) {
      grid.configs.push_back(config_from_json(c, base));
      grid.configs.back().validate();
    }
  } catch (const ConfigError& e) {
    throw UsageError(std::string("bad grid: ") + e.what());
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad grid: ") + e.what());
  }
  return grid;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
  const Grid grid = parse_grid(read_json(args.grid));
  std::optional<ModelKind> kind = grid.kind;
  if (!args.model.empty()) kind = model_from_flag(args.model);
  if (!kind) throw UsageError("no model given (use --model or a \"model\" key in the grid)");
  const LoadedData data = load_data(args.data, args.seed);
  const auto rows = sweep(*kind, grid.configs, data.train, data.valid);
  const std::string csv = sweep_to_csv(rows);
  if (args.out.empty()) {
    out << csv;
  } else {
    write_text(args.out, csv);
    out << "wrote " << rows.size() << " rows to " << args.out << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Field-weighted factorization machines and baselines for CTR prediction", "fwfm"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train one model and write its snapshot and report");
  train_cmd->add_option("--model", train_args.model, "lr|poly2|fm|ffm|fwfm-lw|fwfm-felv|fwfm-filv")->required();
  add_data_options(train_cmd, train_args.data, true);
  add_train_config_options(train_cmd, train_args.cfg, train_args.optimizer, train_args.l2_mode);
  train_cmd->add_option("--hash-space", train_args.hash_space, "Poly2 pair hash space, or hashed-FFM rows");
  train_cmd->add_option("--out", train_args.out, "snapshot path")->required();

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "field-pair mutual information and learned strengths");
  analyze_cmd->add_option("--train", analyze_args.train, "training file")->required();
  analyze_cmd->add_option("--models", analyze_args.models, "comma-separated snapshots")
      ->required()
      ->delimiter(',');
  analyze_cmd->add_option("--out-dir", analyze_args.out_dir, "output directory")->required();
  analyze_cmd->add_option("--schema", analyze_args.schema, "schema JSON (default: <first model>.schema.json)");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted synthetic dataset");
  synth_cmd->add_option("--fields", synth_args.plant.n_fields, "number of fields");
  synth_cmd->add_option("--features-per-field", synth_args.plant.features_per_field, "features per field");
  auto* samples_opt = synth_cmd->add_option("--samples", synth_args.plant.n_samples, "number of instances");
  auto* seed_opt = synth_cmd->add_option("--seed", synth_args.plant.seed, "random seed");
  synth_cmd->add_option("--k", synth_args.plant.k, "planted embedding dimension");
  synth_cmd->add_option("--bias", synth_args.plant.bias, "planted bias logit");
  synth_cmd->add_option("--label-noise", synth_args.plant.label_noise, "label flip probability");
  synth_cmd->add_option("--zipf", synth_args.plant.zipf_s, "Zipf exponent for feature marginals (0 = uniform)");
  synth_cmd->add_option("--plant-spec", synth_args.plant_spec, "JSON with plant options or a full planted spec");
  synth_cmd->add_option("--out", synth_args.out, "output libffm file")->required();

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "train a grid of configs and tabulate validation AUC");
  sweep_cmd->add_option("--grid", sweep_args.grid, "grid JSON")->required();
  sweep_cmd->add_option("--model", sweep_args.model, "model kind (overrides the grid)");
  add_data_options(sweep_cmd, sweep_args.data, false);
  sweep_cmd->add_option("--seed", sweep_args.seed, "seed for negative downsampling");
  sweep_cmd->add_option("--out", sweep_args.out, "CSV path (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*analyze_cmd) return cmd_analyze(analyze_args, out);
    if (*synth_cmd) {
      synth_args.samples_set = samples_opt->count() > 0;
      synth_args.seed_set = seed_opt->count() > 0;
      return cmd_synth(synth_args, out);
    }
    if (*sweep_cmd) return cmd_sweep(sweep_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace fwfm::cli
