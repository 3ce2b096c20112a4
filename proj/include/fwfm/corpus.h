#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace fwfm {

using FeatureId = std::uint32_t;
using FieldId = std::uint32_t;

// Feature vocabulary of a multi-field categorical corpus. Every feature belongs
// to exactly one field, ids are dense in [0, n_features()), and every field owns
// one NULL feature standing in for missing or filtered values.
class FieldSchema {
 public:
  FieldSchema() = default;
  explicit FieldSchema(std::size_t n_fields);
  FieldSchema(std::size_t n_fields, std::vector<std::string> field_names);

  std::size_t n_fields() const { return null_feature_of_.size(); }
  std::size_t n_features() const { return field_of_.size(); }

  FieldId field_of(FeatureId id) const { return field_of_.at(id); }
  FeatureId null_feature(FieldId field) const { return null_feature_of_.at(field); }
  bool is_null(FeatureId id) const { return null_feature_of_.at(field_of(id)) == id; }
  std::uint64_t frequency(FeatureId id) const { return frequency_.at(id); }
  const std::vector<std::uint64_t>& frequencies() const { return frequency_; }
  const std::vector<std::string>& field_names() const { return field_names_; }

  // Raw token of a feature; empty for NULL features.
  const std::string& token(FeatureId id) const { return token_.at(id); }

  std::optional<FeatureId> find(FieldId field, std::string_view token) const;
  // Returns the id of (field, token), adding the feature if unseen.
  FeatureId intern(FieldId field, std::string_view token);
  void add_count(FeatureId id, std::uint64_t count = 1) { frequency_.at(id) += count; }

  nlohmann::json to_json() const;
  static FieldSchema from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static FieldSchema load(const std::string& path);

  bool operator==(const FieldSchema& other) const;

 private:
  FeatureId append(FieldId field, std::string token, std::uint64_t count);

  std::vector<std::string> field_names_;
  std::vector<FeatureId> null_feature_of_;
  std::vector<FieldId> field_of_;
  std::vector<std::string> token_;
  std::vector<std::uint64_t> frequency_;
  std::vector<std::unordered_map<std::string, FeatureId>> lookup_;
};

// One labeled example. active[f] is the single active feature of field f.
struct Instance {
  int label = -1;  // +1 or -1
  std::vector<FeatureId> active;

  bool operator==(const Instance&) const = default;
};

enum class Role { kTrain, kValidation, kTest };

const char* role_name(Role role);

struct Dataset {
  FieldSchema schema;
  std::vector<Instance> instances;
  Role role = Role::kTrain;

  std::size_t size() const { return instances.size(); }
  std::size_t positives() const;
};

// Throws ContractError unless inst has one in-vocabulary feature per field.
void validate_instance(const Instance& inst, const FieldSchema& schema);

// Parses `label field:feature[:value] ...`. Labels 1, -1 and 0 (as -1) are
// accepted; value must be 1 when present. Fields must lie inside the schema;
// missing fields get their NULL feature. With frozen=false unseen tokens are
// added and frequencies counted, otherwise unseen tokens map to NULL.
Instance parse_libffm_line(std::string_view line, FieldSchema& schema, bool frozen,
                           std::size_t line_no = 0);
Instance parse_libffm_line(std::string_view line, const FieldSchema& schema,
                           std::size_t line_no = 0);

// Inverse of parse_libffm_line under a frozen schema. NULL features are omitted.
std::string to_libffm_line(const Instance& inst, const FieldSchema& schema);

// Largest field index referenced in the text plus one (0 for no features).
std::size_t count_fields(const std::vector<std::string>& lines);

// Reads a libffm file (gzip transparently) into lines, dropping blank lines.
std::vector<std::string> read_lines(const std::string& path);

// Builds a fresh schema; n_fields is max(min_fields, fields seen in the file).
Dataset load_libffm(const std::string& path, Role role, std::size_t min_fields = 0);
// Parses under a frozen schema.
Dataset load_libffm(const std::string& path, const FieldSchema& schema, Role role);
Dataset parse_libffm(const std::vector<std::string>& lines, FieldSchema schema, bool frozen,
                     Role role);

void write_libffm(const std::string& path, const Dataset& data);

// Frequency filter fitted on a training split. Features seen fewer than tau
// times are folded into their field's NULL feature and ids are re-densified.
class FrequencyFilter {
 public:
  static FrequencyFilter fit(const Dataset& train, std::uint64_t tau);

  const FieldSchema& schema() const { return schema_; }
  FeatureId map(FeatureId old_id) const { return remap_.at(old_id); }
  Instance apply(const Instance& inst) const;
  // Reapplies the fitted decisions to any split parsed under the original schema.
  Dataset apply(const Dataset& data) const;

 private:
  FieldSchema schema_;
  std::vector<FeatureId> remap_;
};

struct FilteredDataset {
  Dataset data;  // data.schema is the reduced schema
  FrequencyFilter filter;
};

FilteredDataset apply_frequency_filter(const Dataset& train, std::uint64_t tau);

// Keeps every positive and each negative with probability keep_rate.
// Only training splits are accepted.
Dataset downsample_negatives(const Dataset& train, double keep_rate, std::uint64_t seed);

struct Splits {
  Dataset train, validation, test;
};

// Deterministic shuffle-partition. Sizes are floor(N*r0/100), floor(N*r1/100)
// and the remainder.
Splits split_dataset(const Dataset& data, std::array<unsigned, 3> ratios, std::uint64_t seed);

}  // namespace fwfm
