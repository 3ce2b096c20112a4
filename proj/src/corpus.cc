#include "fwfm/corpus.h"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "fwfm/errors.h"
#include "fwfm/random.h"

namespace fwfm {

namespace {

std::vector<std::string> default_field_names(std::size_t n) {
  std::vector<std::string> names(n);
  for (std::size_t f = 0; f < n; ++f) names[f] = std::to_string(f);
  return names;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Splits on runs of whitespace.
std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

struct FeatureToken {
  FieldId field;
  std::string_view feature;
};

FeatureToken split_feature_token(std::string_view tok, std::size_t line_no) {
  const auto c1 = tok.find(':');
  if (c1 == std::string_view::npos || c1 == 0 || c1 + 1 == tok.size())
    throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
  std::string_view field_str = tok.substr(0, c1);
  std::string_view rest = tok.substr(c1 + 1);
  std::string_view feature = rest;
  const auto c2 = rest.find(':');
  if (c2 != std::string_view::npos) {
    feature = rest.substr(0, c2);
    std::string_view value = rest.substr(c2 + 1);
    double v = 0;
    if (feature.empty() || !parse_number(value, v))
      throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
    if (v != 1.0)
      throw ParseError("feature value must be 1 in '" + std::string(tok) + "'", line_no);
  }
  FieldId field = 0;
  if (!parse_number(field_str, field))
    throw ParseError("bad field index in '" + std::string(tok) + "'", line_no);
  return {field, feature};
}

int parse_label(std::string_view tok, std::size_t line_no) {
  double v = 0;
  if (!parse_number(tok, v)) throw ParseError("bad label '" + std::string(tok) + "'", line_no);
  if (v == 1.0) return 1;
  if (v == -1.0 || v == 0.0) return -1;
  throw ParseError("label must be 1, -1 or 0, got '" + std::string(tok) + "'", line_no);
}

template <typename Schema, typename Lookup>
Instance parse_impl(std::string_view line, Schema& schema, std::size_t line_no, Lookup lookup) {
  const auto tokens = tokenize(line);
  if (tokens.empty()) throw ParseError("empty line", line_no);
  Instance inst;
  inst.label = parse_label(tokens[0], line_no);
  constexpr FeatureId kUnset = ~FeatureId{0};
  inst.active.assign(schema.n_fields(), kUnset);
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const auto [field, feature] = split_feature_token(tokens[t], line_no);
    if (field >= schema.n_fields())
      throw ParseError("field " + std::to_string(field) + " outside schema with " +
                           std::to_string(schema.n_fields()) + " fields",
                       line_no);
    if (inst.active[field] != kUnset)
      throw DuplicateFieldError("duplicate field " + std::to_string(field), line_no);
    inst.active[field] = lookup(field, feature);
  }
  for (FieldId f = 0; f < inst.active.size(); ++f)
    if (inst.active[f] == kUnset) inst.active[f] = schema.null_feature(f);
  return inst;
}

}  // namespace

FieldSchema::FieldSchema(std::size_t n_fields) : FieldSchema(n_fields, default_field_names(n_fields)) {}

FieldSchema::FieldSchema(std::size_t n_fields, std::vector<std::string> field_names)
    : field_names_(std::move(field_names)), lookup_(n_fields) {
  if (field_names_.size() != n_fields) throw ConfigError("field name count does not match field count");
  null_feature_of_.resize(n_fields);
  for (FieldId f = 0; f < n_fields; ++f) {
    null_feature_of_[f] = static_cast<FeatureId>(field_of_.size());
    field_of_.push_back(f);
    token_.emplace_back();
    frequency_.push_back(0);
  }
}

std::optional<FeatureId> FieldSchema::find(FieldId field, std::string_view token) const {
  const auto& table = lookup_.at(field);
  auto it = table.find(std::string(token));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

FeatureId FieldSchema::append(FieldId field, std::string token, std::uint64_t count) {
  const auto id = static_cast<FeatureId>(field_of_.size());
  field_of_.push_back(field);
  lookup_.at(field).emplace(token, id);
  token_.push_back(std::move(token));
  frequency_.push_back(count);
  return id;
}

FeatureId FieldSchema::intern(FieldId field, std::string_view token) {
  if (auto id = find(field, token)) return *id;
  return append(field, std::string(token), 0);
}

nlohmann::json FieldSchema::to_json() const {
  nlohmann::json features = nlohmann::json::array();
  for (FeatureId id = 0; id < n_features(); ++id) {
    features.push_back({{"id", id},
                        {"field", field_of_[id]},
                        {"token", token_[id]},
                        {"null", is_null(id)},
                        {"count", frequency_[id]}});
  }
  return {{"format", "fwfm-schema"},
          {"version", 1},
          {"n_fields", n_fields()},
          {"n_features", n_features()},
          {"field_names", field_names_},
          {"null_feature_of", null_feature_of_},
          {"features", std::move(features)}};
}

FieldSchema FieldSchema::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "fwfm-schema" || doc.at("version") != 1)
      throw ParseError("not a version-1 fwfm schema document", 0);
    const auto n_fields = doc.at("n_fields").get<std::size_t>();
    FieldSchema schema;
    schema.field_names_ = doc.at("field_names").get<std::vector<std::string>>();
    schema.null_feature_of_ = doc.at("null_feature_of").get<std::vector<FeatureId>>();
    schema.lookup_.resize(n_fields);
    if (schema.field_names_.size() != n_fields || schema.null_feature_of_.size() != n_fields)
      throw ParseError("schema field arrays do not match n_fields", 0);
    const auto& features = doc.at("features");
    for (std::size_t i = 0; i < features.size(); ++i) {
      const auto& f = features[i];
      if (f.at("id").get<std::size_t>() != i) throw ParseError("schema feature ids are not dense", 0);
      const auto field = f.at("field").get<FieldId>();
      if (field >= n_fields) throw ParseError("schema feature references unknown field", 0);
      const bool null = f.at("null").get<bool>();
      if (null) {
        if (schema.null_feature_of_[field] != i) throw ParseError("inconsistent NULL feature", 0);
        schema.field_of_.push_back(field);
        schema.token_.emplace_back();
        schema.frequency_.push_back(f.at("count").get<std::uint64_t>());
      } else {
        schema.append(field, f.at("token").get<std::string>(), f.at("count").get<std::uint64_t>());
      }
    }
    for (FieldId f = 0; f < n_fields; ++f)
      if (schema.null_feature_of_[f] >= schema.n_features() || schema.field_of_[schema.null_feature_of_[f]] != f)
        throw ParseError("NULL feature of field " + std::to_string(f) + " is invalid", 0);
    return schema;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid schema document: ") + e.what(), 0);
  }
}

void FieldSchema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << to_json().dump(1) << '\n';
  if (!out) throw Error("failed writing " + path);
}

FieldSchema FieldSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
  return from_json(doc);
}

bool FieldSchema::operator==(const FieldSchema& other) const {
  return field_names_ == other.field_names_ && null_feature_of_ == other.null_feature_of_ &&
         field_of_ == other.field_of_ && token_ == other.token_ && frequency_ == other.frequency_;
}

const char* role_name(Role role) {
  switch (role) {
    case Role::kTrain:
      return "train";
    case Role::kValidation:
      return "validation";
    case Role::kTest:
      return "test";
  }
  return "?";
}

std::size_t Dataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [](const Instance& i) { return i.label > 0; }));
}

void validate_instance(const Instance& inst, const FieldSchema& schema) {
  if (inst.label != 1 && inst.label != -1) throw ContractError("label must be +1 or -1");
  if (inst.active.size() != schema.n_fields())
    throw ContractError("instance has " + std::to_string(inst.active.size()) + " fields, schema has " +
                        std::to_string(schema.n_fields()));
  for (FieldId f = 0; f < inst.active.size(); ++f) {
    const FeatureId id = inst.active[f];
    if (id >= schema.n_features()) throw ContractError("feature id " + std::to_string(id) + " out of range");
    if (schema.field_of(id) != f)
      throw ContractError("feature " + std::to_string(id) + " does not belong to field " + std::to_string(f));
  }
}

Instance parse_libffm_line(std::string_view line, FieldSchema& schema, bool frozen, std::size_t line_no) {
  if (frozen) return parse_libffm_line(line, std::as_const(schema), line_no);
  Instance inst = parse_impl(line, schema, line_no,
                             [&](FieldId f, std::string_view tok) { return schema.intern(f, tok); });
  for (FeatureId id : inst.active) schema.add_count(id);
  return inst;
}

Instance parse_libffm_line(std::string_view line, const FieldSchema& schema, std::size_t line_no) {
  return parse_impl(line, schema, line_no, [&](FieldId f, std::string_view tok) {
    return schema.find(f, tok).value_or(schema.null_feature(f));
  });
}

std::string to_libffm_line(const Instance& inst, const FieldSchema& schema) {
  std::string out = inst.label > 0 ? "1" : "-1";
  for (FieldId f = 0; f < inst.active.size(); ++f) {
    const FeatureId id = inst.active[f];
    if (schema.is_null(id)) continue;
    out += ' ';
    out += std::to_string(f);
    out += ':';
    out += schema.token(id);
  }
  return out;
}

std::size_t count_fields(const std::vector<std::string>& lines) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = tokenize(lines[i]);
    for (std::size_t t = 1; t < tokens.size(); ++t)
      n = std::max<std::size_t>(n, split_feature_token(tokens[t], i + 1).field + 1);
  }
  return n;
}

std::vector<std::string> read_lines(const std::string& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (!file) throw Error("cannot open " + path);
  std::string content;
  char buf[1 << 16];
  int got;
  while ((got = gzread(file, buf, sizeof(buf))) > 0) content.append(buf, static_cast<std::size_t>(got));
  const bool failed = got < 0;
  gzclose(file);
  if (failed) throw Error("failed reading " + path);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + start, end - start);
    if (!tokenize(line).empty()) lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

Dataset parse_libffm(const std::vector<std::string>& lines, FieldSchema schema, bool frozen, Role role) {
  Dataset data;
  data.role = role;
  data.instances.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i)
    data.instances.push_back(parse_libffm_line(lines[i], schema, frozen, i + 1));
  data.schema = std::move(schema);
  return data;
}

Dataset load_libffm(const std::string& path, Role role, std::size_t min_fields) {
  const auto lines = read_lines(path);
  const std::size_t n_fields = std::max(min_fields, count_fields(lines));
  return parse_libffm(lines, FieldSchema(n_fields), false, role);
}

Dataset load_libffm(const std::string& path, const FieldSchema& schema, Role role) {
  return parse_libffm(read_lines(path), schema, true, role);
}

void write_libffm(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (const auto& inst : data.instances) out << to_libffm_line(inst, data.schema) << '\n';
  if (!out) throw Error("failed writing " + path);
}

FrequencyFilter FrequencyFilter::fit(const Dataset& train, std::uint64_t tau) {
  const FieldSchema& old = train.schema;
  std::vector<std::uint64_t> counts(old.n_features(), 0);
  for (const auto& inst : train.instances)
    for (FeatureId id : inst.active) ++counts.at(id);

  FrequencyFilter filter;
  filter.schema_ = FieldSchema(old.n_fields(), old.field_names());
  filter.remap_.assign(old.n_features(), 0);
  for (FeatureId id = 0; id < old.n_features(); ++id) {
    const FieldId f = old.field_of(id);
    FeatureId mapped;
    if (old.is_null(id) || counts[id] < tau) {
      mapped = filter.schema_.null_feature(f);
    } else {
      mapped = filter.schema_.intern(f, old.token(id));
    }
    filter.remap_[id] = mapped;
    filter.schema_.add_count(mapped, counts[id]);
  }
  return filter;
}

Instance FrequencyFilter::apply(const Instance& inst) const {
  Instance out = inst;
  for (auto& id : out.active) id = remap_.at(id);
  return out;
}

Dataset FrequencyFilter::apply(const Dataset& data) const {
  if (data.schema.n_features() != remap_.size())
    throw ContractError("dataset schema does not match the fitted frequency filter");
  Dataset out;
  out.schema = schema_;
  out.role = data.role;
  out.instances.reserve(data.size());
  for (const auto& inst : data.instances) out.instances.push_back(apply(inst));
  return out;
}

FilteredDataset apply_frequency_filter(const Dataset& train, std::uint64_t tau) {
  auto filter = FrequencyFilter::fit(train, tau);
  Dataset data = filter.apply(train);
  return {std::move(data), std::move(filter)};
}

Dataset downsample_negatives(const Dataset& train, double keep_rate, std::uint64_t seed) {
  if (train.role != Role::kTrain)
    throw ConfigError(std::string("negative downsampling applies to training data only, got ") +
                      role_name(train.role));
  if (!(keep_rate > 0.0 && keep_rate <= 1.0))
    throw ConfigError("keep rate must lie in (0, 1], got " + std::to_string(keep_rate));
  Dataset out;
  out.schema = train.schema;
  out.role = train.role;
  Rng rng(seed);
  for (const auto& inst : train.instances) {
    if (inst.label > 0 || bernoulli(rng, keep_rate)) out.instances.push_back(inst);
  }
  return out;
}

Splits split_dataset(const Dataset& data, std::array<unsigned, 3> ratios, std::uint64_t seed) {
  if (ratios[0] + ratios[1] + ratios[2] != 100) throw ConfigError("split ratios must sum to 100");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span(order), rng);

  const std::size_t n_train = n * ratios[0] / 100;
  const std::size_t n_valid = n * ratios[1] / 100;
  const std::size_t bounds[4] = {0, n_train, n_train + n_valid, n};
  const Role roles[3] = {Role::kTrain, Role::kValidation, Role::kTest};

  Splits out;
  Dataset* parts[3] = {&out.train, &out.validation, &out.test};
  for (int p = 0; p < 3; ++p) {
    parts[p]->schema = data.schema;
    parts[p]->role = roles[p];
    std::vector<std::size_t> idx(order.begin() + bounds[p], order.begin() + bounds[p + 1]);
    std::sort(idx.begin(), idx.end());
    parts[p]->instances.reserve(idx.size());
    for (auto i : idx) parts[p]->instances.push_back(data.instances[i]);
  }
  return out;
}

}  // namespace fwfm
