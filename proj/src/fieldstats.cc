#include "fwfm/fieldstats.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fwfm/errors.h"

namespace fwfm {

namespace {

std::uint64_t pair_key(FeatureId i, FeatureId j) { return (static_cast<std::uint64_t>(i) << 32) | j; }

struct PairCounts {
  std::uint64_t pos = 0, neg = 0;
};

// Joint (feature_k, feature_l) label counts for fields k < l.
std::unordered_map<std::uint64_t, PairCounts> count_pairs(const Dataset& data, std::size_t k, std::size_t l) {
  std::unordered_map<std::uint64_t, PairCounts> counts;
  for (const auto& inst : data.instances) {
    auto& c = counts[pair_key(inst.active[k], inst.active[l])];
    (inst.label > 0 ? c.pos : c.neg) += 1;
  }
  return counts;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Strength>
FieldPairMatrix weighted_strength(const ModelParams& params, const Dataset& train, Strength strength) {
  const std::size_t n = params.dims.n_fields;
  if (train.schema.n_fields() != n || train.schema.n_features() != params.dims.n_features)
    throw ContractError("training data does not match the model dimensions");
  FieldPairMatrix out(n, PairStat::kLearnedStrength);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      double num = 0.0;
      std::uint64_t den = 0;
      for (const auto& [key, c] : count_pairs(train, k, l)) {
        const auto i = static_cast<FeatureId>(key >> 32);
        const auto j = static_cast<FeatureId>(key & 0xffffffffu);
        const std::uint64_t count = c.pos + c.neg;
        num += strength(i, j, k, l) * static_cast<double>(count);
        den += count;
      }
      if (den == 0) {
        out.mark_unobserved(k, l);
        continue;
      }
      out.set(k, l, num / static_cast<double>(den));
    }
  }
  return out;
}

std::string format_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void FieldPairMatrix::set(std::size_t a, std::size_t b, double value) {
  if (a == b) throw ContractError("the field-pair matrix diagonal is fixed at 0");
  values_.at(a * n_ + b) = value;
  values_.at(b * n_ + a) = value;
}

std::vector<double> FieldPairMatrix::upper_triangle() const {
  std::vector<double> out;
  out.reserve(n_ * (n_ ? n_ - 1 : 0) / 2);
  for (std::size_t a = 0; a < n_; ++a)
    for (std::size_t b = a + 1; b < n_; ++b) out.push_back(at(a, b));
  return out;
}

FieldPairMatrix mutual_information(const Dataset& data) {
  const std::size_t n = data.schema.n_fields();
  const std::size_t total = data.size();
  const std::size_t pos = data.positives();
  if (total == 0 || pos == 0 || pos == total)
    throw UndefinedMetricError("mutual information needs both labels present");
  const double N = static_cast<double>(total);
  const double label_count[2] = {static_cast<double>(total - pos), static_cast<double>(pos)};

  FieldPairMatrix out(n, PairStat::kMutualInformation);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      double mi = 0.0;
      for (const auto& [key, c] : count_pairs(data, k, l)) {
        const double joint_total = static_cast<double>(c.pos + c.neg);
        const double by_label[2] = {static_cast<double>(c.neg), static_cast<double>(c.pos)};
        for (int y = 0; y < 2; ++y) {
          if (by_label[y] == 0.0) continue;
          // p((i,j),y) log(p((i,j),y) / (p(i,j) p(y))) in counts.
          mi += by_label[y] / N * std::log(by_label[y] * N / (joint_total * label_count[y]));
        }
      }
      out.set(k, l, std::max(mi, 0.0));
    }
  }
  return out;
}

FieldPairMatrix learned_strength(const ModelParams& params, const Dataset& train) {
  switch (params.kind) {
    case ModelKind::kFM:
      return weighted_strength(params, train, [&](FeatureId i, FeatureId j, std::size_t, std::size_t) {
        return std::abs(dot(params.v().row(i), params.v().row(j)));
      });
    case ModelKind::kFFM:
      return weighted_strength(params, train, [&](FeatureId i, FeatureId j, std::size_t k, std::size_t l) {
        const auto& table = params.v_field();
        return std::abs(dot(table.row(ffm_row(params, i, k, l)), table.row(ffm_row(params, j, l, k))));
      });
    case ModelKind::kFwFM_LW:
    case ModelKind::kFwFM_FeLV:
    case ModelKind::kFwFM_FiLV:
      return weighted_strength(params, train, [&](FeatureId i, FeatureId j, std::size_t k, std::size_t l) {
        return std::abs(dot(params.v().row(i), params.v().row(j)) * params.r(k, l));
      });
    default:
      throw ConfigError(std::string("learned strength is undefined for ") + std::string(model_name(params.kind)));
  }
}

FieldPairMatrix strength_without_r(const ModelParams& params, const Dataset& train) {
  if (!is_fwfm(params.kind))
    throw ConfigError("strength without r applies to FwFM models, got " + std::string(model_name(params.kind)));
  return weighted_strength(params, train, [&](FeatureId i, FeatureId j, std::size_t, std::size_t) {
    return std::abs(dot(params.v().row(i), params.v().row(j)));
  });
}

FieldPairMatrix r_weights(const ModelParams& params) {
  if (!is_fwfm(params.kind))
    throw ConfigError("r weights exist only for FwFM models, got " + std::string(model_name(params.kind)));
  const std::size_t n = params.dims.n_fields;
  FieldPairMatrix out(n, PairStat::kRWeights);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = k + 1; l < n; ++l) out.set(k, l, params.r(k, l));
  return out;
}

FieldPairMatrix abs_values(const FieldPairMatrix& m) {
  FieldPairMatrix out(m.n(), m.kind());
  for (std::size_t a = 0; a < m.n(); ++a)
    for (std::size_t b = a + 1; b < m.n(); ++b) out.set(a, b, std::abs(m.at(a, b)));
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("pearson inputs differ in length");
  if (a.size() < 2) throw UndefinedMetricError("pearson needs at least two pairs");
  auto constant = [](const std::vector<double>& x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
  };
  if (constant(a) || constant(b)) throw UndefinedMetricError("pearson is undefined for a constant input");
  const double len = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= len;
  mb /= len;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedMetricError("pearson is undefined for a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const FieldPairMatrix& a, const FieldPairMatrix& b) {
  if (a.n() != b.n()) throw ContractError("field-pair matrices differ in size");
  return pearson(a.upper_triangle(), b.upper_triangle());
}

std::string heatmap_csv(const FieldPairMatrix& mat, const std::vector<std::string>& field_names) {
  if (field_names.size() != mat.n()) throw ContractError("need one name per field");
  std::string out = "field";
  for (const auto& name : field_names) out += "," + name;
  out += "\n";
  for (std::size_t a = 0; a < mat.n(); ++a) {
    out += field_names[a];
    for (std::size_t b = 0; b < mat.n(); ++b) out += "," + format_value(mat.at(a, b));
    out += "\n";
  }
  return out;
}

void emit_heatmap(const FieldPairMatrix& mat, const std::vector<std::string>& field_names, const std::string& path) {
  const auto text = heatmap_csv(mat, field_names);
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

Heatmap parse_heatmap_csv(const std::string& text, PairStat kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty heatmap", 0);
  auto header = split_csv_row(line);
  Heatmap out;
  out.field_names.assign(header.begin() + 1, header.end());
  const std::size_t n = out.field_names.size();
  out.matrix = FieldPairMatrix(n, kind);
  for (std::size_t a = 0; a < n; ++a) {
    if (!std::getline(in, line)) throw ParseError("heatmap has too few rows", a + 2);
    const auto cells = split_csv_row(line);
    if (cells.size() != n + 1) throw ParseError("heatmap row has the wrong width", a + 2);
    for (std::size_t b = 0; b < n; ++b) {
      double value = 0.0;
      try {
        value = std::stod(cells[b + 1]);
      } catch (const std::exception&) {
        throw ParseError("bad heatmap value '" + cells[b + 1] + "'", a + 2);
      }
      if (a < b) out.matrix.set(a, b, value);
      else if (a > b && value != out.matrix.at(a, b)) throw ParseError("heatmap is not symmetric", a + 2);
    }
  }
  return out;
}

Heatmap read_heatmap(const std::string& path, PairStat kind) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_heatmap_csv(buf.str(), kind);
}

}  // namespace fwfm
