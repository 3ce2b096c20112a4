#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fwfm/errors.h"
#include "fwfm/fieldstats.h"
#include "fwfm/random.h"
#include "test_util.h"

namespace fwfm {
namespace {

// Two fields with features a0,a1 and b0,b1; counts[(i, j, y)] copies of each row.
Dataset from_table(const std::map<std::tuple<int, int, int>, int>& counts) {
  Dataset d;
  d.schema = FieldSchema(2);
  const FeatureId a[2] = {d.schema.intern(0, "a0"), d.schema.intern(0, "a1")};
  const FeatureId b[2] = {d.schema.intern(1, "b0"), d.schema.intern(1, "b1")};
  for (const auto& [key, c] : counts) {
    const auto [i, j, y] = key;
    for (int r = 0; r < c; ++r) d.instances.push_back({y, {a[i], b[j]}});
  }
  return d;
}

double direct_mi(const std::map<std::tuple<int, int, int>, int>& counts) {
  double total = 0.0;
  std::map<std::pair<int, int>, double> pair;
  std::map<int, double> label;
  for (const auto& [key, c] : counts) {
    const auto [i, j, y] = key;
    total += c;
    pair[{i, j}] += c;
    label[y] += c;
  }
  double mi = 0.0;
  for (const auto& [key, c] : counts) {
    if (c == 0) continue;
    const auto [i, j, y] = key;
    const double p = c / total;
    mi += p * std::log(p / ((pair[{i, j}] / total) * (label[y] / total)));
  }
  return mi;
}

TEST(MutualInformation, IndependentPairIsZero) {
  std::map<std::tuple<int, int, int>, int> counts;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      counts[{i, j, 1}] = 3;
      counts[{i, j, -1}] = 9;
    }
  const auto mi = mutual_information(from_table(counts));
  EXPECT_NEAR(mi.at(0, 1), 0.0, 1e-12);
  EXPECT_EQ(mi.at(0, 0), 0.0);
}

TEST(MutualInformation, DeterministicPairGivesLabelEntropy) {
  const auto mi = mutual_information(from_table({{{0, 0, 1}, 5}, {{1, 1, -1}, 5}, {{0, 1, 1}, 5}, {{1, 0, -1}, 5}}));
  EXPECT_NEAR(mi.at(0, 1), std::log(2.0), 1e-12);
  EXPECT_EQ(mi.at(1, 0), mi.at(0, 1));
}

TEST(MutualInformation, HandBuiltTablesMatchDirectSum) {
  Rng rng(4);
  for (int c = 0; c < 100; ++c) {
    std::map<std::tuple<int, int, int>, int> counts;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int y : {1, -1}) counts[{i, j, y}] = static_cast<int>(uniform_index(rng, 9));
    counts[{0, 0, 1}] += 1;
    counts[{1, 1, -1}] += 1;
    EXPECT_NEAR(mutual_information(from_table(counts)).at(0, 1), direct_mi(counts), 1e-12);
  }
}

TEST(MutualInformation, SingleLabelIsUndefined) {
  EXPECT_THROW(mutual_information(from_table({{{0, 0, 1}, 3}})), UndefinedMetricError);
  EXPECT_THROW(mutual_information(from_table({})), UndefinedMetricError);
}

TEST(MutualInformation, IndependentFieldsConvergeToZero) {
  const auto schema = testing::make_schema(3, 4);
  Rng rng(21);
  Dataset d;
  d.schema = schema;
  for (int s = 0; s < 100000; ++s) {
    Instance inst;
    inst.label = bernoulli(rng, 0.5) ? 1 : -1;
    // Skip NULLs: features 3.. are the named ones, four per field.
    for (FieldId f = 0; f < 3; ++f) inst.active.push_back(3 + f * 4 + static_cast<FeatureId>(uniform_index(rng, 4)));
    d.instances.push_back(inst);
  }
  const auto mi = mutual_information(d);
  for (double x : mi.upper_triangle()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 0.01);
  }
}

struct TwoFieldModel {
  FieldSchema schema{2};
  FeatureId a = schema.intern(0, "a");
  FeatureId b = schema.intern(1, "b");
  Dataset data() const {
    Dataset d;
    d.schema = schema;
    d.instances = {{1, {a, b}}, {-1, {a, b}}};
    return d;
  }
  ModelDims dims() const { return {schema.n_features(), 2, 2, 0, 0}; }
};

TEST(LearnedStrength, SinglePairIsExact) {
  TwoFieldModel t;
  auto p = make_params(ModelKind::kFwFM_LW, t.dims());
  p.v().row(t.a)[0] = 0.3;
  p.v().row(t.a)[1] = -1.1;
  p.v().row(t.b)[0] = 2.0;
  p.v().row(t.b)[1] = 0.7;
  p.set_r(0, 1, -1.5);
  const double dot = 0.3 * 2.0 + -1.1 * 0.7;
  EXPECT_EQ(learned_strength(p, t.data()).at(0, 1), std::abs(dot * -1.5));
  EXPECT_EQ(strength_without_r(p, t.data()).at(0, 1), std::abs(dot));
  EXPECT_EQ(r_weights(p).at(1, 0), -1.5);
}

TEST(LearnedStrength, ZeroEmbeddingsGiveZero) {
  const auto schema = testing::make_schema(4, 3);
  Rng rng(2);
  Dataset d;
  d.schema = schema;
  for (int i = 0; i < 50; ++i) d.instances.push_back(testing::random_instance(schema, rng));
  for (auto kind : {ModelKind::kFM, ModelKind::kFFM, ModelKind::kFwFM_FeLV}) {
    const auto p = make_params(kind, {schema.n_features(), 4, 3, 0, 0});
    for (double x : learned_strength(p, d).upper_triangle()) EXPECT_EQ(x, 0.0);
  }
  EXPECT_THROW(learned_strength(make_params(ModelKind::kLR, {schema.n_features(), 4, 3, 0, 0}), d), ConfigError);
  EXPECT_THROW(strength_without_r(make_params(ModelKind::kFM, {schema.n_features(), 4, 3, 0, 0}), d), ConfigError);
}

TEST(LearnedStrength, WeightsByCooccurrence) {
  // Field 0 has a, a2; field 1 has b. (a,b) three times, (a2,b) once.
  FieldSchema schema(2);
  const FeatureId a = schema.intern(0, "a"), a2 = schema.intern(0, "a2"), b = schema.intern(1, "b");
  Dataset d;
  d.schema = schema;
  d.instances = {{1, {a, b}}, {1, {a, b}}, {-1, {a, b}}, {-1, {a2, b}}};
  auto p = make_params(ModelKind::kFM, {schema.n_features(), 2, 1, 0, 0});
  p.v().row(a)[0] = 2.0;
  p.v().row(a2)[0] = -4.0;
  p.v().row(b)[0] = 1.0;
  EXPECT_NEAR(learned_strength(p, d).at(0, 1), (3 * 2.0 + 1 * 4.0) / 4.0, 1e-15);
}

TEST(LearnedStrength, FFMUsesCrossFieldCopies) {
  TwoFieldModel t;
  auto p = make_params(ModelKind::kFFM, t.dims());
  auto va = p.v_field().row(ffm_row(p, t.a, 0, 1));
  auto vb = p.v_field().row(ffm_row(p, t.b, 1, 0));
  va[0] = 1.5;
  vb[0] = -2.0;
  va[1] = 1.0;
  vb[1] = 0.5;
  EXPECT_EQ(learned_strength(p, t.data()).at(0, 1), 2.5);
}

TEST(LearnedStrength, ReductionsAndInvariances) {
  const auto schema = testing::make_schema(5, 3);
  Rng rng(8);
  Dataset d;
  d.schema = schema;
  for (int i = 0; i < 200; ++i) d.instances.push_back(testing::random_instance(schema, rng));
  const ModelDims dims{schema.n_features(), 5, 3, 0, 0};
  const auto fm = testing::random_params(ModelKind::kFM, dims, rng);
  auto fwfm = make_params(ModelKind::kFwFM_LW, dims);
  fwfm.v() = fm.v();
  for (auto& r : fwfm.block(Block::kFieldPair).values) r = 1.0;
  const auto s_fm = learned_strength(fm, d);
  EXPECT_EQ(learned_strength(fwfm, d), s_fm);
  EXPECT_EQ(strength_without_r(fwfm, d), s_fm);

  for (auto& r : fwfm.block(Block::kFieldPair).values) r = -2.5;
  EXPECT_EQ(strength_without_r(fwfm, d), s_fm);
  EXPECT_NEAR(pearson(learned_strength(fwfm, d), strength_without_r(fwfm, d)), 1.0, 1e-12);

  // Flipping the sign of every embedding leaves |<v_i, v_j>| unchanged.
  auto flipped = fwfm;
  for (auto& x : flipped.v().values) x = -x;
  EXPECT_EQ(learned_strength(flipped, d), learned_strength(fwfm, d));
}

TEST(LearnedStrength, UnobservedPairsAreZeroAndFlagged) {
  FieldSchema schema(3);
  const FeatureId a = schema.intern(0, "a"), b = schema.intern(1, "b");
  Dataset d;
  d.schema = schema;
  // Field 2 only ever holds its NULL feature, which still co-occurs; drop it
  // from the data by building instances with NULLs everywhere except 0 and 1.
  d.instances = {{1, {a, b, schema.null_feature(2)}}};
  auto p = make_params(ModelKind::kFM, {schema.n_features(), 3, 1, 0, 0});
  for (auto& x : p.v().values) x = 1.0;
  const auto s = learned_strength(p, d);
  EXPECT_EQ(s.at(0, 1), 1.0);
  EXPECT_TRUE(s.unobserved().empty());
  Dataset empty;
  empty.schema = schema;
  const auto none = learned_strength(p, empty);
  EXPECT_EQ(none.unobserved().size(), 3u);
  for (double x : none.upper_triangle()) EXPECT_EQ(x, 0.0);
}

TEST(Pearson, Examples) {
  const std::vector<double> a = {0.1, 0.5, -0.2, 0.9, 0.3, 0.0};
  std::vector<double> affine, neg;
  for (double x : a) {
    affine.push_back(2 * x + 3);
    neg.push_back(-x);
  }
  EXPECT_NEAR(pearson(a, affine), 1.0, 1e-12);
  EXPECT_NEAR(pearson(a, neg), -1.0, 1e-12);
  EXPECT_NEAR(pearson(a, a), 1.0, 1e-12);
  EXPECT_THROW(pearson(a, std::vector<double>(6, 0.2)), UndefinedMetricError);
  EXPECT_THROW(pearson(std::vector<double>{1.0}, std::vector<double>{2.0}), UndefinedMetricError);
}

TEST(Pearson, MatchesTextbookFormula) {
  Rng rng(3);
  for (int c = 0; c < 500; ++c) {
    std::vector<double> a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a[i] = uniform_real(rng, -1, 1);
      b[i] = uniform_real(rng, -1, 1);
    }
    // n Σab − Σa Σb over sqrt of the two variance terms.
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 6; ++i) {
      sa += a[i];
      sb += b[i];
      sab += a[i] * b[i];
      saa += a[i] * a[i];
      sbb += b[i] * b[i];
    }
    const double expected = (6 * sab - sa * sb) / std::sqrt((6 * saa - sa * sa) * (6 * sbb - sb * sb));
    EXPECT_NEAR(pearson(a, b), expected, 1e-12);
  }
}

TEST(Pearson, MatrixUsesUpperTriangle) {
  FieldPairMatrix a(3, PairStat::kMutualInformation), b(3, PairStat::kRWeights);
  a.set(0, 1, 1.0);
  a.set(0, 2, 2.0);
  a.set(1, 2, 3.0);
  b.set(0, 1, 10.0);
  b.set(0, 2, 20.0);
  b.set(1, 2, 30.0);
  EXPECT_NEAR(pearson(a, b), 1.0, 1e-12);
  EXPECT_EQ(a.upper_triangle(), (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_THROW(a.set(1, 1, 1.0), ContractError);
}

TEST(Heatmap, CsvShapeAndRoundTrip) {
  FieldPairMatrix m(2, PairStat::kMutualInformation);
  m.set(0, 1, 0.1 + 0.2);
  const auto csv = heatmap_csv(m, {"gender", "site"});
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 3u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "field,gender,site");
  const auto back = parse_heatmap_csv(csv);
  EXPECT_EQ(back.field_names, (std::vector<std::string>{"gender", "site"}));
  EXPECT_EQ(back.matrix, m);

  FieldPairMatrix zero(4, PairStat::kLearnedStrength);
  const auto z = parse_heatmap_csv(heatmap_csv(zero, {"a", "b", "c", "d"}));
  for (double x : z.matrix.upper_triangle()) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(heatmap_csv(zero, {"a"}), ContractError);
}

TEST(Heatmap, RandomRoundTrip) {
  Rng rng(10);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 2 + uniform_index(rng, 6);
    FieldPairMatrix m(n, PairStat::kLearnedStrength);
    std::vector<std::string> names;
    for (std::size_t a = 0; a < n; ++a) {
      names.push_back("f" + std::to_string(a));
      for (std::size_t b = a + 1; b < n; ++b) m.set(a, b, uniform_real(rng, -1e3, 1e3));
    }
    EXPECT_EQ(parse_heatmap_csv(heatmap_csv(m, names), PairStat::kLearnedStrength).matrix, m);
  }
}

}  // namespace
}  // namespace fwfm
