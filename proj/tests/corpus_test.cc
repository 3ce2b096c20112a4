#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <zlib.h>

#include "fwfm/corpus.h"
#include "fwfm/errors.h"
#include "fwfm/random.h"
#include "test_util.h"

namespace fwfm {
namespace {

namespace fs = std::filesystem;

TEST(Parse, TableOneRow) {
  FieldSchema schema(3);
  const auto inst = parse_libffm_line("1 0:Male 1:Nike 2:nba.com", schema, false);
  EXPECT_EQ(inst.label, 1);
  ASSERT_EQ(inst.active.size(), 3u);
  EXPECT_EQ(inst.active[0], *schema.find(0, "Male"));
  EXPECT_EQ(inst.active[1], *schema.find(1, "Nike"));
  EXPECT_EQ(inst.active[2], *schema.find(2, "nba.com"));
  for (FieldId f = 0; f < 3; ++f) EXPECT_EQ(schema.field_of(inst.active[f]), f);
  EXPECT_EQ(schema.frequency(inst.active[1]), 1u);
}

TEST(Parse, AllMissingFieldsBecomeNull) {
  FieldSchema schema(2);
  const auto inst = parse_libffm_line("-1", schema, false);
  EXPECT_EQ(inst.label, -1);
  EXPECT_EQ(inst.active, (std::vector<FeatureId>{schema.null_feature(0), schema.null_feature(1)}));
}

TEST(Parse, Errors) {
  FieldSchema schema(2);
  EXPECT_THROW(parse_libffm_line("1 0:A 0:B", schema, false), DuplicateFieldError);
  EXPECT_THROW(parse_libffm_line("2 0:A", schema, false), ParseError);
  EXPECT_THROW(parse_libffm_line("1 0:A:0.5", schema, false), ParseError);
  EXPECT_THROW(parse_libffm_line("1 A", schema, false), ParseError);
  EXPECT_THROW(parse_libffm_line("1 5:A", schema, false), ParseError);
  EXPECT_THROW(parse_libffm_line("", schema, false), ParseError);
  try {
    parse_libffm_line("1 x:y", schema, false, 17);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST(Parse, ZeroLabelAndExplicitValue) {
  FieldSchema schema(2);
  const auto inst = parse_libffm_line("0 1:x:1", schema, false);
  EXPECT_EQ(inst.label, -1);
  EXPECT_EQ(inst.active[1], *schema.find(1, "x"));
}

TEST(Parse, FrozenMapsUnseenToNull) {
  FieldSchema schema(2);
  parse_libffm_line("1 0:a 1:b", schema, false);
  const auto before = schema;
  const auto inst = parse_libffm_line("1 0:a 1:zzz", schema, true);
  EXPECT_EQ(inst.active[1], schema.null_feature(1));
  EXPECT_EQ(schema, before);
  EXPECT_EQ(schema.frequency(*schema.find(0, "a")), 1u);
}

TEST(Parse, RoundTripUnderFrozenSchema) {
  const auto schema = testing::make_schema(5, 6);
  Rng rng(3);
  for (int s = 0; s < 1000; ++s) {
    const auto inst = testing::random_instance(schema, rng);
    EXPECT_EQ(parse_libffm_line(to_libffm_line(inst, schema), schema), inst);
  }
}

TEST(Schema, JsonRoundTrip) {
  FieldSchema schema(3, {"gender", "advertiser", "publisher"});
  parse_libffm_line("1 0:Male 1:Nike 2:nba.com", schema, false);
  parse_libffm_line("-1 0:Female 1:Nike", schema, false);
  const auto back = FieldSchema::from_json(schema.to_json());
  EXPECT_EQ(back, schema);
  EXPECT_EQ(back.field_names()[1], "advertiser");
  EXPECT_EQ(back.frequency(*back.find(1, "Nike")), 2u);
}

TEST(Files, GzipIsTransparent) {
  const auto dir = fs::temp_directory_path() / "fwfm_corpus_test";
  fs::create_directories(dir);
  const std::string text = "1 0:a 1:b\n\n-1 0:c\n";
  {
    std::ofstream(dir / "plain.ffm") << text;
    gzFile gz = gzopen((dir / "packed.ffm.gz").c_str(), "wb");
    gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
    gzclose(gz);
  }
  const auto plain = load_libffm((dir / "plain.ffm").string(), Role::kTrain);
  const auto packed = load_libffm((dir / "packed.ffm.gz").string(), Role::kTrain);
  EXPECT_EQ(plain.size(), 2u);
  EXPECT_EQ(plain.instances, packed.instances);
  EXPECT_EQ(plain.schema, packed.schema);
  EXPECT_THROW(load_libffm((dir / "missing.ffm").string(), Role::kTrain), Error);
  fs::remove_all(dir);
}

Dataset parse_lines(const std::vector<std::string>& lines, std::size_t n_fields) {
  return parse_libffm(lines, FieldSchema(n_fields), false, Role::kTrain);
}

TEST(FrequencyFilter, TauZeroKeepsEverything) {
  const auto data = parse_lines({"1 0:a 1:b", "-1 0:a 1:c", "1 0:d"}, 2);
  const auto out = apply_frequency_filter(data, 0);
  ASSERT_EQ(out.data.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (FieldId f = 0; f < 2; ++f)
      EXPECT_EQ(out.data.schema.token(out.data.instances[i].active[f]),
                data.schema.token(data.instances[i].active[f]));
  EXPECT_EQ(out.data.schema.n_features(), data.schema.n_features());
}

TEST(FrequencyFilter, RareFeatureFoldsIntoNull) {
  std::vector<std::string> lines;
  for (int i = 0; i < 5; ++i) lines.push_back("1 0:rare 1:common");
  for (int i = 0; i < 10; ++i) lines.push_back("-1 0:often 1:common");
  const auto data = parse_lines(lines, 2);
  const auto out = apply_frequency_filter(data, 10);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out.data.instances[i].active[0], out.data.schema.null_feature(0));
  EXPECT_FALSE(out.data.schema.find(0, "rare"));
  EXPECT_TRUE(out.data.schema.find(0, "often"));
  // Reapplied verbatim to a split parsed under the original schema.
  const auto valid = parse_libffm({"1 0:rare 1:common", "1 0:often 1:new"}, data.schema, true, Role::kValidation);
  const auto mapped = out.filter.apply(valid);
  EXPECT_EQ(mapped.role, Role::kValidation);
  EXPECT_EQ(mapped.instances[0].active[0], out.data.schema.null_feature(0));
  EXPECT_EQ(mapped.instances[1].active[1], out.data.schema.null_feature(1));
  EXPECT_EQ(mapped.instances[1].active[0], *out.data.schema.find(0, "often"));
}

TEST(FrequencyFilter, SaturatesToAllNull) {
  const auto data = parse_lines({"1 0:a 1:b 2:c", "-1 0:a 1:d 2:e", "1 0:f 1:b 2:e"}, 3);
  const auto out = apply_frequency_filter(data, 20);
  EXPECT_EQ(out.data.schema.n_features(), 3u);
  for (const auto& inst : out.data.instances)
    for (FieldId f = 0; f < 3; ++f) EXPECT_EQ(inst.active[f], out.data.schema.null_feature(f));
}

// Random corpora with skewed token use, checked against direct counts.
TEST(FrequencyFilter, PostConditionOnRandomCorpora) {
  Rng rng(77);
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + uniform_index(rng, 4);
    const std::size_t rows = uniform_index(rng, 40);
    std::vector<std::string> lines;
    for (std::size_t r = 0; r < rows; ++r) {
      std::string line = bernoulli(rng, 0.3) ? "1" : "-1";
      for (std::size_t f = 0; f < n; ++f) {
        if (bernoulli(rng, 0.1)) continue;
        const auto tok = uniform_index(rng, 1 + uniform_index(rng, 12));
        line += " " + std::to_string(f) + ":t" + std::to_string(tok);
      }
      lines.push_back(line);
    }
    const auto data = parse_lines(lines, n);
    const std::uint64_t tau = uniform_index(rng, 8);
    std::map<std::pair<FieldId, std::string>, std::uint64_t> counts;
    for (const auto& inst : data.instances)
      for (FieldId f = 0; f < n; ++f)
        if (!data.schema.is_null(inst.active[f])) ++counts[{f, data.schema.token(inst.active[f])}];

    const auto out = apply_frequency_filter(data, tau);
    ASSERT_EQ(out.data.size(), data.size());
    for (FeatureId id = 0; id < out.data.schema.n_features(); ++id) {
      const FieldId f = out.data.schema.field_of(id);
      ASSERT_LT(f, n);
      if (!out.data.schema.is_null(id)) {
        EXPECT_GE((counts[{f, out.data.schema.token(id)}]), tau);
      }
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      EXPECT_EQ(out.data.instances[i].label, data.instances[i].label);
      for (FieldId f = 0; f < n; ++f) {
        const FeatureId before = data.instances[i].active[f], after = out.data.instances[i].active[f];
        validate_instance(out.data.instances[i], out.data.schema);
        if (data.schema.is_null(before) || counts[std::make_pair(f, data.schema.token(before))] < tau)
          EXPECT_TRUE(out.data.schema.is_null(after));
        else
          EXPECT_EQ(out.data.schema.token(after), data.schema.token(before));
      }
    }
  }
}

Dataset labelled(std::size_t positives, std::size_t negatives) {
  Dataset d;
  d.schema = FieldSchema(1);
  for (std::size_t i = 0; i < positives; ++i) d.instances.push_back({1, {0}});
  for (std::size_t i = 0; i < negatives; ++i) d.instances.push_back({-1, {0}});
  return d;
}

TEST(Downsample, KeepRateOneIsIdentity) {
  const auto d = labelled(10, 30);
  EXPECT_EQ(downsample_negatives(d, 1.0, 5).instances, d.instances);
}

TEST(Downsample, BinomialBound) {
  const auto d = labelled(0, 10000);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto out = downsample_negatives(d, 0.5, seed);
    EXPECT_GE(out.size(), 4700u);
    EXPECT_LE(out.size(), 5300u);
    EXPECT_EQ(downsample_negatives(d, 0.5, seed).size(), out.size());
  }
}

TEST(Downsample, RefusesHeldOutSplitsAndBadRates) {
  auto d = labelled(3, 3);
  EXPECT_THROW(downsample_negatives(d, 0.0, 1), ConfigError);
  EXPECT_THROW(downsample_negatives(d, 1.5, 1), ConfigError);
  d.role = Role::kValidation;
  EXPECT_THROW(downsample_negatives(d, 0.5, 1), ConfigError);
  d.role = Role::kTest;
  EXPECT_THROW(downsample_negatives(d, 0.5, 1), ConfigError);
}

TEST(Downsample, NeverDropsPositives) {
  Rng rng(12);
  for (int c = 0; c < 1000; ++c) {
    const auto pos = uniform_index(rng, 30), neg = uniform_index(rng, 30);
    auto d = labelled(pos, neg);
    shuffle(std::span(d.instances), rng);
    const double rate = 1e-3 + uniform01(rng) * (1.0 - 1e-3);
    const auto out = downsample_negatives(d, rate, c);
    EXPECT_EQ(out.positives(), pos);
    EXPECT_LE(out.size() - out.positives(), neg);
  }
}

// Instances made distinguishable by a unique token in field 0.
Dataset tagged(std::size_t size) {
  Dataset d;
  d.schema = FieldSchema(1);
  for (std::size_t i = 0; i < size; ++i)
    d.instances.push_back({i % 3 == 0 ? 1 : -1, {d.schema.intern(0, std::to_string(i))}});
  return d;
}

TEST(Split, ExactMultiples) {
  const auto s = split_dataset(tagged(10), {60, 20, 20}, 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.validation.role, Role::kValidation);
}

TEST(Split, LargeCorpusSizesAndDeterminism) {
  const auto d = tagged(100000);
  const auto a = split_dataset(d, {60, 20, 20}, 9);
  EXPECT_NEAR(static_cast<double>(a.train.size()), 60000.0, 1.0);
  EXPECT_NEAR(static_cast<double>(a.validation.size()), 20000.0, 1.0);
  EXPECT_NEAR(static_cast<double>(a.test.size()), 20000.0, 1.0);
  const auto b = split_dataset(d, {60, 20, 20}, 9);
  EXPECT_EQ(a.train.instances, b.train.instances);
  EXPECT_EQ(a.test.instances, b.test.instances);
  EXPECT_NE(split_dataset(d, {60, 20, 20}, 10).train.instances, a.train.instances);
}

TEST(Split, EmptyInput) {
  const auto s = split_dataset(tagged(0), {60, 20, 20}, 1);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), 0u);
  EXPECT_THROW(split_dataset(tagged(4), {50, 20, 20}, 1), ConfigError);
}

TEST(Split, PartitionOnRandomInputs) {
  Rng rng(31);
  for (int c = 0; c < 1000; ++c) {
    const auto size = uniform_index(rng, 200);
    const auto d = tagged(size);
    const unsigned a = static_cast<unsigned>(uniform_index(rng, 101));
    const unsigned b = static_cast<unsigned>(uniform_index(rng, 101 - a));
    const auto s = split_dataset(d, {a, b, 100 - a - b}, c);
    ASSERT_EQ(s.train.size() + s.validation.size() + s.test.size(), size);
    std::set<FeatureId> seen;
    for (const auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& inst : part->instances) EXPECT_TRUE(seen.insert(inst.active[0]).second);
    EXPECT_EQ(seen.size(), size);
  }
}

}  // namespace
}  // namespace fwfm
