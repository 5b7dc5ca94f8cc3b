#include <cmath>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "hirsute/dataset.hpp"
#include "hirsute/errors.hpp"
#include "hirsute/mask_io.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace hirsute;
using ::testing::HasSubstr;

namespace {

template <typename E, typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected exception";
  return {};
}

}  // namespace

TEST(EmbeddingStore, NormalizesRows) {
  auto s = EmbeddingStore::from_rows(2, {3.0f, 4.0f, 0.0f, -2.0f});
  EXPECT_EQ(s.count(), 2u);
  EXPECT_FLOAT_EQ(s.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(s.row(0)[1], 0.8f);
  EXPECT_FLOAT_EQ(s.row(1)[1], -1.0f);
}

TEST(EmbeddingStore, ZeroRowNamesIndex) {
  const auto msg = error_of<DataError>(
      [] { EmbeddingStore::from_rows(2, {1.0f, 0.0f, 0.0f, 0.0f}); });
  EXPECT_THAT(msg, HasSubstr("1"));
}

TEST(EmbeddingStore, RaggedValuesRejected) {
  EXPECT_THROW(EmbeddingStore::from_rows(3, {1.0f, 2.0f}), DataError);
}

TEST(EmbeddingFile, RoundTripAndValidation) {
  oracle::TempDir dir("emb");
  const auto s = EmbeddingStore::from_rows(3, {1, 2, 3, -1, 0, 1});
  const auto p = dir.path() / "e.bin";
  write_embeddings(s, p);
  EXPECT_EQ(load_embeddings(p), s);
  EXPECT_EQ(load_embeddings(p, 3), s);
  EXPECT_THAT(error_of<DataError>([&] { load_embeddings(p, 4); }), HasSubstr("4"));

  auto bytes = fixtures::read_file(p);
  fixtures::write_file(dir.path() / "t.bin", bytes.substr(0, bytes.size() - 2));
  EXPECT_THROW(load_embeddings(dir.path() / "t.bin"), DataError);
  fixtures::write_file(dir.path() / "m.bin", "XXXX" + bytes.substr(4));
  EXPECT_THROW(load_embeddings(dir.path() / "m.bin"), DataError);
  EXPECT_THROW(load_embeddings(dir.path() / "missing.bin"), DataError);
}

TEST(Dataset, IndicesAndLookups) {
  const auto ds = fixtures::dataset({{"a", "s1", "AAM", 0.0},
                                     {"b", "s1", "AAM", 0.2},
                                     {"c", "s2", "CM", 0.05}});
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.find("b"), 1u);
  EXPECT_FALSE(ds.find("zz"));
  EXPECT_EQ(ds.subjects().at("s1").size(), 2u);
  EXPECT_EQ(ds.demographics().at("CM"), std::vector<std::size_t>{2});
  EXPECT_EQ(ds.subject_ids(), (std::vector<std::string>{"s1", "s2"}));
  EXPECT_TRUE(ds.has_all_ratios());

  const auto only_s2 = ds.restrict_to_subjects({"s2"});
  ASSERT_EQ(only_s2.size(), 1u);
  EXPECT_EQ(only_s2[0].image_id, "c");
  EXPECT_EQ(ds.restrict_to_demographic("AAM").size(), 2u);
}

TEST(Dataset, DuplicateIdNamed) {
  const auto msg = error_of<DataError>([] {
    fixtures::dataset({{"dup", "s1", "A", 0.0}, {"dup", "s2", "A", 0.0}});
  });
  EXPECT_THAT(msg, HasSubstr("dup"));
}

TEST(Dataset, RatioOutOfRangeRejected) {
  EXPECT_THROW(fixtures::dataset({{"a", "s1", "A", 1.5}}), DataError);
  EXPECT_THROW(fixtures::dataset({{"a", "s1", "A", -0.1}}), DataError);
}

TEST(Dataset, CheckEmbeddings) {
  const auto ds = fixtures::dataset({{"a", "s1", "A", 0.0}, {"b", "s2", "A", 0.0}});
  EXPECT_NO_THROW(ds.check_embeddings(EmbeddingStore::from_rows(2, {1, 0, 0, 1})));
  EXPECT_THROW(ds.check_embeddings(EmbeddingStore::from_rows(2, {1, 0})), DataError);
}

TEST(Manifest, RoundTripPreservesRatiosExactly) {
  oracle::TempDir dir("man");
  std::vector<ImageRecord> recs(3);
  recs[0] = {"img,1", "s\"1", "AAM", 0, std::nullopt, 0.1 + 0.2};
  recs[1] = {"img2", "s1", "AAM", 1, std::string("masks/x.png"), std::nullopt};
  recs[2] = {"img3", "s2", "CM", 2, std::nullopt, 1.0 / 3.0};
  const Dataset ds(recs);
  write_manifest(ds, dir.path() / "m.csv");
  EXPECT_EQ(load_manifest(dir.path() / "m.csv"), ds);
}

TEST(Manifest, HeaderAndBom) {
  oracle::TempDir dir("hdr");
  const std::string body = "a,s1,X,0,,0.5\n";
  fixtures::write_file(dir.path() / "ok.csv",
                       "\xEF\xBB\xBF" + std::string(kManifestHeader) + "\r\n" + body);
  EXPECT_EQ(load_manifest(dir.path() / "ok.csv").size(), 1u);
  fixtures::write_file(dir.path() / "bad.csv", "id,subject\n" + body);
  EXPECT_THROW(load_manifest(dir.path() / "bad.csv"), DataError);
  fixtures::write_file(dir.path() / "empty.csv", "");
  EXPECT_THROW(load_manifest(dir.path() / "empty.csv"), DataError);
}

TEST(Manifest, ErrorsCarryLineNumbers) {
  oracle::TempDir dir("lines");
  const std::string head = std::string(kManifestHeader) + "\n";
  const auto p = dir.path() / "m.csv";
  fixtures::write_file(p, head + "a,s1,X,0,,0.1\nb,s1,X,zz,,0.1\n");
  EXPECT_THAT(error_of<DataError>([&] { load_manifest(p); }), HasSubstr(":3"));
  fixtures::write_file(p, head + "a,s1,X,0,,2.0\n");
  EXPECT_THAT(error_of<DataError>([&] { load_manifest(p); }), HasSubstr(":2"));
  fixtures::write_file(p, head + "\"a,s1,X,0,,0.1\n");
  EXPECT_THROW(load_manifest(p), DataError);
  fixtures::write_file(p, head + "a,s1,X,0\n");
  EXPECT_THROW(load_manifest(p), DataError);
}

TEST(AttachRatios, FillsAndValidates) {
  std::vector<ImageRecord> recs(2);
  recs[0] = {"a", "s1", "X", 0, std::nullopt, std::nullopt};
  recs[1] = {"b", "s2", "X", 1, std::nullopt, 0.3};
  const Dataset ds(recs);
  const auto out = attach_ratios(ds, {{"a", 0.2}, {"b", 0.9}});
  EXPECT_EQ(out[0].facial_hair_ratio, 0.2);
  EXPECT_EQ(out[1].facial_hair_ratio, 0.3);  // manifest value kept
  EXPECT_THAT(error_of<DataError>([&] { attach_ratios(ds, {{"q", 0.1}}); }),
              HasSubstr("q"));
  EXPECT_THAT(error_of<DataError>([&] { attach_ratios(ds, {}); }), HasSubstr("a"));
  EXPECT_THROW(attach_ratios(ds, {{"a", 1.2}}), DataError);
}

TEST(LoadDataset, DerivesRatiosFromMasks) {
  oracle::TempDir dir("load");
  std::vector<std::uint8_t> px(100, 0);
  for (int i = 0; i < 7; ++i) px[i] = 1;
  px[50] = 2;
  write_mask_png(LabelMask(10, 10, px), dir.path() / "a.png");
  std::vector<ImageRecord> recs(2);
  recs[0] = {"a", "s1", "X", 0, std::string("a.png"), std::nullopt};
  recs[1] = {"b", "s2", "X", 1, std::nullopt, 0.25};
  write_manifest(Dataset(recs), dir.path() / "m.csv");
  write_embeddings(EmbeddingStore::from_rows(2, {1, 0, 0, 1}), dir.path() / "e.bin");

  const auto data = load_dataset(dir.path() / "m.csv", dir.path() / "e.bin");
  EXPECT_EQ(data.dataset[0].facial_hair_ratio, 0.07);
  EXPECT_EQ(data.dataset[1].facial_hair_ratio, 0.25);
  const auto shadow = load_dataset(dir.path() / "m.csv", dir.path() / "e.bin", {}, true);
  EXPECT_EQ(shadow.dataset[0].facial_hair_ratio, 0.08);

  const auto msg = error_of<DataError>(
      [&] { load_dataset(dir.path() / "m.csv", dir.path() / "nope.bin"); });
  EXPECT_THAT(msg, HasSubstr("nope.bin"));
}
