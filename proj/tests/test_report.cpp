#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <json.hpp>

#include "hirsute/errors.hpp"
#include "hirsute/report.hpp"

using namespace hirsute;
using ::testing::HasSubstr;
using ::testing::Not;

namespace {

// Reference rows, used only as a formatting fixture.
ProtocolResult reference_rows() {
  ProtocolResult r;
  r.scope = "AAM";
  r.target_fmr = 1e-4;
  r.plan = {0, 5};
  r.groups = default_protocol_groups();
  r.modes = {ThresholdMode::kGlobal, ThresholdMode::kAdaptive};
  r.splits.resize(5);
  const auto set = [&](ThresholdMode m, std::vector<std::pair<double, double>> cells,
                       Aggregate ratio) {
    for (std::size_t g = 0; g < 3; ++g) {
      r.fmr_summary[m][r.groups[g]] = {cells[g].first * 1e-4, cells[g].second * 1e-4, 5};
    }
    r.ratio_summary[m] = ratio;
  };
  set(ThresholdMode::kGlobal, {{2.55, 0.09}, {0.33, 0.02}, {3.61, 0.58}}, {10.79, 1.54, 5});
  set(ThresholdMode::kAdaptive, {{0.97, 0.12}, {1.04, 0.07}, {0.96, 0.82}}, {1.78, 0.32, 3});
  r.ratio_excluded_splits[ThresholdMode::kGlobal] = {};
  r.ratio_excluded_splits[ThresholdMode::kAdaptive] = {1, 4};
  return r;
}

}  // namespace

TEST(Format, E4AndMeanStd) {
  EXPECT_EQ(report::format_e4(2.55e-4), "2.55");
  EXPECT_EQ(report::format_e4(0.0), "0.00");
  EXPECT_EQ(report::format_e4(std::nan("")), "n/a");
  EXPECT_EQ(report::format_mean_std({2.55e-4, 0.09e-4, 5}, 1e4), "2.55±0.09");
  EXPECT_EQ(report::format_mean_std({10.79, 1.54, 5}), "10.79±1.54");
  EXPECT_EQ(report::format_mean_std({}), "n/a");
}

TEST(Table, TextRendersReferenceRows) {
  const std::vector<ProtocolResult> rows = {reference_rows()};
  const auto text = report::table3_text(rows);
  EXPECT_THAT(text, HasSubstr("AAM (global)"));
  EXPECT_THAT(text, HasSubstr("2.55±0.09"));
  EXPECT_THAT(text, HasSubstr("0.33±0.02"));
  EXPECT_THAT(text, HasSubstr("3.61±0.58"));
  EXPECT_THAT(text, HasSubstr("10.79±1.54"));
  EXPECT_THAT(text, Not(HasSubstr("10.79±1.54 (")));
  EXPECT_THAT(text, HasSubstr("1.78±0.32 (3 splits)"));
}

TEST(Table, CsvColumns) {
  const std::vector<ProtocolResult> rows = {reference_rows()};
  const auto csv = report::table3_csv(rows);
  EXPECT_THAT(csv, HasSubstr("scope,mode,cl_vs_cl_fmr_e4_mean,cl_vs_cl_fmr_e4_std,"));
  EXPECT_THAT(csv, HasSubstr(",ratio_mean,ratio_std,ratio_splits\n"));
  EXPECT_THAT(csv, HasSubstr("AAM,global,2.55,0.09,0.33,0.02,3.61,0.58,10.79,1.54,5\n"));
  EXPECT_THAT(csv, HasSubstr("AAM,adaptive,0.97,0.12,1.04,0.07,0.96,0.82,1.78,0.32,3\n"));
}

TEST(Thresholds, JsonRoundTrip) {
  ThresholdTable t;
  t.global_threshold = 0.4123456789012345;
  t.per_category[PairCategory::parse("cl_vs_cl")] = 0.39;
  const std::vector<report::ScopedThresholds> in = {{std::nullopt, t}, {"CM", t}};
  const auto text = report::thresholds_json(in, 1e-4);
  const auto back = report::parse_thresholds_json(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_FALSE(back[0].scope);
  EXPECT_EQ(back[1].scope, "CM");
  EXPECT_EQ(back[1].table.global_threshold, t.global_threshold);
  EXPECT_EQ(back[1].table.per_category, t.per_category);
  EXPECT_THROW(report::parse_thresholds_json("{"), DataError);
  EXPECT_THROW(report::parse_thresholds_json("{\"tables\": 3}"), DataError);
}

TEST(ProtocolJson, ShapeOfEmptySplits) {
  auto r = reference_rows();
  r.splits.clear();
  const std::vector<ProtocolResult> rows = {r};
  const auto j = nlohmann::json::parse(report::protocol_json(rows));
  EXPECT_EQ(j["target_fmr"], 1e-4);
  ASSERT_EQ(j["scopes"].size(), 1u);
  EXPECT_EQ(j["scopes"][0]["scope"], "AAM");
  EXPECT_EQ(j["scopes"][0]["summary"]["adaptive"]["excluded_splits"],
            nlohmann::json::array({1, 4}));
}
