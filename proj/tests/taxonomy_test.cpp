#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "pscv/data.hpp"
#include "pscv/error.hpp"
#include "pscv/random.hpp"
#include "pscv/taxonomy.hpp"
#include "support/oracles.hpp"

namespace pscv {
namespace {

constexpr Group H = Group::Head;
constexpr Group B = Group::Body;
constexpr Group T = Group::Tail;

std::size_t parse_error_position(std::string_view spec) {
  try {
    parse_peer_config(spec);
  } catch (const ParseError& e) {
    return e.position();
  }
  ADD_FAILURE() << "no error for '" << spec << "'";
  return std::string::npos;
}

TEST(Frequencies, CountsLabels) {
  const std::vector<int> labels = {0, 0, 1};
  EXPECT_EQ(compute_frequencies(labels, 3).counts, (std::vector<std::int64_t>{2, 1, 0}));
}

TEST(Frequencies, EmptyInputIsAnError) {
  EXPECT_THROW(compute_frequencies(std::span<const int>{}, 3), InputError);
  EXPECT_THROW(compute_frequencies(LabeledDataset{}), InputError);
}

TEST(Frequencies, OutOfRangeLabelIsAnError) {
  const std::vector<int> labels = {0, 3};
  EXPECT_THROW(compute_frequencies(labels, 3), InputError);
}

TEST(Frequencies, ZipfLabelsAreLongTailed) {
  ZipfSpec spec;
  spec.seed = 11;
  const auto freq = compute_frequencies(generate_dataset(spec));
  EXPECT_EQ(freq.total(), 10000);
  EXPECT_GT(freq.counts[0], freq.counts[1]);
  EXPECT_GT(freq.counts[1], freq.counts[4]);
  EXPECT_GT(freq.counts[4], freq.counts[19]);
}

TEST(Partition, ThresholdArithmetic) {
  const auto p = partition_classes(FrequencyTable{{100, 10, 1}}, 50, 5);
  EXPECT_EQ(p.group_of, (std::vector<Group>{H, B, T}));
  EXPECT_EQ(p.members(B), (std::vector<int>{1}));
}

TEST(Partition, EqualCountsBetweenThresholdsAreAllBody) {
  const auto p = partition_classes(FrequencyTable{{7, 7, 7, 7}}, 50, 5);
  EXPECT_EQ(p.group_of, std::vector<Group>(4, B));
}

TEST(Partition, ThresholdBoundariesAreInclusive) {
  const auto p = partition_classes(FrequencyTable{{50, 49, 5, 4}}, 50, 5);
  EXPECT_EQ(p.group_of, (std::vector<Group>{H, B, B, T}));
}

TEST(Partition, RejectsBadThresholds) {
  const FrequencyTable f{{3, 2, 1}};
  EXPECT_THROW(partition_classes(f, 5, 5), ConfigError);
  EXPECT_THROW(partition_classes(f, 5, 7), ConfigError);
  EXPECT_THROW(partition_classes(f, 5, -1), ConfigError);
}

TEST(Partition, TertilesOfDistinctCounts) {
  const auto p = partition_by_tertiles(FrequencyTable{{90, 80, 70, 60, 50, 40}});
  EXPECT_EQ(p.group_of, (std::vector<Group>{H, H, B, B, T, T}));
  EXPECT_EQ(p.t_head, 80);
  EXPECT_EQ(p.t_body, 60);
}

TEST(Partition, TiesArePulledIntoTheHigherGroup) {
  const auto p = partition_by_tertiles(FrequencyTable{{9, 5, 5, 5, 1, 1}});
  EXPECT_EQ(p.group_of, (std::vector<Group>{H, H, H, H, B, B}));
}

TEST(Partition, ZeroCountsNeverLandInHead) {
  const auto p = partition_by_tertiles(FrequencyTable{{0, 0, 0}});
  EXPECT_EQ(p.group_of, std::vector<Group>(3, B));
  EXPECT_GE(p.t_head, 1);
}

TEST(Partition, MatchesSortAndCutOracleOnZipfCounts) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    ZipfSpec spec;
    spec.seed = seed;
    const auto freq = compute_frequencies(generate_dataset(spec));
    EXPECT_EQ(partition_by_tertiles(freq).group_of, testing::tertile_oracle(freq.counts)) << "seed " << seed;
  }
}

TEST(Partition, MatchesSortAndCutOracleOnRandomTables) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 30));
    FrequencyTable f;
    for (int c = 0; c < n; ++c) f.counts.push_back(rng.uniform_int(0, trial % 2 ? 5 : 500));
    const auto p = partition_by_tertiles(f);
    ASSERT_EQ(p.group_of, testing::tertile_oracle(f.counts)) << "trial " << trial;
    ASSERT_GT(p.t_head, p.t_body);
    ASSERT_GE(p.t_body, 0);
  }
}

TEST(Partition, GroupsAreMonotoneInCount) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    FrequencyTable f;
    for (int c = 0; c < 12; ++c) f.counts.push_back(rng.uniform_int(0, 100));
    const auto p = partition_by_tertiles(f);
    for (int a = 0; a < 12; ++a) {
      for (int b = 0; b < 12; ++b) {
        if (f.counts[a] > f.counts[b]) EXPECT_LE(p.group_of[a], p.group_of[b]);
      }
    }
  }
}

TEST(PeerConfig, ThreePeerAndFourPeerSpecs) {
  EXPECT_EQ(parse_peer_config("HBT_B_T"), (std::vector<GroupSet>{GroupSet::all(), {B}, {T}}));
  EXPECT_EQ(parse_peer_config("H_B_T"), (std::vector<GroupSet>{{H}, {B}, {T}}));
  EXPECT_EQ(parse_peer_config("HBT_HB_BT_HT"), (std::vector<GroupSet>{GroupSet::all(), {H, B}, {B, T}, {H, T}}));
}

TEST(PeerConfig, StandardSpecsHaveTheirPeerCounts) {
  const std::vector<std::pair<std::string, std::size_t>> cases = {
      {"HBT_T", 2},    {"HBT_B", 2},    {"HBT_H_B_T", 4}, {"HBT_HB_BT_HT", 4}, {"H_B_T", 3},
      {"HBT_B_T", 3},  {"HBT_BT_T", 3}, {"HB_HT_BT", 3},  {"HBT_HT_BT", 3},
  };
  for (const auto& [spec, n] : cases) EXPECT_EQ(parse_peer_config(spec).size(), n) << spec;
}

TEST(PeerConfig, LetterOrderInsideATokenIsFree) {
  EXPECT_EQ(parse_peer_config("TBH_TB"), parse_peer_config("HBT_BT"));
}

TEST(PeerConfig, FormatRoundTrips) {
  for (const char* spec : {"HBT_B_T", "H", "BT_HT_HB_T", "HBT_HBT"}) {
    EXPECT_EQ(format_peer_config(parse_peer_config(spec)), spec);
  }
  EXPECT_EQ(format_peer_config(parse_peer_config("TH_B")), "HT_B");
}

TEST(PeerConfig, ErrorsCarryTheOffendingOffset) {
  EXPECT_EQ(parse_error_position("HBX_B"), 2u);
  EXPECT_EQ(parse_error_position(""), 0u);
  EXPECT_EQ(parse_error_position("HH"), 1u);
  EXPECT_EQ(parse_error_position("H__B"), 2u);
  EXPECT_EQ(parse_error_position("H_"), 2u);
  EXPECT_EQ(parse_error_position("_H"), 0u);
  EXPECT_EQ(parse_error_position("H_B_T_H_B"), 8u);
  EXPECT_EQ(parse_error_position("h"), 0u);
}

TEST(PeerSubset, SelectsMembersInAscendingOrder) {
  GroupPartition p;
  p.group_of = {H, B, T};
  p.t_head = 2;
  p.t_body = 1;
  EXPECT_EQ(peer_class_subset(p, {B, T}), (std::vector<int>{1, 2}));
  EXPECT_EQ(peer_class_subset(p, GroupSet::all()), (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(peer_class_subset(p, {}).empty());
}

TEST(PeerSubset, TailIsComplementOfHeadAndBody) {
  ZipfSpec spec;
  spec.seed = 3;
  const auto freq = compute_frequencies(generate_dataset(spec));
  const auto p = partition_by_tertiles(freq);
  const auto oracle = testing::tertile_oracle(freq.counts);
  std::vector<int> complement;
  for (int c = 0; c < freq.num_classes(); ++c) {
    if (oracle[c] != H && oracle[c] != B) complement.push_back(c);
  }
  EXPECT_EQ(peer_class_subset(p, {T}), complement);
}

TEST(GroupSetText, CanonicalOrder) {
  EXPECT_EQ((GroupSet{T, H}).to_string(), "HT");
  EXPECT_EQ(GroupSet::all().to_string(), "HBT");
  EXPECT_EQ(group_name(B), "body");
  EXPECT_EQ(group_letter(T), 'T');
}

}  // namespace
}  // namespace pscv
