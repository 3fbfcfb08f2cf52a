#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pscv/dataset.hpp"

namespace pscv {

enum class Group : std::uint8_t { Head = 0, Body = 1, Tail = 2 };

inline constexpr std::array<Group, 3> kAllGroups = {Group::Head, Group::Body, Group::Tail};

char group_letter(Group g) noexcept;
std::string_view group_name(Group g) noexcept;

/// Nonempty-or-empty subset of {Head, Body, Tail}.
class GroupSet {
 public:
  constexpr GroupSet() = default;
  constexpr GroupSet(std::initializer_list<Group> groups) {
    for (Group g : groups) bits_ |= bit(g);
  }

  static constexpr GroupSet all() { return GroupSet{Group::Head, Group::Body, Group::Tail}; }

  constexpr bool contains(Group g) const noexcept { return (bits_ & bit(g)) != 0; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr void insert(Group g) noexcept { bits_ |= bit(g); }
  constexpr GroupSet operator|(GroupSet other) const noexcept {
    GroupSet r;
    r.bits_ = bits_ | other.bits_;
    return r;
  }

  /// Canonical token, letters in H, B, T order ("HBT", "BT", ...).
  std::string to_string() const;

  friend constexpr bool operator==(GroupSet, GroupSet) = default;

 private:
  static constexpr std::uint8_t bit(Group g) { return std::uint8_t(1u << static_cast<unsigned>(g)); }
  std::uint8_t bits_ = 0;
};

/// Per-class instance counts.
struct FrequencyTable {
  std::vector<std::int64_t> counts;

  int num_classes() const noexcept { return static_cast<int>(counts.size()); }
  std::int64_t total() const noexcept;

  friend bool operator==(const FrequencyTable&, const FrequencyTable&) = default;
};

FrequencyTable compute_frequencies(const LabeledDataset& dataset);
FrequencyTable compute_frequencies(std::span<const int> labels, int num_classes);

/// Head/body/tail assignment of every class.
struct GroupPartition {
  std::vector<Group> group_of;
  std::int64_t t_head = 0;
  std::int64_t t_body = 0;

  int num_classes() const noexcept { return static_cast<int>(group_of.size()); }
  std::vector<int> members(Group g) const;

  friend bool operator==(const GroupPartition&, const GroupPartition&) = default;
};

/// Head if count >= t_head, Body if t_body <= count < t_head, Tail otherwise.
/// Requires t_head > t_body >= 0.
GroupPartition partition_classes(const FrequencyTable& freq, std::int64_t t_head, std::int64_t t_body);

/// Thresholds for a rank-tertile split. Head takes the ceil(n/3) most
/// frequent classes, body the upper half (rounded up) of the rest, tail the
/// remainder; classes tied with the last member of a group are pulled up
/// into it. t_head is at least 1, so zero-count classes never land in head.
std::pair<std::int64_t, std::int64_t> tertile_thresholds(const FrequencyTable& freq);

GroupPartition partition_by_tertiles(const FrequencyTable& freq);

inline constexpr std::size_t kMaxPeers = 4;

/// Parses `token ("_" token)*` where each token is 1-3 distinct letters from
/// {H,B,T}. Throws ParseError carrying the 0-based offending offset.
std::vector<GroupSet> parse_peer_config(std::string_view spec);

/// Inverse of parse_peer_config in canonical H<B<T letter order.
std::string format_peer_config(std::span<const GroupSet> peers);

/// Ascending class ids whose group is in `groups`.
std::vector<int> peer_class_subset(const GroupPartition& partition, GroupSet groups);

}  // namespace pscv
