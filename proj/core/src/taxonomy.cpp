#include "pscv/taxonomy.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "pscv/error.hpp"

namespace pscv {

char group_letter(Group g) noexcept {
  switch (g) {
    case Group::Head: return 'H';
    case Group::Body: return 'B';
    case Group::Tail: return 'T';
  }
  return '?';
}

std::string_view group_name(Group g) noexcept {
  switch (g) {
    case Group::Head: return "head";
    case Group::Body: return "body";
    case Group::Tail: return "tail";
  }
  return "unknown";
}

std::string GroupSet::to_string() const {
  std::string out;
  for (Group g : kAllGroups) {
    if (contains(g)) out.push_back(group_letter(g));
  }
  return out;
}

std::int64_t FrequencyTable::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

FrequencyTable compute_frequencies(std::span<const int> labels, int num_classes) {
  if (labels.empty()) throw InputError("compute_frequencies: dataset is empty");
  if (num_classes <= 0) throw InputError("compute_frequencies: num_classes must be positive");
  FrequencyTable table;
  table.counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw InputError("compute_frequencies: instance at row " + std::to_string(i) + " has label " +
                       std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    ++table.counts[static_cast<std::size_t>(y)];
  }
  return table;
}

FrequencyTable compute_frequencies(const LabeledDataset& dataset) {
  if (dataset.empty()) throw InputError("compute_frequencies: dataset is empty");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int y = dataset.labels[i];
    if (y < 0 || y >= dataset.num_classes) {
      const auto id = i < dataset.instance_ids.size() ? dataset.instance_ids[i] : std::int64_t(i);
      throw InputError("compute_frequencies: instance " + std::to_string(id) + " has label " +
                       std::to_string(y) + " outside [0, " + std::to_string(dataset.num_classes) + ")");
    }
  }
  return compute_frequencies(dataset.labels, dataset.num_classes);
}

std::vector<int> GroupPartition::members(Group g) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes(); ++c) {
    if (group_of[static_cast<std::size_t>(c)] == g) out.push_back(c);
  }
  return out;
}

GroupPartition partition_classes(const FrequencyTable& freq, std::int64_t t_head, std::int64_t t_body) {
  if (t_body < 0 || t_head <= t_body) {
    throw ConfigError("partition_classes: thresholds must satisfy t_head > t_body >= 0 (got t_head=" +
                      std::to_string(t_head) + ", t_body=" + std::to_string(t_body) + ")");
  }
  GroupPartition p;
  p.t_head = t_head;
  p.t_body = t_body;
  p.group_of.reserve(freq.counts.size());
  for (std::int64_t n : freq.counts) {
    if (n >= t_head) {
      p.group_of.push_back(Group::Head);
    } else if (n >= t_body) {
      p.group_of.push_back(Group::Body);
    } else {
      p.group_of.push_back(Group::Tail);
    }
  }
  return p;
}

std::pair<std::int64_t, std::int64_t> tertile_thresholds(const FrequencyTable& freq) {
  const std::size_t n = freq.counts.size();
  if (n == 0) throw ConfigError("tertile_thresholds: frequency table has no classes");
  std::vector<std::int64_t> sorted = freq.counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // Head: the top ceil(n/3) classes plus anything tied with the last of them.
  const std::size_t head_target = (n + 2) / 3;
  const std::int64_t t_head = std::max<std::int64_t>(sorted[head_target - 1], 1);
  const auto head = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [&](std::int64_t c) { return c >= t_head; }));

  // Body: the upper half (rounded up) of what is left, again pulling in ties.
  const std::size_t rest = n - head;
  if (rest == 0) return {t_head, t_head - 1};
  const std::size_t body_target = (rest + 1) / 2;
  return {t_head, sorted[head + body_target - 1]};
}

GroupPartition partition_by_tertiles(const FrequencyTable& freq) {
  const auto [t_head, t_body] = tertile_thresholds(freq);
  return partition_classes(freq, t_head, t_body);
}

namespace {

bool letter_to_group(char c, Group& g) {
  switch (c) {
    case 'H': g = Group::Head; return true;
    case 'B': g = Group::Body; return true;
    case 'T': g = Group::Tail; return true;
    default: return false;
  }
}

}  // namespace

std::vector<GroupSet> parse_peer_config(std::string_view spec) {
  if (spec.empty()) throw ParseError("peer config is empty", 0);

  std::vector<GroupSet> peers;
  std::size_t pos = 0;
  while (true) {
    if (peers.size() == kMaxPeers) {
      throw ParseError("peer config has more than " + std::to_string(kMaxPeers) + " tokens", pos);
    }
    const std::size_t token_start = pos;
    GroupSet token;
    while (pos < spec.size() && spec[pos] != '_') {
      Group g{};
      if (!letter_to_group(spec[pos], g)) {
        throw ParseError(std::string("unknown letter '") + spec[pos] + "' in peer config at offset " +
                             std::to_string(pos),
                         pos);
      }
      if (token.contains(g)) {
        throw ParseError(std::string("repeated letter '") + spec[pos] + "' in peer config at offset " +
                             std::to_string(pos),
                         pos);
      }
      token.insert(g);
      ++pos;
    }
    if (pos == token_start) {
      throw ParseError("empty token in peer config at offset " + std::to_string(pos), pos);
    }
    peers.push_back(token);
    if (pos == spec.size()) break;
    ++pos;  // '_'
  }
  return peers;
}

std::string format_peer_config(std::span<const GroupSet> peers) {
  std::string out;
  for (std::size_t i = 0; i < peers.size(); ++i) {
    if (i > 0) out.push_back('_');
    out += peers[i].to_string();
  }
  return out;
}

std::vector<int> peer_class_subset(const GroupPartition& partition, GroupSet groups) {
  std::vector<int> out;
  for (int c = 0; c < partition.num_classes(); ++c) {
    if (groups.contains(partition.group_of[static_cast<std::size_t>(c)])) out.push_back(c);
  }
  return out;
}

}  // namespace pscv
