#include "pscv/predictions.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "pscv/error.hpp"
#include "text.hpp"

namespace pscv {

namespace {

using json = nlohmann::json;

constexpr int kVersion = 1;

// Calls `on_record(json, line_no, record_index)` for every record line.
template <class F>
void for_each_record(std::istream& in, const char* format, F&& on_record) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string(format) + ": line " + std::to_string(line_no) + " is not valid JSON: " + e.what(),
                       line_no);
    }
    if (!value.is_object()) {
      throw ParseError(std::string(format) + ": line " + std::to_string(line_no) + " is not a JSON object", line_no);
    }
    if (first && value.contains("format")) {
      first = false;
      if (value["format"] != format || value.value("version", 0) != kVersion) {
        throw ParseError(std::string(format) + ": unsupported header at line " + std::to_string(line_no), line_no);
      }
      continue;
    }
    first = false;
    try {
      on_record(value, line_no, index);
    } catch (const json::exception& e) {
      throw ParseError(std::string(format) + ": bad record at line " + std::to_string(line_no) + ": " + e.what(),
                       line_no);
    }
    ++index;
  }
}

std::string record_name(std::size_t index, std::int64_t instance_id, std::size_t line_no) {
  return "record " + std::to_string(index) + " (instance " + std::to_string(instance_id) + ", line " +
         std::to_string(line_no) + ")";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> records;
  for_each_record(in, "pscv-predictions", [&](const json& j, std::size_t line_no, std::size_t index) {
    PredictionRecord r;
    r.instance_id = j.at("instance_id").get<std::int64_t>();
    r.scene_id = j.value("scene_id", std::int64_t{0});
    r.truth = j.at("truth").get<int>();
    for (const auto& v : j.at("votes")) {
      PeerPrediction p{v.at("label").get<int>(), v.at("confidence").get<double>()};
      if (!std::isfinite(p.confidence) || !(p.confidence > 0.0) || p.confidence > 1.0) {
        throw InputError(record_name(index, r.instance_id, line_no) + ": confidence " +
                         text::format_double(p.confidence) + " outside (0, 1]");
      }
      r.votes.push_back(p);
    }
    if (r.votes.empty()) throw InputError(record_name(index, r.instance_id, line_no) + ": no votes");
    if (!records.empty() && records.front().votes.size() != r.votes.size()) {
      throw InputError(record_name(index, r.instance_id, line_no) + ": has " + std::to_string(r.votes.size()) +
                       " votes, earlier records have " + std::to_string(records.front().votes.size()));
    }
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_predictions(in);
}

void write_predictions(std::span<const PredictionRecord> records, std::ostream& out) {
  out << json{{"format", "pscv-predictions"}, {"version", kVersion}}.dump() << '\n';
  for (const auto& r : records) {
    json votes = json::array();
    for (const auto& v : r.votes) votes.push_back({{"label", v.label}, {"confidence", v.confidence}});
    json j{{"instance_id", r.instance_id}, {"scene_id", r.scene_id}, {"truth", r.truth}, {"votes", std::move(votes)}};
    out << j.dump() << '\n';
  }
}

void save_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_predictions(records, out);
}

std::vector<ScoredPrediction> read_scored(std::istream& in) {
  std::vector<ScoredPrediction> results;
  for_each_record(in, "pscv-scored", [&](const json& j, std::size_t line_no, std::size_t index) {
    ScoredPrediction s;
    s.instance_id = j.at("instance_id").get<std::int64_t>();
    s.scene_id = j.value("scene_id", std::int64_t{0});
    s.truth = j.at("truth").get<int>();
    s.predicted = j.at("label").get<int>();
    s.score = j.at("score").get<double>();
    if (!std::isfinite(s.score)) {
      throw InputError(record_name(index, s.instance_id, line_no) + ": non-finite score");
    }
    results.push_back(s);
  });
  return results;
}

std::vector<ScoredPrediction> load_scored(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_scored(in);
}

void write_scored(std::span<const ScoredPrediction> results, std::ostream& out) {
  out << json{{"format", "pscv-scored"}, {"version", kVersion}}.dump() << '\n';
  for (const auto& s : results) {
    json j{{"instance_id", s.instance_id}, {"scene_id", s.scene_id}, {"truth", s.truth},
           {"label", s.predicted},         {"score", s.score}};
    out << j.dump() << '\n';
  }
}

void save_scored(std::span<const ScoredPrediction> results, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_scored(results, out);
}

}  // namespace pscv
