#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "spmseg/dataset.hpp"
#include "spmseg/rng.hpp"

namespace spmseg {

namespace {

using nlohmann::json;

constexpr std::pair<Regime, std::string_view> kRegimes[] = {
    {Regime::none, "none"},
    {Regime::islands, "islands"},
    {Regime::worm_like, "worm-like"},
    {Regime::cellular, "cellular"},
    {Regime::labyrinthine, "labyrinthine"},
    {Regime::pores, "pores"},
    {Regime::fingering, "fingering"},
    {Regime::rings, "rings"},
    {Regime::trees, "trees"},
    {Regime::streaks, "streaks"},
    {Regime::cracks, "cracks"},
    {Regime::mixed, "mixed"},
};

constexpr std::pair<Split, std::string_view> kSplits[] = {
    {Split::train, "train"},
    {Split::test, "test"},
    {Split::excluded, "excluded"},
};

json to_json(const DatasetRecord& r) {
  json j;
  j["image"] = r.image;
  j["mask"] = r.mask ? json(*r.mask) : json(nullptr);
  j["regime"] = std::string(to_string(r.regime));
  j["noise_tags"] = json::array();
  for (const auto& t : r.noise_tags) j["noise_tags"].push_back(t);
  j["scale"] = r.scale ? json(*r.scale) : json(nullptr);
  j["multilayer"] = r.multilayer;
  j["split"] = r.split ? json(std::string(to_string(*r.split))) : json(nullptr);
  j["random_u"] = r.random_u;
  return j;
}

DatasetRecord from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  DatasetRecord r;
  r.image = j.at("image").get<std::string>();
  if (r.image.empty()) throw DataError("record has an empty image path");
  if (j.contains("mask") && !j["mask"].is_null()) r.mask = j["mask"].get<std::string>();
  try {
    r.regime = regime_from_string(j.value("regime", "none"));
    if (j.contains("split") && !j["split"].is_null()) r.split = split_from_string(j["split"].get<std::string>());
  } catch (const ParameterError& e) {
    throw DataError(e.what());
  }
  if (j.contains("noise_tags")) {
    for (const auto& t : j["noise_tags"]) r.noise_tags.insert(t.get<std::string>());
  }
  if (j.contains("scale") && !j["scale"].is_null()) r.scale = j["scale"].get<double>();
  r.multilayer = j.value("multilayer", false);
  r.random_u = j.at("random_u").get<double>();
  if (!(r.random_u >= 0.0 && r.random_u < 1.0)) throw DataError("random_u must lie in [0, 1)");
  return r;
}

}  // namespace

std::string_view to_string(Regime r) {
  for (const auto& [k, name] : kRegimes)
    if (k == r) return name;
  return "unknown";
}

Regime regime_from_string(std::string_view name) {
  for (const auto& [k, n] : kRegimes)
    if (n == name) return k;
  if (name == "worm_like") return Regime::worm_like;
  throw ParameterError("unknown regime '" + std::string(name) + "'");
}

std::string_view to_string(Split s) {
  for (const auto& [k, name] : kSplits)
    if (k == s) return name;
  return "unknown";
}

Split split_from_string(std::string_view name) {
  for (const auto& [k, n] : kSplits)
    if (n == name) return k;
  throw ParameterError("unknown split '" + std::string(name) + "'");
}

std::vector<DatasetRecord> read_records(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("records line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DatasetRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file " + path.string());
  return read_records(in);
}

void write_records(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<DatasetRecord> stratified_split(std::vector<DatasetRecord> records, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ParameterError("train_fraction must lie in [0, 1]");
  }
  std::map<std::pair<Regime, std::set<std::string>>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == Split::excluded) continue;
    strata[{records[i].regime, records[i].noise_tags}].push_back(i);
  }
  for (auto& [key, idx] : strata) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].random_u > records[b].random_u; });
    std::size_t n_test = 0;
    if (idx.size() == 1) {
      n_test = records[idx[0]].random_u > 0.5 ? 1 : 0;
    } else {
      // The epsilon keeps exact products such as 0.25 * 4 from rounding up.
      const double want = (1.0 - train_fraction) * static_cast<double>(idx.size());
      n_test = static_cast<std::size_t>(std::max(0.0, std::ceil(want - 1e-9)));
    }
    for (std::size_t k = 0; k < idx.size(); ++k) records[idx[k]].split = k < n_test ? Split::test : Split::train;
  }
  return records;
}

CurationResult curate(std::vector<DatasetRecord> records, const CurationRules& rules) {
  CurationResult res;
  for (auto& r : records) {
    bool drop = rules.exclude_no_regime && r.regime == Regime::none;
    for (const auto& t : r.noise_tags) drop = drop || rules.exclude_tags.count(t) > 0;
    if (drop) r.split = Split::excluded;
    if (r.split == Split::excluded) {
      ++res.excluded;
    } else {
      ++res.retained;
    }
  }
  res.records = std::move(records);
  return res;
}

bool training_eligible(const DatasetRecord& r) { return r.split == Split::train && !r.multilayer; }

void assign_random_u(std::vector<DatasetRecord>& records, std::uint64_t seed) {
  for (std::size_t i = 0; i < records.size(); ++i) records[i].random_u = Rng(derive_seed(seed, {i})).uniform();
}

}  // namespace spmseg
