#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spmseg/augment.hpp"
#include "spmseg/image.hpp"

namespace spmseg {

enum class Regime {
  none,  // no clear regime; excluded by curation
  islands,
  worm_like,
  cellular,
  labyrinthine,
  pores,
  fingering,
  rings,
  trees,
  streaks,
  cracks,
  mixed,
};

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view name);

enum class Split { train, test, excluded };

std::string_view to_string(Split s);
Split split_from_string(std::string_view name);

struct DatasetRecord {
  std::string image;                // relative to the dataset root
  std::optional<std::string> mask;  // relative to the dataset root
  Regime regime = Regime::none;
  std::set<std::string> noise_tags;
  std::optional<double> scale;  // physical scan width, arbitrary units
  bool multilayer = false;
  std::optional<Split> split;  // unset until curated/split
  double random_u = 0.0;       // in [0, 1), fixed per record

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

// One JSON object per line.
std::vector<DatasetRecord> read_records(std::istream& in);
std::vector<DatasetRecord> read_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<DatasetRecord>& records);

// Assigns train/test within each (regime, noise tag set) stratum. Records are
// ranked by random_u (descending, ties by input order) and the first
// ceil((1 - train_fraction) * n) become test. A singleton stratum is test iff
// its random_u > 0.5. Excluded records are left untouched.
std::vector<DatasetRecord> stratified_split(std::vector<DatasetRecord> records, double train_fraction = 0.75);

struct CurationRules {
  bool exclude_no_regime = true;
  std::set<std::string> exclude_tags = {"excessive"};
};

struct CurationResult {
  std::vector<DatasetRecord> records;
  std::size_t retained = 0;
  std::size_t excluded = 0;
};

// Matching records are marked excluded; the others keep their split.
CurationResult curate(std::vector<DatasetRecord> records, const CurationRules& rules = {});

// Train-split records without the multilayer flag.
bool training_eligible(const DatasetRecord& r);

// Assigns random_u from a seeded stream (record i uses derive_seed(seed, {i})).
void assign_random_u(std::vector<DatasetRecord>& records, std::uint64_t seed);

// Synthetic stand-in for an experimental image and its exact ground truth.
struct PatternSpec {
  Regime regime = Regime::worm_like;
  double coverage = 0.5;            // foreground fraction, in (0, 1)
  double correlation_length = 4.0;  // pixels
  int feature_count = 10;           // disks (islands) or cells (cellular)
  int width = 128;
  int height = 128;
  double edge_softness = 0.0;       // Gaussian sigma applied to the rendered mask
  double texture_amplitude = 6.0;   // std of the smooth intensity texture
  std::uint64_t seed = 0;

  void validate() const;
};

// Supported regimes: islands, worm_like, labyrinthine, pores, fingering and
// cellular. Islands are disjoint disks placed at random, which fails with a
// ParameterError once coverage is too dense to pack (roughly above 0.35).
// Foreground renders at 180 and background at 60 before softening
// and texture.
LabeledImage synth_pattern(const PatternSpec& spec);

}  // namespace spmseg
