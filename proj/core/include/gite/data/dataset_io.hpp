#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "gite/data/dataset.hpp"

namespace gite::data {

/// File layout of a dataset directory.
struct DatasetFiles {
  std::filesystem::path edges;       // src<TAB>dst
  std::filesystem::path covariates;  // id,f0,...,f{c-1}
  std::filesystem::path outcomes;    // id,t,y
  std::optional<std::filesystem::path> tau;    // id,tau
  std::optional<std::filesystem::path> split;  // id,part with part in train/val/test

  /// edges.tsv, covariates.csv, outcomes.csv, and tau.csv / split.csv when
  /// present.
  static DatasetFiles in_directory(const std::filesystem::path& dir);
};

/// Reads and validates a dataset. Without a split file the nodes are split
/// with `split_seed`. Errors name the file and line.
Dataset ingest(const DatasetFiles& files, std::uint64_t split_seed = 0);

/// Writes every file of `in_directory(dir)`. Values use shortest round-trip
/// formatting, so ingest(write(d)) reproduces d exactly.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace gite::data
