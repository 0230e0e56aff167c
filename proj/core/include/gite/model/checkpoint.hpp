#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "gite/data/dataset.hpp"
#include "gite/model/gite_model.hpp"

namespace gite::model {

inline constexpr const char* kCheckpointMagic = "GITE-CHECKPOINT v1";

/// Text checkpoint: magic line, model config, outcome normalization, then
/// every parameter as `tensor <name> <rows> <cols>` followed by its values
/// in hexadecimal floating point, so a round trip is exact.
void write_checkpoint(std::ostream& out, GiteModel& model);
void save_checkpoint(const std::filesystem::path& path, GiteModel& model);

/// Rebuilds the model for `dataset` and loads its parameters. Throws
/// IngestError on a bad magic line, a missing or misshapen tensor, or an
/// amplifier built from a different training split.
GiteModel read_checkpoint(std::istream& in, const data::Dataset& dataset,
                          const std::string& source = "<checkpoint>");
GiteModel load_checkpoint(const std::filesystem::path& path, const data::Dataset& dataset);

}  // namespace gite::model
