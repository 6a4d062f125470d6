#pragma once

#include "deconf/data.hpp"
#include "deconf/plfm.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace deconf {

/// Everything a later pipeline stage needs from a fit: the retained draws,
/// the holdout mask they were fitted under, the standardization applied to
/// the inputs, column names, and the resolved configuration text.
struct FitArtifact {
  PosteriorDraws draws;
  HoldoutMask mask;
  Standardization standardization;
  std::vector<std::string> cause_names;
  std::vector<std::string> covariate_names;
  std::string config_text;
};

/// Binary layout, little-endian:
///   magic "DCNFDRAW", u32 format version, then length-prefixed sections.
/// Doubles are stored as raw IEEE-754 bits, so a reload is bit-exact.
inline constexpr std::uint32_t kDrawsFormatVersion = 1;

void write_artifact(std::ostream& out, const FitArtifact& artifact);
FitArtifact read_artifact(std::istream& in);

void save_artifact(const std::filesystem::path& path, const FitArtifact& artifact);
FitArtifact load_artifact(const std::filesystem::path& path);

}  // namespace deconf
