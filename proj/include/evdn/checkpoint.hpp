#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "evdn/autodiff.hpp"

namespace evdn::ad {

/// Parameter file layout (all integers little-endian):
///   "EVDN0001"
///   u32 header length, header bytes (free-form text, may be empty)
///   u32 parameter count
///   per parameter: u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values (row-major)
struct Checkpoint {
  std::string header;
  ParameterSet params;
};

void write_checkpoint(std::ostream& out, const std::string& header, const ParameterSet& params);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const std::string& header,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evdn::ad
