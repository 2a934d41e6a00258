#pragma once

#include <string>

#include "awrb/rb.hpp"

namespace awrb {

// Model file layout (all integers and floats little-endian):
//   bytes 0..7    magic "AWRBMODL"
//   bytes 8..11   format version (uint32, currently 1)
//   bytes 12..15  reserved (zero)
//   uint64        manifest length in bytes
//   manifest      JSON (problem spec, metadata, block table)
//   data          float64 blocks; the block table gives name, rows, cols and
//                 byte offset from the start of the data section.  Matrices
//                 are stored column-major.  Snapshot blocks have one row per
//                 coefficient: (j0, k0, kind0, j1, k1, kind1, value).
inline constexpr char kModelMagic[9] = "AWRBMODL";
inline constexpr unsigned kModelVersion = 1;

std::string serialize_model(const ReducedModel& m);
ReducedModel deserialize_model(const std::string& bytes);

void save_model(const ReducedModel& m, const std::string& path);
ReducedModel load_model(const std::string& path);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace awrb
