#pragma once

#include <cstdint>
#include <string>

#include "acrodis/encoder.hpp"
#include "acrodis/params.hpp"

namespace acrodis {

// Model snapshot: config header + stage tag + RNG provenance + parameters.
// Serialized as a versioned binary file (JSON header, raw little-endian
// doubles) so repeated runs are byte-identical.
struct Checkpoint {
  EncoderConfig config;
  std::string stage = "fresh";  // fresh | stage1 | stage2
  uint64_t seed = 0;            // training seed that produced the parameters
  uint64_t rng_state = 0;       // shuffle stream position at save time
  ParameterSet params;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the reference encoder from a checkpoint; throws when the stored
// parameters do not match the stored config layout.
std::unique_ptr<ReferenceEncoder> encoder_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace acrodis
