#pragma once

#include <iosfwd>
#include <string>

#include "dumn/trainer.hpp"

namespace dumn {

inline constexpr const char* kCheckpointMagic = "DUMNCKPT";
inline constexpr int kCheckpointVersion = 1;

/// A restored model together with the optimizer state it was saved with.
struct Checkpoint {
  Model model;
  AdamState adam;
};

/// Text format, values as hexfloats so a round trip is bit-exact. See docs/checkpoint.md.
void save_checkpoint(std::ostream& out, const Model& model, const AdamState& adam);
void save_checkpoint(const std::string& path, const Model& model, const AdamState& adam);

/// Throws std::runtime_error naming the offending section on malformed or mismatched input.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dumn
