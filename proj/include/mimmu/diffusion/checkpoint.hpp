#pragma once

#include <string>

#include "mimmu/diffusion/model.hpp"

namespace mimmu::diff {

// Checkpoint metadata. Serialized as a one-line JSON header with fixed
// field order, followed by "\n" and a raw little-endian 64-bit float
// parameter block of exactly 8 * param_count bytes.
struct CheckpointMeta {
    int version = 1;
    Architecture arch;
    std::string schedule_kind = "cosine";
    std::size_t schedule_T = 200;
    std::string lineage;  // seed derivation trail, free-form
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const num::ParamVector& params);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    DenoiserModel model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace mimmu::diff
