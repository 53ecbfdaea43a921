#pragma once

#include <filesystem>
#include <optional>

#include "prefflow/flow/field.hpp"

namespace prefflow::flow {

// Checkpoints are a pair of files sharing a base path:
//   <base>.bin   magic "PFCK", u32 version, u64 count, count little-endian f64
//   <base>.json  architecture sidecar naming the blob
// Saving the same parameters twice produces byte-identical files.
void save_checkpoint(const std::filesystem::path& base, const MlpField& field);
MlpField load_checkpoint(const std::filesystem::path& base);

// Post-training adds a second sidecar <base>.grpo.json with the run state.
struct GrpoState {
    size_t iterations = 0;
    uint64_t seed = 0;
};
void save_grpo_state(const std::filesystem::path& base, const GrpoState& state);
std::optional<GrpoState> load_grpo_state(const std::filesystem::path& base);

}  // namespace prefflow::flow
