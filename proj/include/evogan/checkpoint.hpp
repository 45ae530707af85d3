#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "evogan/config.hpp"
#include "evogan/training.hpp"

namespace evogan {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes parameters, batch-norm statistics, optimizer moments, random
/// streams and epoch history. The resolved config travels with the file.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path &path, TrainingState<Scalar> &state, const TrainingConfig &config);

/// Restores a state built from the checkpoint's own config. Throws when the
/// file's shapes or scalar type do not match the state.
template <typename Scalar>
void load_checkpoint(const std::filesystem::path &path, TrainingState<Scalar> &state);

/// Config stored in a checkpoint.
TrainingConfig read_checkpoint_config(const std::filesystem::path &path);

std::filesystem::path checkpoint_path(const std::filesystem::path &dir, int epoch);
std::filesystem::path latest_checkpoint_path(const std::filesystem::path &dir);

} // namespace evogan
