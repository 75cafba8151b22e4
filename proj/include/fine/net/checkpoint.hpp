#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fine/net/unet.hpp"

namespace fine {

struct CheckpointInfo
{
  std::string optimizer = "adam";
  long step = 0;
};

// Writes <dir>/manifest.json and <dir>/<layer_id>.weight.fnt / .bias.fnt.
template <typename T>
void save_checkpoint(const NetworkParams<T> &params, const std::filesystem::path &dir, const CheckpointInfo &info = {});

template <typename T>
NetworkParams<T> load_checkpoint(const std::filesystem::path &dir, CheckpointInfo *info = nullptr);

} // namespace fine
