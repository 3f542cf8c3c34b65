#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "stnet/model/network.hpp"
#include "stnet/model/train.hpp"

namespace stnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointExtras {
    std::optional<TrainState> train;
    std::size_t pretrain_stages_done = 0;

    friend bool operator==(const CheckpointExtras&, const CheckpointExtras&) = default;
};

struct LoadedCheckpoint {
    Network net;
    CheckpointExtras extras;
};

/// "GNET", version, arch string, key=value metadata, named parameter blobs
/// (little-endian f64), optional training state, FNV-1a footer.
std::string encode_checkpoint(const Network& net, const CheckpointExtras& extras = {});
LoadedCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const Network& net, const CheckpointExtras& extras = {});
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace stnet
