#pragma once

#include <filesystem>

#include "sls/network.hpp"

namespace sls {

// Versioned flat binary model file:
//   magic "SLSM", u32 version,
//   u32 layer count, u64 seed, config echo,
//   per-layer header (dims, activation, origin tag),
//   then per-layer row-major weights and biases as 64-bit little-endian floats.
// Round-trips are bit-exact.
struct ModelFile {
    Network net;
    TrainConfig config; // echo of the config the model was created with
};

void save_model(const Network& net, const TrainConfig& config,
                const std::filesystem::path& path);

ModelFile load_model(const std::filesystem::path& path);

} // namespace sls
