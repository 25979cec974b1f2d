#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "dbdn/model.hpp"

namespace dbdn {

// Binary layout, all integers 32-bit little-endian:
//
//   "DBDN" | version | variant tag | B | L | n_r | n_g | scale
//   then per parameter, in Network::parameters() order:
//   name length | UTF-8 name | rank | dims[rank] | float32 payload
//
// Bit 8 of the variant tag carries ModelConfig::prepend_extraction.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_network(const Network& net);
/// Rebuilds the network from the stored config and checks every stored
/// tensor's name and shape against it.
Network deserialize_network(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace dbdn
