#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdpg/tensor.hpp"

namespace tdpg {

// Binary little-endian parameter container. Layout: magic "TDPG", format
// version u32, block count u32, then per block: name length u32, UTF-8 name,
// rank u32, one u32 extent per axis, row-major f64 payload. Round-trips are
// bit-exact.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& blocks);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

// Copies checkpoint payloads into existing parameter tensors by name.
// Every destination block must be present with a matching shape.
void assign_blocks(const std::vector<std::pair<std::string, Tensor>>& dest,
                   const std::vector<std::pair<std::string, Tensor>>& loaded);

}  // namespace tdpg
