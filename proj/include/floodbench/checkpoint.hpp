#pragma once

#include <string>
#include <vector>

#include "floodbench/optim.hpp"
#include "floodbench/tensor.hpp"

namespace floodbench {

// Binary checkpoint, little-endian throughout, no padding:
//   8-byte magic "NTCKPT01"
//   u32 tensor count
//   per tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
//               float32 values in row-major order.
// Values are stored as float32 regardless of the in-memory scalar type.

template <typename S>
void save_checkpoint(const std::string& path, const NamedParams<S>& tensors);

struct RawTensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;
};

// Parses a checkpoint file; throws DataError on malformed input.
std::vector<RawTensor> read_checkpoint(const std::string& path);

// Loads a checkpoint into an existing parameter list. Names must match
// one-to-one in order and shapes must agree; throws ContractError otherwise.
template <typename S>
void load_checkpoint(const std::string& path, NamedParams<S>& tensors);

}  // namespace floodbench
