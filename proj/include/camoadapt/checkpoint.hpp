#pragma once

// "SMCD" checkpoint container: little-endian, float32 payloads, trailing
// CRC-32 over everything before it. Save -> load round-trips bit-exactly;
// any corruption is refused.

#include <cstdint>
#include <string>
#include <vector>

#include "camoadapt/model.hpp"

namespace camo {

struct CheckpointEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

uint32_t crc32_ieee(const uint8_t* data, size_t len, uint32_t seed = 0);

void save_checkpoint(const std::vector<ParamRef<float>>& params, const std::string& path);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Copy entries into the model registry; entry set and shapes must match the
// model exactly (errors name the offending tensor).
void apply_checkpoint(Model<float>& model, const std::string& path);

}  // namespace camo
