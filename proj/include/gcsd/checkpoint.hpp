#pragma once

#include <cstdint>
#include <string>

#include "gcsd/dpsm.hpp"
#include "gcsd/model.hpp"
#include "gcsd/vocab.hpp"

namespace gcsd {

enum class TrainStage { SimSFT, RealSFT, MRPO };

std::string stage_name(TrainStage s);
TrainStage stage_from_name(const std::string& name);

struct CheckpointMeta {
    TrainStage stage = TrainStage::SimSFT;
    int64_t step = 0;
    uint64_t config_hash = 0;
    std::string metrics_json = "{}";  // metric snapshot at save time
    std::string lineage;              // comma-separated stages already run
};

struct Checkpoint {
    ModelParams model;
    SoftPromptNetParams softnet;
    Vocab vocab;
    CheckpointMeta meta;
};

// Single binary container: "GCKP" magic, little-endian u32 header length, a
// JSON header (version "gcsd-ckpt-v1", model config, vocab, tensor table,
// meta), then the tensors as little-endian FP32 in table order.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gcsd
