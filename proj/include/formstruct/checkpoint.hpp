#pragma once

#include <memory>
#include <string>

#include "formstruct/model.hpp"
#include "formstruct/training.hpp"

namespace formstruct {

// Self-describing checkpoint container, format version 1: embedded model and
// train configs, training bookkeeping, then every parameter tensor as name +
// shape + raw little-endian float32 payload, CRC-protected against
// truncation or corruption.
struct CheckpointMeta {
    std::string model_config_json;
    std::string train_config_json;
    std::string metrics_json;
    uint64_t model_seed = 0;
    int epochs_completed = 0;
};

void save_checkpoint(DocModel& model, const TrainConfig* train_config, const std::string& path);

// Reads only the header section (cheap inspection without tensor data).
CheckpointMeta read_checkpoint_meta(const std::string& path);

// Rebuilds the model from the embedded config, then loads every tensor.
std::unique_ptr<DocModel> load_checkpoint(const std::string& path);

// Loads tensors into an existing model; every tensor must match the model's
// parameter of the same name in shape. Used for resuming.
void load_checkpoint_into(DocModel& model, const std::string& path);

}  // namespace formstruct
