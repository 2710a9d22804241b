#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "tailaug/core/graph.hpp"

namespace tailaug {

// Versioned single-file checkpoint: JSON manifest (config, schema hash,
// vocabulary, training stats) followed by named tensor blobs.
void write_checkpoint(const std::string& path, const nlohmann::json& manifest, const ParamSet& params);

struct Checkpoint {
    nlohmann::json manifest;
    std::map<std::string, Tensor> tensors;
};

Checkpoint read_checkpoint(const std::string& path);

// Copies tensors into an already-constructed ParamSet; throws on any
// missing or shape-mismatched entry.
void load_params(const Checkpoint& ckpt, ParamSet& params);

}  // namespace tailaug
