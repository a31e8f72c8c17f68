#pragma once

#include <string>

#include "leap/model.hpp"
#include "leap/text.hpp"

namespace leap {

// Self-describing binary checkpoint: magic, format version, config as JSON,
// vocabulary strings, then every parameter tensor with a shape header.
// Loading validates each shape against the stored config.
struct Checkpoint {
  LeapConfig config;
  LeapParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::string& path, const LeapConfig& cfg,
                     const LeapParams& params, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace leap
