#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "hetnet/config.hpp"

namespace hetnet {

// Structured record of one CLI run: config snapshot, version, seed,
// per-epoch loss trace, and every artifact the run produced. write()
// refuses to emit a manifest naming artifacts that do not exist.
class RunManifest {
 public:
  RunManifest(const std::string& command, const ExperimentConfig& cfg);

  void add_artifact(const std::string& key, const std::string& path);
  void set_loss_trace(const std::vector<double>& per_epoch_total);
  void set(const std::string& key, const nlohmann::json& value);

  const nlohmann::json& json() const { return j_; }
  // Writes <output_dir>/manifest.json (or an explicit path).
  std::string write(const std::string& output_dir) const;

 private:
  nlohmann::json j_;
};

}  // namespace hetnet
