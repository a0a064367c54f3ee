#include "hetnet/manifest.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "hetnet/common.hpp"

namespace hetnet {

namespace fs = std::filesystem;

RunManifest::RunManifest(const std::string& command, const ExperimentConfig& cfg) {
  j_["command"] = command;
  j_["version"] = kVersion;
  j_["seed"] = cfg.seed;
  j_["config"] = serialize_config(cfg);
  j_["config_fingerprint"] = config_fingerprint(cfg);
  j_["artifacts"] = nlohmann::json::object();
  j_["timestamp_utc"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
}

void RunManifest::add_artifact(const std::string& key, const std::string& path) {
  j_["artifacts"][key] = path;
}

void RunManifest::set_loss_trace(const std::vector<double>& per_epoch_total) {
  j_["loss_trace"] = per_epoch_total;
}

void RunManifest::set(const std::string& key, const nlohmann::json& value) { j_[key] = value; }

std::string RunManifest::write(const std::string& output_dir) const {
  HT_CHECK(!output_dir.empty(), "manifest: output_dir is empty");
  for (const auto& [key, path] : j_["artifacts"].items())
    HT_CHECK(fs::exists(path.get<std::string>()),
             "manifest: artifact '" + key + "' points to missing file " +
                 path.get<std::string>());
  fs::create_directories(output_dir);
  const fs::path target = fs::path(output_dir) / "manifest.json";
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp);
    HT_CHECK(f.good(), "manifest: cannot write " + tmp.string());
    f << j_.dump(2) << "\n";
  }
  fs::rename(tmp, target);
  return target.string();
}

}  // namespace hetnet
