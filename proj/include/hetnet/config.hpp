#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hetnet {

enum class NoiseType { kNone, kStandardNormal, kMultivariateGaussian };
enum class NoiseMode { kAddXi, kAddCentered };
enum class CovarianceMode { kFull, kDiagonal };
enum class TeacherStructure { kHte, kCnnOnly, kTransOnly };

const char* to_string(NoiseType v);
const char* to_string(NoiseMode v);
const char* to_string(CovarianceMode v);
const char* to_string(TeacherStructure v);

// Inline corpus-generator settings (synth_* keys in the config file).
struct SynthSpec {
  int64_t n_train = 60;
  int64_t n_test_good = 20;
  int64_t n_test_defect = 40;
  std::string texture = "cast";
  std::vector<std::string> defect_types = {"scratch", "blob", "dent"};
  std::vector<double> illumination_levels = {1.0};
  std::vector<double> resolution_levels = {1.0};
};

struct ExperimentConfig {
  std::string dataset_root;
  std::string category;
  int64_t image_size = 256;
  std::vector<int> layers_used = {1, 2, 3};
  std::string teacher_local = "toy_cnn";
  std::string teacher_global = "toy_attn";
  TeacherStructure teacher_structure = TeacherStructure::kHte;
  bool toy_mode = true;
  bool algf_enabled = true;
  bool lmgn_enabled = true;
  NoiseType noise_type = NoiseType::kMultivariateGaussian;
  NoiseMode noise_mode = NoiseMode::kAddXi;
  double noise_scale = 1.0;
  // Empty means: inject at every layer in layers_used.
  std::vector<int> noise_layers;
  double lmgn_epsilon = 0.01;
  double alpha = 0.1;
  double learning_rate = 0.005;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int64_t epochs = 200;
  int64_t batch_size = 16;
  int64_t seed = 0;
  CovarianceMode covariance_mode = CovarianceMode::kFull;
  double patch_frac_lo = 0.125;
  double patch_frac_hi = 0.5;
  // 0 disables smoothing ("none" in the file).
  double smoothing_sigma = 4.0;
  std::string output_dir;
  std::array<double, 3> norm_mean{};
  std::array<double, 3> norm_std{};
  int attention_heads = 1;
  bool swap_loss_roles = false;
  int64_t checkpoint_interval = 10;
  int num_threads = 0;
  double pro_fpr_limit = 0.3;
  int pro_n_thresholds = 200;
  int pro_connectivity = 8;
  std::string teacher_local_weights;
  std::string teacher_global_weights;
  // Empty resolves to <output_dir>/noise_stats.hntc at use sites.
  std::string stats_path;
  SynthSpec synth;

  std::vector<int> effective_noise_layers() const {
    return noise_layers.empty() ? layers_used : noise_layers;
  }
  std::string resolved_stats_path() const;
};

// Parses a flat key=value file ('#' comments, blank lines ignored).
// Overrides are "key=value" strings applied after the file, before
// validation. Unknown keys and type mismatches are errors naming the key.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides = {});

// Emits every field as key=value, one per line, in declaration order.
// load(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

void validate_config(const ExperimentConfig& c);

// Stable hash of the serialized form, for run manifests and reports.
std::string config_fingerprint(const ExperimentConfig& c);

}  // namespace hetnet
