#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "hetnet/dataset.hpp"
#include "hetnet/lmgn.hpp"
#include "hetnet/model.hpp"
#include "hetnet/nn.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::training {

// Per-position cosine distance along the channel axis between a frozen
// reference map and a prediction: 1 - <t,s> / (|t||s| + 1e-8), shaped
// (B,H,W). Gradients flow into the prediction only.
ad::Var anomaly_map(const Tensor& reference, const ad::Var& predicted);

// Sum over the given layers of each map's mean value. The mean over
// (B,H,W) is the batch average of per-image spatial means.
ad::Var branch_loss(const std::map<int, ad::Var>& maps, const std::vector<int>& layers_used);

struct LossBreakdown {
  std::map<int, double> clean_layer_means;
  std::map<int, double> noisy_layer_means;  // empty when the noisy branch is off
  double l_kd = 0.0;
  double l_recon = 0.0;
  double l_total = 0.0;
  double alpha = 0.0;
};

struct StepLoss {
  ad::Var total;
  LossBreakdown values;
};

// Runs the clean branch, and the noisy branch when per-sample noise fields
// are given, against the same frozen targets. Which branch feeds which
// loss term follows config.swap_loss_roles.
StepLoss step_loss(const model::HetNet& m, const model::TeacherFeatures& tf,
                   const std::vector<lmgn::NoisePyramid>& noise, bool training);

// Adds one noise field per sample to the batched feature pyramid; layers
// absent from a field pass through untouched.
teacher::Pyramid apply_noise(const teacher::Pyramid& features,
                             const std::vector<lmgn::NoisePyramid>& noise, NoiseMode mode);

struct StepRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double l_kd = 0.0;
  double l_recon = 0.0;
  double l_total = 0.0;
};

struct Checkpoint {
  int64_t epochs_completed = 0;
  int64_t adam_steps = 0;
  std::vector<Tensor> adam_m, adam_v;  // aligned with parameter registration order
  std::vector<StepRecord> trace;
  std::string config_text;
};

// Parameter values, batch-norm buffers, optimizer state, loss trace, and a
// config snapshot in one versioned container.
void save_checkpoint(const std::string& path, const model::HetNet& m, const nn::Adam& opt,
                     int64_t epochs_completed, const std::vector<StepRecord>& trace);

// Restores parameters and buffers into a compatible model and returns the
// bookkeeping state. Architectural compatibility is structural: every
// stored array must match a registered name and shape, and the frozen
// teacher checksums must agree. require_exact_config additionally demands
// an identical config fingerprint (the resume contract).
Checkpoint load_checkpoint(const std::string& path, model::HetNet& m, bool require_exact_config);

// Config snapshot stored inside a checkpoint, for running inference
// without the original config file.
std::string checkpoint_config_text(const std::string& path);

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  std::vector<StepRecord> trace;
  std::vector<double> epoch_mean_total;
};

// Full optimization loop. stats must be non-null exactly when the config
// asks for statistics-driven noise. resume_path, when nonempty, restores a
// checkpoint written by the same configuration and continues from its
// epoch counter; the rng schedule is keyed by (seed, epoch, step), so a
// resumed run retraces the uninterrupted one.
TrainResult train(model::HetNet& m, const data::DatasetIndex& train_set,
                  const lmgn::GaussianFieldStats* stats, const std::string& out_dir,
                  const std::string& resume_path = "");

}  // namespace hetnet::training
