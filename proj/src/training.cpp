#include "hetnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hetnet/common.hpp"
#include "hetnet/container.hpp"

namespace fs = std::filesystem;

namespace hetnet::training {
namespace {

constexpr double kCosineDelta = 1e-8;

Tensor slice_sample(const Tensor& t, int64_t b) {
  Tensor out({t.dim(1), t.dim(2), t.dim(3)});
  std::memcpy(out.data(), t.data() + b * out.numel(),
              static_cast<size_t>(out.numel()) * sizeof(double));
  return out;
}

void write_sample(Tensor& t, int64_t b, const Tensor& s) {
  std::memcpy(t.data() + b * s.numel(), s.data(),
              static_cast<size_t>(s.numel()) * sizeof(double));
}

struct BranchResult {
  ad::Var loss;
  std::map<int, double> layer_means;
};

BranchResult run_branch(const model::HetNet& m, const teacher::Pyramid& local,
                        const teacher::Pyramid& global_aligned, bool training,
                        const teacher::Pyramid& targets) {
  ad::Var fused = m.fuse(local, global_aligned, training);
  auto student = m.student_forward(fused, training);
  std::map<int, ad::Var> maps;
  for (int k : m.layers()) maps.emplace(k, anomaly_map(targets.at(k), student.at(k)));
  BranchResult r{branch_loss(maps, m.layers()), {}};
  for (auto& [k, map] : maps) r.layer_means.emplace(k, ad::mean_all(map).value()[0]);
  return r;
}

std::string csv_line(const StepRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g",
                static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.l_kd,
                r.l_recon, r.l_total);
  return buf;
}

void write_log(const std::string& path, const std::vector<StepRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  HT_CHECK(out.good(), "training: cannot write " + path);
  out << "epoch,step,l_kd,l_recon,l_total\n";
  for (const auto& r : trace) out << csv_line(r) << "\n";
}

Tensor trace_tensor(const std::vector<StepRecord>& trace) {
  Tensor t({static_cast<int64_t>(trace.size()), 5});
  for (size_t i = 0; i < trace.size(); ++i) {
    double* row = t.data() + 5 * static_cast<int64_t>(i);
    row[0] = static_cast<double>(trace[i].epoch);
    row[1] = static_cast<double>(trace[i].step);
    row[2] = trace[i].l_kd;
    row[3] = trace[i].l_recon;
    row[4] = trace[i].l_total;
  }
  return t;
}

std::vector<StepRecord> trace_from_tensor(const Tensor& t) {
  HT_CHECK(t.ndim() == 2 && t.dim(1) == 5, "checkpoint: trace array has shape " +
                                               shape_str(t.shape()) + ", expected (n,5)");
  std::vector<StepRecord> trace(static_cast<size_t>(t.dim(0)));
  for (size_t i = 0; i < trace.size(); ++i) {
    const double* row = t.data() + 5 * static_cast<int64_t>(i);
    trace[i] = {static_cast<int64_t>(row[0]), static_cast<int64_t>(row[1]), row[2], row[3],
                row[4]};
  }
  return trace;
}

}  // namespace

ad::Var anomaly_map(const Tensor& reference, const ad::Var& predicted) {
  return ad::affine(ad::cosine_map(ad::Var::constant(reference), predicted, kCosineDelta), -1.0,
                    1.0);
}

ad::Var branch_loss(const std::map<int, ad::Var>& maps, const std::vector<int>& layers_used) {
  HT_CHECK(!layers_used.empty(), "training: branch loss needs at least one layer");
  ad::Var total;
  bool first = true;
  for (int k : layers_used) {
    auto it = maps.find(k);
    HT_CHECK(it != maps.end(), "training: branch loss is missing layer " + std::to_string(k));
    ad::Var term = ad::mean_all(it->second);
    total = first ? term : ad::add(total, term);
    first = false;
  }
  return total;
}

teacher::Pyramid apply_noise(const teacher::Pyramid& features,
                             const std::vector<lmgn::NoisePyramid>& noise, NoiseMode mode) {
  HT_CHECK(!features.empty(), "training: apply_noise on an empty pyramid");
  const int64_t b = features.begin()->second.dim(0);
  HT_CHECK(static_cast<int64_t>(noise.size()) == b,
           "training: got " + std::to_string(noise.size()) + " noise fields for a batch of " +
               std::to_string(b));
  teacher::Pyramid out = features;
  for (int64_t i = 0; i < b; ++i) {
    std::map<int, Tensor> sample;
    for (const auto& [k, f] : features) sample.emplace(k, slice_sample(f, i));
    auto injected = lmgn::inject(sample, noise[static_cast<size_t>(i)], mode);
    for (const auto& [k, t] : injected) write_sample(out.at(k), i, t);
  }
  return out;
}

StepLoss step_loss(const model::HetNet& m, const model::TeacherFeatures& tf,
                   const std::vector<lmgn::NoisePyramid>& noise, bool training) {
  const ExperimentConfig& cfg = m.config();
  StepLoss out;
  out.values.alpha = cfg.alpha;

  BranchResult clean = run_branch(m, tf.local, tf.global_aligned, training, tf.local);
  out.values.clean_layer_means = clean.layer_means;

  if (noise.empty()) {
    out.values.l_kd = clean.loss.value()[0];
    out.values.l_recon = 0.0;
    out.values.l_total = out.values.l_kd;
    out.total = clean.loss;
    return out;
  }

  teacher::Pyramid noisy_local = apply_noise(tf.local, noise, cfg.noise_mode);
  BranchResult noisy = run_branch(m, noisy_local, tf.global_aligned, training, tf.local);
  out.values.noisy_layer_means = noisy.layer_means;

  const ad::Var& kd = cfg.swap_loss_roles ? noisy.loss : clean.loss;
  const ad::Var& recon = cfg.swap_loss_roles ? clean.loss : noisy.loss;
  out.total = ad::add(kd, ad::mul_scalar(recon, cfg.alpha));
  out.values.l_kd = kd.value()[0];
  out.values.l_recon = recon.value()[0];
  out.values.l_total = out.total.value()[0];
  return out;
}

void save_checkpoint(const std::string& path, const model::HetNet& m, const nn::Adam& opt,
                     int64_t epochs_completed, const std::vector<StepRecord>& trace) {
  const auto& ps = m.params();
  io::Container c;
  c.meta["kind"] = "checkpoint";
  c.meta["epochs_completed"] = epochs_completed;
  c.meta["adam_steps"] = opt.steps_taken();
  c.meta["config"] = serialize_config(m.config());
  c.meta["config_fingerprint"] = config_fingerprint(m.config());
  c.meta["backbone_local"] = m.local_encoder().backbone();
  c.meta["teacher_checksum_local"] = static_cast<int64_t>(m.local_encoder().param_checksum());
  c.meta["backbone_global"] = m.uses_global() ? m.global_encoder().backbone() : "";
  c.meta["teacher_checksum_global"] =
      m.uses_global() ? static_cast<int64_t>(m.global_encoder().param_checksum()) : 0;

  for (const auto& [name, p] : ps.params()) c.add("param." + name, p.value());
  for (const auto& [name, b] : ps.buffers()) c.add("buffer." + name, *b);
  const auto& names = ps.params();
  HT_ASSERT(opt.first_moments().size() == names.size(), "optimizer state out of sync");
  for (size_t i = 0; i < names.size(); ++i) {
    c.add("adam.m." + names[i].first, opt.first_moments()[i]);
    c.add("adam.v." + names[i].first, opt.second_moments()[i]);
  }
  c.add("trace", trace_tensor(trace));
  save_container(path, c);
}

Checkpoint load_checkpoint(const std::string& path, model::HetNet& m,
                           bool require_exact_config) {
  io::Container c = io::load_container(path);
  HT_CHECK(c.meta.value("kind", "") == "checkpoint", path + " is not a training checkpoint");
  if (require_exact_config)
    HT_CHECK(c.meta.value("config_fingerprint", "") == config_fingerprint(m.config()),
             "checkpoint: config fingerprint mismatch; resume requires the exact "
             "configuration the checkpoint was trained with");

  HT_CHECK(c.meta.value("backbone_local", "") == m.local_encoder().backbone(),
           "checkpoint: trained against teacher " + c.meta.value("backbone_local", "") +
               ", model uses " + m.local_encoder().backbone());
  HT_CHECK(c.meta.value("teacher_checksum_local", int64_t{-1}) ==
               static_cast<int64_t>(m.local_encoder().param_checksum()),
           "checkpoint: local teacher weights differ from the training run");
  const std::string global_backbone = m.uses_global() ? m.global_encoder().backbone() : "";
  HT_CHECK(c.meta.value("backbone_global", "") == global_backbone,
           "checkpoint: global branch mismatch (trained with '" +
               c.meta.value("backbone_global", "") + "', model has '" + global_backbone + "')");
  if (m.uses_global())
    HT_CHECK(c.meta.value("teacher_checksum_global", int64_t{-1}) ==
                 static_cast<int64_t>(m.global_encoder().param_checksum()),
             "checkpoint: global teacher weights differ from the training run");

  auto& ps = m.params();
  size_t expected = 1;  // the trace array
  for (const auto& [name, p] : ps.params()) {
    const std::string key = "param." + name;
    HT_CHECK(c.has(key), "checkpoint: missing parameter " + name);
    const Tensor& stored = c.array(key);
    HT_CHECK(stored.shape() == p.value().shape(),
             "checkpoint: parameter " + name + " has shape " + shape_str(stored.shape()) +
                 ", model expects " + shape_str(p.value().shape()));
    p.node()->value = stored;
    expected += 3;  // param + both adam moments
  }
  for (const auto& [name, b] : ps.buffers()) {
    const std::string key = "buffer." + name;
    HT_CHECK(c.has(key), "checkpoint: missing buffer " + name);
    const Tensor& stored = c.array(key);
    HT_CHECK(stored.shape() == b->shape(), "checkpoint: buffer " + name + " has shape " +
                                               shape_str(stored.shape()) + ", model expects " +
                                               shape_str(b->shape()));
    *b = stored;
    expected += 1;
  }
  HT_CHECK(c.arrays.size() == expected,
           "checkpoint: holds " + std::to_string(c.arrays.size()) + " arrays, this model needs " +
               std::to_string(expected) + "; architectures differ");

  Checkpoint ck;
  ck.epochs_completed = c.meta.value("epochs_completed", int64_t{0});
  ck.adam_steps = c.meta.value("adam_steps", int64_t{0});
  ck.config_text = c.meta.value("config", "");
  for (const auto& [name, p] : ps.params()) {
    ck.adam_m.push_back(c.array("adam.m." + name));
    ck.adam_v.push_back(c.array("adam.v." + name));
    HT_CHECK(ck.adam_m.back().shape() == p.value().shape() &&
                 ck.adam_v.back().shape() == p.value().shape(),
             "checkpoint: optimizer state for " + name + " has the wrong shape");
  }
  ck.trace = trace_from_tensor(c.array("trace"));
  return ck;
}

std::string checkpoint_config_text(const std::string& path) {
  io::Container c = io::load_container(path);
  HT_CHECK(c.meta.value("kind", "") == "checkpoint", path + " is not a training checkpoint");
  const std::string text = c.meta.value("config", "");
  HT_CHECK(!text.empty(), "checkpoint: missing config snapshot");
  return text;
}

TrainResult train(model::HetNet& m, const data::DatasetIndex& train_set,
                  const lmgn::GaussianFieldStats* stats, const std::string& out_dir,
                  const std::string& resume_path) {
  const ExperimentConfig& cfg = m.config();
  const int64_t n = train_set.size();
  HT_CHECK(n > 0, "training: the training set is empty");

  const bool wants_stats = cfg.noise_type == NoiseType::kMultivariateGaussian;
  HT_CHECK(!wants_stats || stats != nullptr,
           "training: statistics-driven noise needs fitted feature statistics; run "
           "fit-noise-stats first");
  HT_CHECK(wants_stats || stats == nullptr,
           "training: feature statistics supplied but the config does not use them");

  const auto noise_layers = cfg.effective_noise_layers();
  std::map<int, lmgn::LayerDims> plan_dims;
  if (cfg.noise_type != NoiseType::kNone) {
    auto dims = m.feature_dims();
    for (int k : noise_layers) plan_dims.emplace(k, dims.at(k));
  }
  if (wants_stats) {
    HT_CHECK(stats->backbone == m.local_encoder().backbone(),
             "training: statistics were fitted on " + stats->backbone + ", the local teacher is " +
                 m.local_encoder().backbone() + "; refit with fit-noise-stats");
    for (int k : noise_layers)
      HT_CHECK(stats->layer(k).dims == plan_dims.at(k),
               "training: statistics for layer " + std::to_string(k) +
                   " do not match the feature geometry; refit with fit-noise-stats");
  }

  fs::create_directories(out_dir);
  const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
  const std::string final_path = (fs::path(out_dir) / "checkpoint.hntc").string();

  auto& ps = m.params();
  std::vector<ad::Var> opt_params;
  for (const auto& [name, p] : ps.params()) opt_params.push_back(p);
  nn::Adam opt(opt_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);

  std::vector<StepRecord> trace;
  int64_t start_epoch = 0;
  if (!resume_path.empty()) {
    Checkpoint ck = load_checkpoint(resume_path, m, true);
    opt.load_state(std::move(ck.adam_m), std::move(ck.adam_v), ck.adam_steps);
    trace = std::move(ck.trace);
    start_epoch = ck.epochs_completed;
  }

  const uint32_t local_checksum = m.local_encoder().param_checksum();
  const uint32_t global_checksum = m.uses_global() ? m.global_encoder().param_checksum() : 0;

  const int64_t batch = cfg.batch_size;
  const int64_t steps_per_epoch = (n + batch - 1) / batch;
  const int64_t s = cfg.image_size;

  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    RngStream shuffle(derive_key(static_cast<uint64_t>(cfg.seed), "train.shuffle",
                                 static_cast<uint64_t>(epoch)));
    for (int64_t i = 0; i < n - 1; ++i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle.uniform_int(i, n - 1))]);

    for (int64_t step = 0; step < steps_per_epoch; ++step) {
      const int64_t lo = step * batch;
      const int64_t hi = std::min(n, lo + batch);
      const int64_t b = hi - lo;
      Tensor images({b, 3, s, s});
      for (int64_t i = 0; i < b; ++i) {
        const auto& entry = train_set.entries[static_cast<size_t>(order[static_cast<size_t>(
            lo + i)])];
        data::Sample sample = data::load_sample(entry, s, cfg.norm_mean, cfg.norm_std);
        write_sample(images, i, sample.image);
      }

      model::TeacherFeatures tf = m.extract(images);
      std::vector<lmgn::NoisePyramid> noise;
      if (cfg.noise_type != NoiseType::kNone) {
        noise.reserve(static_cast<size_t>(b));
        for (int64_t i = 0; i < b; ++i) {
          RngStream plan_rng(derive_key(static_cast<uint64_t>(cfg.seed), "train.noise",
                                        static_cast<uint64_t>(epoch),
                                        static_cast<uint64_t>(step), static_cast<uint64_t>(i)));
          auto plan = lmgn::make_plan(plan_dims, cfg.patch_frac_lo, cfg.patch_frac_hi, plan_rng);
          RngStream draw(plan.substream);
          noise.push_back(wants_stats
                              ? lmgn::sample_noise(*stats, plan, draw, cfg.noise_scale)
                              : lmgn::standard_normal_noise(plan, draw, cfg.noise_scale));
        }
      }

      opt.zero_grad();
      StepLoss loss = step_loss(m, tf, noise, true);
      HT_CHECK(std::isfinite(loss.values.l_total),
               "training: loss is not finite at epoch " + std::to_string(epoch) + " step " +
                   std::to_string(step));
      ad::backward(loss.total);
      opt.step();

      trace.push_back(
          {epoch, step, loss.values.l_kd, loss.values.l_recon, loss.values.l_total});
    }

    write_log(log_path, trace);
    if ((epoch + 1) % cfg.checkpoint_interval == 0 && epoch + 1 < cfg.epochs) {
      const std::string path =
          (fs::path(out_dir) / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".hntc"))
              .string();
      save_checkpoint(path, m, opt, epoch + 1, trace);
    }
  }

  HT_CHECK(m.local_encoder().param_checksum() == local_checksum,
           "training: local teacher parameters changed during training");
  if (m.uses_global())
    HT_CHECK(m.global_encoder().param_checksum() == global_checksum,
             "training: global teacher parameters changed during training");

  write_log(log_path, trace);
  save_checkpoint(final_path, m, opt, cfg.epochs, trace);

  TrainResult r;
  r.checkpoint_path = final_path;
  r.log_path = log_path;
  r.trace = trace;
  r.epoch_mean_total.assign(static_cast<size_t>(cfg.epochs), 0.0);
  std::vector<int64_t> counts(static_cast<size_t>(cfg.epochs), 0);
  for (const auto& rec : trace) {
    r.epoch_mean_total[static_cast<size_t>(rec.epoch)] += rec.l_total;
    ++counts[static_cast<size_t>(rec.epoch)];
  }
  for (size_t e = 0; e < r.epoch_mean_total.size(); ++e)
    if (counts[e] > 0) r.epoch_mean_total[e] /= static_cast<double>(counts[e]);
  return r;
}

}  // namespace hetnet::training
