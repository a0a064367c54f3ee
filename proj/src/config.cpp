#include "hetnet/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hetnet/common.hpp"
#include "hetnet/container.hpp"

namespace hetnet {

namespace {

constexpr std::array<double, 3> kToyMean = {0.5, 0.5, 0.5};
constexpr std::array<double, 3> kToyStd = {0.5, 0.5, 0.5};
constexpr std::array<double, 3> kImagenetMean = {0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImagenetStd = {0.229, 0.224, 0.225};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// Raw key/value bag with consumption tracking so leftovers can be
// reported as unknown keys.
struct Cursor {
  std::map<std::string, std::string> kv;
  std::set<std::string> consumed;

  bool has(const std::string& k) const { return kv.count(k) != 0; }

  const std::string* take(const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) return nullptr;
    consumed.insert(k);
    return &it->second;
  }

  std::string str(const std::string& k, std::string def) {
    const std::string* v = take(k);
    return v ? *v : std::move(def);
  }

  int64_t i64(const std::string& k, int64_t def) {
    const std::string* v = take(k);
    if (!v) return def;
    try {
      size_t pos = 0;
      const int64_t r = std::stoll(*v, &pos);
      HT_CHECK(pos == v->size(), "");
      return r;
    } catch (...) {
      fail("config: key '" + k + "' expects an integer, got '" + *v + "'");
    }
  }

  double dbl(const std::string& k, double def) {
    const std::string* v = take(k);
    if (!v) return def;
    try {
      size_t pos = 0;
      const double r = std::stod(*v, &pos);
      HT_CHECK(pos == v->size(), "");
      return r;
    } catch (...) {
      fail("config: key '" + k + "' expects a number, got '" + *v + "'");
    }
  }

  bool boolean(const std::string& k, bool def) {
    const std::string* v = take(k);
    if (!v) return def;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail("config: key '" + k + "' expects true/false, got '" + *v + "'");
  }

  std::vector<int> ints(const std::string& k, std::vector<int> def) {
    const std::string* v = take(k);
    if (!v) return def;
    std::vector<int> out;
    for (const auto& tok : split_csv(*v)) {
      try {
        size_t pos = 0;
        out.push_back(std::stoi(tok, &pos));
        HT_CHECK(pos == tok.size(), "");
      } catch (...) {
        fail("config: key '" + k + "' expects integers, got '" + tok + "'");
      }
    }
    return out;
  }

  std::vector<double> dbls(const std::string& k, std::vector<double> def) {
    const std::string* v = take(k);
    if (!v) return def;
    std::vector<double> out;
    for (const auto& tok : split_csv(*v)) {
      try {
        size_t pos = 0;
        out.push_back(std::stod(tok, &pos));
        HT_CHECK(pos == tok.size(), "");
      } catch (...) {
        fail("config: key '" + k + "' expects numbers, got '" + tok + "'");
      }
    }
    return out;
  }
};

void insert_kv(Cursor& cur, const std::string& key, const std::string& val, bool allow_replace,
               const std::string& where) {
  if (!allow_replace && cur.kv.count(key))
    fail("config: duplicate key '" + key + "' in " + where);
  cur.kv[key] = val;
}

void parse_lines(Cursor& cur, const std::string& text, const std::string& where) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    HT_CHECK(eq != std::string::npos, "config: line " + std::to_string(lineno) + " in " + where +
                                          " is not key=value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    HT_CHECK(!key.empty(), "config: empty key at line " + std::to_string(lineno) + " in " + where);
    insert_kv(cur, key, trim(line.substr(eq + 1)), false, where);
  }
}

template <typename E>
E parse_choice(const std::string& key, const std::string& v,
               std::initializer_list<std::pair<const char*, E>> table) {
  std::string valid;
  for (const auto& [name, e] : table) {
    if (v == name) return e;
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  fail("config: key '" + key + "' must be one of {" + valid + "}, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else if constexpr (std::is_same_v<T, double>)
      out += fmt(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

ExperimentConfig from_cursor(Cursor& cur) {
  ExperimentConfig c;
  c.dataset_root = cur.str("dataset_root", "");
  c.category = cur.str("category", "");
  c.image_size = cur.i64("image_size", 256);
  c.layers_used = cur.ints("layers_used", {1, 2, 3});
  c.teacher_local = cur.str("teacher_local", "toy_cnn");
  c.teacher_global = cur.str("teacher_global", "toy_attn");
  c.teacher_structure = parse_choice<TeacherStructure>(
      "teacher_structure", cur.str("teacher_structure", "hte"),
      {{"hte", TeacherStructure::kHte},
       {"cnn_only", TeacherStructure::kCnnOnly},
       {"trans_only", TeacherStructure::kTransOnly}});
  c.toy_mode = cur.boolean("toy_mode", true);
  c.algf_enabled = cur.boolean("algf_enabled", true);
  c.lmgn_enabled = cur.boolean("lmgn_enabled", true);
  c.noise_type = parse_choice<NoiseType>(
      "noise_type", cur.str("noise_type", "multivariate_gaussian"),
      {{"none", NoiseType::kNone},
       {"standard_normal", NoiseType::kStandardNormal},
       {"multivariate_gaussian", NoiseType::kMultivariateGaussian}});
  c.noise_mode = parse_choice<NoiseMode>("noise_mode", cur.str("noise_mode", "add_xi"),
                                         {{"add_xi", NoiseMode::kAddXi},
                                          {"add_centered", NoiseMode::kAddCentered}});
  c.noise_scale = cur.dbl("noise_scale", 1.0);
  c.noise_layers = cur.ints("noise_layers", {});
  c.lmgn_epsilon = cur.dbl("lmgn_epsilon", 0.01);
  c.alpha = cur.dbl("alpha", 0.1);
  c.learning_rate = cur.dbl("learning_rate", 0.005);
  {
    auto betas = cur.dbls("adam_betas", {0.5, 0.999});
    HT_CHECK(betas.size() == 2, "config: key 'adam_betas' expects two numbers");
    c.adam_beta1 = betas[0];
    c.adam_beta2 = betas[1];
  }
  c.epochs = cur.i64("epochs", 200);
  c.batch_size = cur.i64("batch_size", 16);
  c.seed = cur.i64("seed", 0);
  c.covariance_mode = parse_choice<CovarianceMode>(
      "covariance_mode", cur.str("covariance_mode", "full"),
      {{"full", CovarianceMode::kFull}, {"diagonal", CovarianceMode::kDiagonal}});
  {
    auto fr = cur.dbls("patch_side_fractions", {0.125, 0.5});
    HT_CHECK(fr.size() == 2, "config: key 'patch_side_fractions' expects two numbers");
    c.patch_frac_lo = fr[0];
    c.patch_frac_hi = fr[1];
  }
  {
    const std::string s = cur.str("smoothing_sigma", "4.0");
    if (s == "none") {
      c.smoothing_sigma = 0.0;
    } else {
      try {
        size_t pos = 0;
        c.smoothing_sigma = std::stod(s, &pos);
        HT_CHECK(pos == s.size(), "");
      } catch (...) {
        fail("config: key 'smoothing_sigma' expects a number or none, got '" + s + "'");
      }
    }
  }
  {
    std::string od = cur.str("output_dir", "");
    if (od.empty()) {
      const char* env = std::getenv("HETNET_OUTPUT_DIR");
      if (env) od = env;
    }
    c.output_dir = od;
  }
  {
    const auto dm = c.toy_mode ? kToyMean : kImagenetMean;
    const auto ds = c.toy_mode ? kToyStd : kImagenetStd;
    auto m = cur.dbls("normalization_mean", {dm[0], dm[1], dm[2]});
    auto s = cur.dbls("normalization_std", {ds[0], ds[1], ds[2]});
    HT_CHECK(m.size() == 3, "config: key 'normalization_mean' expects three numbers");
    HT_CHECK(s.size() == 3, "config: key 'normalization_std' expects three numbers");
    std::copy(m.begin(), m.end(), c.norm_mean.begin());
    std::copy(s.begin(), s.end(), c.norm_std.begin());
  }
  c.attention_heads = static_cast<int>(cur.i64("attention_heads", 1));
  c.swap_loss_roles = cur.boolean("swap_loss_roles", false);
  c.checkpoint_interval = cur.i64("checkpoint_interval", 10);
  c.num_threads = static_cast<int>(cur.i64("num_threads", 0));
  c.pro_fpr_limit = cur.dbl("pro_fpr_limit", 0.3);
  c.pro_n_thresholds = static_cast<int>(cur.i64("pro_n_thresholds", 200));
  c.pro_connectivity = static_cast<int>(cur.i64("pro_connectivity", 8));
  c.teacher_local_weights = cur.str("teacher_local_weights", "");
  c.teacher_global_weights = cur.str("teacher_global_weights", "");
  c.stats_path = cur.str("stats_path", "");

  c.synth.n_train = cur.i64("synth_n_train", 60);
  c.synth.n_test_good = cur.i64("synth_n_test_good", 20);
  c.synth.n_test_defect = cur.i64("synth_n_test_defect", 40);
  c.synth.texture = cur.str("synth_texture", "cast");
  {
    auto types = split_csv(cur.str("synth_defect_types", "scratch,blob,dent"));
    c.synth.defect_types = types;
  }
  c.synth.illumination_levels = cur.dbls("synth_illumination_levels", {1.0});
  c.synth.resolution_levels = cur.dbls("synth_resolution_levels", {1.0});

  std::string unknown;
  for (const auto& [k, v] : cur.kv)
    if (!cur.consumed.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  HT_CHECK(unknown.empty(), "config: unknown keys: " + unknown);

  validate_config(c);
  return c;
}

}  // namespace

const char* to_string(NoiseType v) {
  switch (v) {
    case NoiseType::kNone: return "none";
    case NoiseType::kStandardNormal: return "standard_normal";
    case NoiseType::kMultivariateGaussian: return "multivariate_gaussian";
  }
  return "?";
}
const char* to_string(NoiseMode v) {
  return v == NoiseMode::kAddXi ? "add_xi" : "add_centered";
}
const char* to_string(CovarianceMode v) {
  return v == CovarianceMode::kFull ? "full" : "diagonal";
}
const char* to_string(TeacherStructure v) {
  switch (v) {
    case TeacherStructure::kHte: return "hte";
    case TeacherStructure::kCnnOnly: return "cnn_only";
    case TeacherStructure::kTransOnly: return "trans_only";
  }
  return "?";
}

std::string ExperimentConfig::resolved_stats_path() const {
  if (!stats_path.empty()) return stats_path;
  HT_CHECK(!output_dir.empty(),
           "config: stats_path is empty and no output_dir is set to derive it from");
  return output_dir + "/noise_stats.hntc";
}

ExperimentConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides) {
  Cursor cur;
  parse_lines(cur, text, "config");
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    HT_CHECK(eq != std::string::npos && eq > 0,
             "config: override is not key=value: '" + ov + "'");
    insert_kv(cur, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), true, "overrides");
  }
  return from_cursor(cur);
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  HT_CHECK(f.good(), "config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str(), overrides);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string o;
  auto kv = [&o](const std::string& k, const std::string& v) { o += k + "=" + v + "\n"; };
  kv("dataset_root", c.dataset_root);
  kv("category", c.category);
  kv("image_size", std::to_string(c.image_size));
  kv("layers_used", join(c.layers_used));
  kv("teacher_local", c.teacher_local);
  kv("teacher_global", c.teacher_global);
  kv("teacher_structure", to_string(c.teacher_structure));
  kv("toy_mode", c.toy_mode ? "true" : "false");
  kv("algf_enabled", c.algf_enabled ? "true" : "false");
  kv("lmgn_enabled", c.lmgn_enabled ? "true" : "false");
  kv("noise_type", to_string(c.noise_type));
  kv("noise_mode", to_string(c.noise_mode));
  kv("noise_scale", fmt(c.noise_scale));
  kv("noise_layers", join(c.noise_layers));
  kv("lmgn_epsilon", fmt(c.lmgn_epsilon));
  kv("alpha", fmt(c.alpha));
  kv("learning_rate", fmt(c.learning_rate));
  kv("adam_betas", fmt(c.adam_beta1) + "," + fmt(c.adam_beta2));
  kv("epochs", std::to_string(c.epochs));
  kv("batch_size", std::to_string(c.batch_size));
  kv("seed", std::to_string(c.seed));
  kv("covariance_mode", to_string(c.covariance_mode));
  kv("patch_side_fractions", fmt(c.patch_frac_lo) + "," + fmt(c.patch_frac_hi));
  kv("smoothing_sigma", c.smoothing_sigma == 0.0 ? "none" : fmt(c.smoothing_sigma));
  kv("output_dir", c.output_dir);
  kv("normalization_mean", fmt(c.norm_mean[0]) + "," + fmt(c.norm_mean[1]) + "," + fmt(c.norm_mean[2]));
  kv("normalization_std", fmt(c.norm_std[0]) + "," + fmt(c.norm_std[1]) + "," + fmt(c.norm_std[2]));
  kv("attention_heads", std::to_string(c.attention_heads));
  kv("swap_loss_roles", c.swap_loss_roles ? "true" : "false");
  kv("checkpoint_interval", std::to_string(c.checkpoint_interval));
  kv("num_threads", std::to_string(c.num_threads));
  kv("pro_fpr_limit", fmt(c.pro_fpr_limit));
  kv("pro_n_thresholds", std::to_string(c.pro_n_thresholds));
  kv("pro_connectivity", std::to_string(c.pro_connectivity));
  kv("teacher_local_weights", c.teacher_local_weights);
  kv("teacher_global_weights", c.teacher_global_weights);
  kv("stats_path", c.stats_path);
  kv("synth_n_train", std::to_string(c.synth.n_train));
  kv("synth_n_test_good", std::to_string(c.synth.n_test_good));
  kv("synth_n_test_defect", std::to_string(c.synth.n_test_defect));
  kv("synth_texture", c.synth.texture);
  kv("synth_defect_types", join(c.synth.defect_types));
  kv("synth_illumination_levels", join(c.synth.illumination_levels));
  kv("synth_resolution_levels", join(c.synth.resolution_levels));
  return o;
}

void validate_config(const ExperimentConfig& c) {
  HT_CHECK(c.alpha >= 0.0, "config: alpha must be >= 0, got " + fmt(c.alpha));
  HT_CHECK(c.learning_rate > 0.0,
           "config: learning_rate must be > 0, got " + fmt(c.learning_rate));
  HT_CHECK(c.epochs >= 1, "config: epochs must be >= 1, got " + std::to_string(c.epochs));
  HT_CHECK(c.batch_size >= 1,
           "config: batch_size must be >= 1, got " + std::to_string(c.batch_size));
  HT_CHECK(c.image_size >= 32 && c.image_size % 32 == 0,
           "config: image_size must be a positive multiple of 32, got " +
               std::to_string(c.image_size));
  HT_CHECK(!c.layers_used.empty(), "config: layers_used must be nonempty");
  for (size_t i = 0; i < c.layers_used.size(); ++i) {
    HT_CHECK(c.layers_used[i] >= 1 && c.layers_used[i] <= 3,
             "config: layers_used entries must be stage indices in [1,3]");
    HT_CHECK(i == 0 || c.layers_used[i] > c.layers_used[i - 1],
             "config: layers_used is not strictly increasing");
  }
  for (int k : c.noise_layers)
    HT_CHECK(std::find(c.layers_used.begin(), c.layers_used.end(), k) != c.layers_used.end(),
             "config: noise_layers entry " + std::to_string(k) + " is not in layers_used");
  if (c.lmgn_enabled)
    HT_CHECK(c.noise_type == NoiseType::kMultivariateGaussian,
             "config: lmgn_enabled=true requires noise_type=multivariate_gaussian");
  if (c.noise_type == NoiseType::kMultivariateGaussian)
    HT_CHECK(c.lmgn_enabled,
             "config: noise_type=multivariate_gaussian requires lmgn_enabled=true");
  HT_CHECK(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0,
           "config: adam_betas must lie in [0,1)");
  HT_CHECK(c.patch_frac_lo > 0.0 && c.patch_frac_lo <= c.patch_frac_hi && c.patch_frac_hi <= 1.0,
           "config: patch_side_fractions must satisfy 0 < lo <= hi <= 1");
  HT_CHECK(c.smoothing_sigma >= 0.0, "config: smoothing_sigma must be >= 0 or none");
  HT_CHECK(c.noise_scale >= 0.0, "config: noise_scale must be >= 0");
  HT_CHECK(c.lmgn_epsilon > 0.0, "config: lmgn_epsilon must be > 0");
  HT_CHECK(c.attention_heads >= 1, "config: attention_heads must be >= 1");
  HT_CHECK(c.checkpoint_interval >= 1, "config: checkpoint_interval must be >= 1");
  HT_CHECK(c.num_threads >= 0, "config: num_threads must be >= 0");
  HT_CHECK(c.pro_fpr_limit > 0.0 && c.pro_fpr_limit <= 1.0,
           "config: pro_fpr_limit must lie in (0,1]");
  HT_CHECK(c.pro_n_thresholds >= 2, "config: pro_n_thresholds must be >= 2");
  HT_CHECK(c.pro_connectivity == 4 || c.pro_connectivity == 8,
           "config: pro_connectivity must be 4 or 8");
  for (double s : c.norm_std) HT_CHECK(s > 0.0, "config: normalization_std must be positive");
  HT_CHECK(c.synth.n_train >= 1 && c.synth.n_test_good >= 1 && c.synth.n_test_defect >= 1,
           "config: synth corpus counts must be >= 1");
  HT_CHECK(c.synth.texture == "cast" || c.synth.texture == "brushed",
           "config: synth_texture must be cast or brushed");
  HT_CHECK(!c.synth.defect_types.empty(), "config: synth_defect_types must be nonempty");
  for (const auto& t : c.synth.defect_types)
    HT_CHECK(t == "scratch" || t == "blob" || t == "dent",
             "config: synth_defect_types entries must be scratch, blob, or dent; got '" + t + "'");
  for (double lv : c.synth.illumination_levels)
    HT_CHECK(lv > 0.0, "config: synth_illumination_levels must be positive");
  for (double lv : c.synth.resolution_levels)
    HT_CHECK(lv > 0.0 && lv <= 1.0, "config: synth_resolution_levels must lie in (0,1]");
}

std::string config_fingerprint(const ExperimentConfig& c) {
  const std::string s = serialize_config(c);
  const uint32_t h = io::crc32(s.data(), s.size());
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", h);
  return buf;
}

}  // namespace hetnet
