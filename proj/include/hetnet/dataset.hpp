#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/config.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::data {

struct DatasetEntry {
  std::string image_path;
  std::string label;      // "good" or a defect type
  std::string mask_path;  // empty when no mask applies
  bool is_defect() const { return label != "good"; }
};

struct DatasetIndex {
  std::string split;  // "train" or "test"
  std::vector<DatasetEntry> entries;
  int64_t size() const { return static_cast<int64_t>(entries.size()); }
};

// Reads the <root>/<category>/{train/good, test/<label>, ground_truth/<label>}
// layout. Entries are ordered lexicographically; every test defect image
// must have a ground-truth mask named <stem>_mask.png.
std::pair<DatasetIndex, DatasetIndex> scan_layout(const std::string& root,
                                                  const std::string& category);

struct Sample {
  Tensor image;  // (3,S,S), channel-normalized
  Tensor mask;   // (S,S), values exactly 0/1; empty shape (0,0) when absent
  bool has_mask = false;
  bool label_defect = false;
};

Sample load_sample(const DatasetEntry& entry, int64_t image_size,
                   const std::array<double, 3>& norm_mean,
                   const std::array<double, 3>& norm_std);

// Procedural corpus. Writes the MVTec-style layout plus geometry.json
// (one record per defect image: type, exact shape parameters, mask area)
// under <root>/<category>. Rendering is a pure function of (spec, seed,
// image index): identical inputs give byte-identical files.
void synth_corpus(const std::string& root, const std::string& category, const SynthSpec& spec,
                  int64_t image_size, int64_t seed);

}  // namespace hetnet::data
