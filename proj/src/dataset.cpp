#include "hetnet/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "hetnet/common.hpp"
#include "hetnet/image.hpp"

namespace hetnet::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> sorted_images(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
      out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::pair<DatasetIndex, DatasetIndex> scan_layout(const std::string& root,
                                                  const std::string& category) {
  const fs::path base = fs::path(root) / category;
  HT_CHECK(fs::exists(base), "dataset: " + base.string() + " does not exist");

  DatasetIndex train{"train", {}};
  for (const auto& p : sorted_images(base / "train" / "good"))
    train.entries.push_back({p, "good", ""});
  HT_CHECK(!train.entries.empty(),
           "dataset: no training images under " + (base / "train" / "good").string());

  DatasetIndex test{"test", {}};
  for (const auto& label : sorted_subdirs(base / "test")) {
    for (const auto& p : sorted_images(base / "test" / label)) {
      if (label == "good") {
        test.entries.push_back({p, "good", ""});
        continue;
      }
      const fs::path stem = fs::path(p).stem();
      const fs::path mask =
          base / "ground_truth" / label / (stem.string() + "_mask.png");
      HT_CHECK(fs::exists(mask),
               "dataset: defect image " + p + " has no ground-truth mask at " + mask.string());
      test.entries.push_back({p, label, mask.string()});
    }
  }
  return {std::move(train), std::move(test)};
}

Sample load_sample(const DatasetEntry& entry, int64_t image_size,
                   const std::array<double, 3>& norm_mean,
                   const std::array<double, 3>& norm_std) {
  Sample s;
  s.label_defect = entry.is_defect();

  Tensor im = img::load_image_rgb(entry.image_path);
  im = img::resize_bilinear(im, image_size, image_size);
  for (int64_t c = 0; c < 3; ++c) {
    double* p = im.data() + c * image_size * image_size;
    const double m = norm_mean[static_cast<size_t>(c)];
    const double sd = norm_std[static_cast<size_t>(c)];
    for (int64_t i = 0; i < image_size * image_size; ++i) p[i] = (p[i] - m) / sd;
  }
  s.image = std::move(im);

  if (!entry.mask_path.empty()) {
    Tensor m = img::load_mask(entry.mask_path);
    m = img::resize_nearest(m, image_size, image_size);
    // Nearest keeps 0/1 exactly; re-binarize anyway to honor the contract.
    for (int64_t i = 0; i < m.numel(); ++i) m.data()[i] = m.data()[i] >= 0.5 ? 1.0 : 0.0;
    s.mask = m.reshaped({image_size, image_size});
    s.has_mask = true;
  } else {
    s.mask = Tensor({0, 0});
  }
  return s;
}

}  // namespace hetnet::data
