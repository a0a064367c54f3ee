#include "hetnet/ablation.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"

#include "hetnet/common.hpp"
#include "hetnet/dataset.hpp"
#include "hetnet/lmgn.hpp"
#include "hetnet/metrics.hpp"
#include "hetnet/model.hpp"
#include "hetnet/training.hpp"

namespace hetnet::ablation {

namespace fs = std::filesystem;

Grid default_grid() {
  Grid g;
  const std::vector<std::string> no_noise = {"lmgn_enabled=false",
                                             "noise_type=none"};
  const std::vector<std::string> randn = {"lmgn_enabled=false",
                                          "noise_type=standard_normal"};
  const std::vector<std::string> mgds = {"lmgn_enabled=true",
                                         "noise_type=multivariate_gaussian"};
  auto with = [](std::vector<std::string> base, std::vector<std::string> extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };
  g.cells = {
      {"cnn_only", with({"teacher_structure=cnn_only", "algf_enabled=false"}, no_noise)},
      {"trans_only", with({"teacher_structure=trans_only", "algf_enabled=false"}, no_noise)},
      {"hte", with({"teacher_structure=hte", "algf_enabled=false"}, no_noise)},
      {"hte_algf", with({"teacher_structure=hte", "algf_enabled=true"}, no_noise)},
      {"hte_lmgn", with({"teacher_structure=hte", "algf_enabled=false"}, mgds)},
      {"full", with({"teacher_structure=hte", "algf_enabled=true"}, mgds)},
      {"full_randn", with({"teacher_structure=hte", "algf_enabled=true"}, randn)},
  };
  return g;
}

Grid load_grid(const std::string& path) {
  std::ifstream f(path);
  HT_CHECK(f.good(), "ablation: cannot read grid file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    fail("ablation: grid file " + path + " is not valid JSON: " + e.what());
  }
  Grid g;
  g.seeds_per_cell = j.value("seeds_per_cell", 3);
  HT_CHECK(j.contains("cells") && j["cells"].is_array(),
           "ablation: grid file needs a 'cells' array");
  for (const auto& cj : j["cells"]) {
    Cell c;
    HT_CHECK(cj.contains("name") && cj["name"].is_string(),
             "ablation: every cell needs a string 'name'");
    c.name = cj["name"].get<std::string>();
    for (const auto& ov : cj.value("overrides", nlohmann::json::array()))
      c.overrides.push_back(ov.get<std::string>());
    g.cells.push_back(std::move(c));
  }
  return g;
}

namespace {

void append_row(std::ofstream& csv, const Row& r) {
  char nums[128];
  std::snprintf(nums, sizeof(nums), "%.17g,%.17g,%.17g", r.image_auroc,
                r.pixel_auroc, r.pro);
  csv << r.cell << "," << r.seed << "," << r.teacher_structure << ","
      << (r.algf ? "true" : "false") << "," << r.noise_type << ","
      << (r.ok ? nums : ",,") << "," << (r.ok ? "ok" : "failed") << ",\""
      << r.error << "\"\n";
  csv.flush();
}

}  // namespace

GridResult run_grid(const ExperimentConfig& base, const Grid& grid,
                    const std::string& out_dir) {
  HT_CHECK(!grid.cells.empty(), "ablation: grid has no cells");
  HT_CHECK(grid.seeds_per_cell >= 1, "ablation: seeds_per_cell must be >= 1");
  for (size_t i = 0; i < grid.cells.size(); ++i)
    for (size_t j = i + 1; j < grid.cells.size(); ++j)
      HT_CHECK(grid.cells[i].name != grid.cells[j].name,
               "ablation: duplicate cell name " + grid.cells[i].name);

  auto [train_index, test_index] = data::scan_layout(base.dataset_root, base.category);

  fs::create_directories(out_dir);
  GridResult result;
  result.csv_path = (fs::path(out_dir) / "ablation.csv").string();
  std::ofstream csv(result.csv_path);
  HT_CHECK(csv.good(), "ablation: cannot write " + result.csv_path);
  csv << "cell,seed,teacher_structure,algf,noise_type,image_auroc,pixel_auroc,"
         "pro,status,error\n";

  std::map<std::string, lmgn::GaussianFieldStats> stats_cache;
  const std::string base_text = serialize_config(base);

  for (const Cell& cell : grid.cells) {
    for (int si = 0; si < grid.seeds_per_cell; ++si) {
      Row row;
      row.cell = cell.name;
      row.seed = base.seed + si;
      try {
        std::vector<std::string> ov = cell.overrides;
        ov.push_back("seed=" + std::to_string(row.seed));
        const ExperimentConfig cfg = config_from_text(base_text, ov);
        row.teacher_structure = to_string(cfg.teacher_structure);
        row.algf = cfg.algf_enabled;
        row.noise_type = to_string(cfg.noise_type);

        auto m = model::HetNet::build(cfg);
        const lmgn::GaussianFieldStats* stats = nullptr;
        if (cfg.noise_type == NoiseType::kMultivariateGaussian) {
          const std::string key = m.local_encoder().backbone();
          auto it = stats_cache.find(key);
          if (it == stats_cache.end())
            it = stats_cache.emplace(key, lmgn::fit_stats(m.local_encoder(),
                                                          train_index, cfg))
                     .first;
          stats = &it->second;
        }
        const fs::path cell_dir =
            fs::path(out_dir) / "cells" / cell.name / ("seed" + std::to_string(row.seed));
        training::train(m, train_index, stats, cell_dir.string());
        metrics::EvalReport rep = metrics::evaluate(m, test_index, cell_dir.string());
        row.image_auroc = rep.image_auroc;
        row.pixel_auroc = rep.pixel_auroc;
        row.pro = rep.pro;
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      append_row(csv, row);
      result.rows.push_back(std::move(row));
    }
  }

  for (const Cell& cell : grid.cells) {
    CellMean mean;
    mean.cell = cell.name;
    for (const Row& r : result.rows) {
      if (r.cell != cell.name) continue;
      ++mean.n_total;
      if (!r.ok) continue;
      ++mean.n_ok;
      mean.image_auroc += r.image_auroc;
      mean.pixel_auroc += r.pixel_auroc;
      mean.pro += r.pro;
    }
    if (mean.n_ok > 0) {
      mean.image_auroc /= mean.n_ok;
      mean.pixel_auroc /= mean.n_ok;
      mean.pro /= mean.n_ok;
    }
    char nums[160];
    std::snprintf(nums, sizeof(nums), "%.17g,%.17g,%.17g", mean.image_auroc,
                  mean.pixel_auroc, mean.pro);
    csv << cell.name << ",mean,,,," << (mean.n_ok > 0 ? nums : ",,") << ",ok "
        << mean.n_ok << "/" << mean.n_total << ",\n";
    csv.flush();
    result.means.push_back(std::move(mean));
  }
  return result;
}

}  // namespace hetnet::ablation
