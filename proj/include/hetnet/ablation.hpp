#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetnet/config.hpp"

namespace hetnet::ablation {

struct Cell {
  std::string name;
  std::vector<std::string> overrides;  // "key=value" applied over the base
};

struct Grid {
  std::vector<Cell> cells;
  int seeds_per_cell = 3;
};

// Seven cells: the six structure/fusion/noise rows (single-teacher CNN,
// single-teacher attention, heterogeneous bare, +ALGF, +LMGN, full) plus a
// standard-normal noise variant of the full model. The noise-type
// comparison rows are hte_algf (none), full_randn (standard normal), and
// full (multivariate Gaussian).
Grid default_grid();

// JSON grid file: {"seeds_per_cell": N, "cells": [{"name": ...,
// "overrides": ["key=value", ...]}, ...]}.
Grid load_grid(const std::string& path);

struct Row {
  std::string cell;
  int64_t seed = 0;
  std::string teacher_structure;
  bool algf = false;
  std::string noise_type;
  bool ok = false;
  std::string error;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double pro = 0.0;
};

struct CellMean {
  std::string cell;
  int n_ok = 0;
  int n_total = 0;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double pro = 0.0;
};

struct GridResult {
  std::vector<Row> rows;     // one per (cell, seed)
  std::vector<CellMean> means;  // one per cell, over its succeeded seeds
  std::string csv_path;
};

// Trains and evaluates every (cell, seed) sequentially, appending each row
// to <out_dir>/ablation.csv as it lands. Seed i of every cell runs with
// base seed + i, so cells are independent and reorderable. A failing cell
// is recorded with its error and the grid carries on. Noise statistics are
// fitted lazily and cached per local-teacher backbone.
GridResult run_grid(const ExperimentConfig& base, const Grid& grid,
                    const std::string& out_dir);

}  // namespace hetnet::ablation
