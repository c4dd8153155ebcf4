#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sseg/trainer.hpp"

namespace sseg {

// Minimal CSV reader for the pipeline's own outputs (no quoting rules).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

TrainLog parse_train_log_csv(const std::string& text);

// Loss curves (one polyline per named log) on linear axes.
std::string render_loss_curves_svg(const std::vector<std::pair<std::string, TrainLog>>& curves);

// Monospace grid rendering of tabular rows (first row = header).
std::string render_table_svg(const std::vector<std::vector<std::string>>& rows,
                             const std::string& title);

// Scans run_dir for train_log*.csv, crossval.csv and metrics*.csv and emits
// SVGs into out_dir; returns the files written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& run_dir,
                                                const std::filesystem::path& out_dir);

}  // namespace sseg
