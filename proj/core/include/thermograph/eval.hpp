#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "thermograph/synth.hpp"
#include "thermograph/trainer.hpp"

namespace thermograph {

/// sqrt(mean_top (pred - obs)^2) / mean_top (obs - mean obs)^2, as printed
/// (RMS numerator over a mean-square denominator).
/// Throws Error("constant observation field") when the denominator is 0.
double relative_error(std::span<const double> pred, std::span<const double> obs,
                      std::span<const std::uint8_t> mask);

/// Dimensionless variant: RMS error over the RMS deviation of the data.
double nrmse(std::span<const double> pred, std::span<const double> obs,
             std::span<const std::uint8_t> mask);

/// |pred - obs| for each observed vertex, in vertex order.
std::vector<double> absolute_error(std::span<const double> pred, std::span<const double> obs,
                                   std::span<const std::uint8_t> mask);

struct EvalReport {
  std::vector<double> eps_r;  // per predicted timepoint
  std::vector<double> nrmse;
  std::vector<int> timepoint_layer;
  std::vector<double> layer_mean_eps_r;
  std::vector<double> layer_mean_nrmse;
  std::vector<double> layer_energy_metric;  // mean composite per micro-step
  double mean_eps_r_timepoints{0};
  double mean_eps_r_layers{0};
  double mean_nrmse_timepoints{0};
  double mean_nrmse_layers{0};
  double mean_energy_metric{0};
  std::vector<double> abs_error;  // last timepoint
  std::vector<double> max_temperature;  // per predicted state
  double mean_data_loss{0};
  TermArray mean_raw{};
  std::size_t skipped_timepoints{0};  // constant observation fields
  std::map<std::string, double> timings_s;

  std::string to_json() const;
};

EvalReport evaluate(const Prediction& pred);

struct AblationCell {
  RegSubset subset{RegSubset::all};
  WeightPreset preset{WeightPreset::normal};
};

struct AblationRow {
  AblationCell cell;
  double data{0};
  double phi{0};
  double psi{0};
  double energy{0};
  std::size_t iterations{0};
};

/// One model per cell, identical seed and budget; losses from a free-running
/// evaluation pass over the training sequence.
std::vector<AblationRow> run_ablation(const ThermalSequence& seq,
                                      const std::vector<LayeredGraph>& graphs,
                                      const TrainConfig& base, std::span<const AblationCell> cells);
std::string ablation_table(std::span<const AblationRow> rows);

struct SchemeRow {
  Scheme scheme{Scheme::crank_nicolson};
  double mean_eps_r{0};
  double mean_nrmse{0};
  double mean_energy_metric{0};
  std::size_t iterations{0};
};

std::vector<SchemeRow> run_scheme_comparison(const ThermalSequence& seq,
                                             const std::vector<LayeredGraph>& graphs,
                                             const TrainConfig& base);
std::string scheme_table(std::span<const SchemeRow> rows);

/// JSON experiment file used by the ablation and scheme-comparison commands:
/// {"synth": {...}, "graph": {...}, "train": {...}, "cells": [["all", "high"], ...]}.
struct ExperimentConfig {
  SynthConfig synth;
  GraphBuildParams graph;
  TrainConfig train;
  std::vector<AblationCell> cells;

  static ExperimentConfig from_json_file(const std::filesystem::path& path);
  static ExperimentConfig from_json_text(const std::string& text);
};

/// Parses the "train" object of an experiment file into `cfg`.
void apply_train_json(const std::string& json_object_text, TrainConfig& cfg);

}  // namespace thermograph
