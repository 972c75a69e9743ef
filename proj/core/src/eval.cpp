#include "thermograph/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "thermograph/numeric_text.hpp"

namespace thermograph {

using nlohmann::json;

namespace {

struct TopStats {
  double mse{0};
  double var{0};
  std::size_t n{0};
};

TopStats top_stats(std::span<const double> pred, std::span<const double> obs,
                   std::span<const std::uint8_t> mask) {
  if (pred.size() != obs.size() || pred.size() != mask.size()) {
    throw Error("metric: dimension mismatch");
  }
  TopStats s;
  double mean = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    mean += obs[i];
    ++s.n;
  }
  if (s.n == 0) throw Error("no observable vertices");
  mean /= static_cast<double>(s.n);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    s.mse += (pred[i] - obs[i]) * (pred[i] - obs[i]);
    s.var += (obs[i] - mean) * (obs[i] - mean);
  }
  s.mse /= static_cast<double>(s.n);
  s.var /= static_cast<double>(s.n);
  return s;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string json_array(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s + "]";
}

}  // namespace

double relative_error(std::span<const double> pred, std::span<const double> obs,
                      std::span<const std::uint8_t> mask) {
  const TopStats s = top_stats(pred, obs, mask);
  if (s.var == 0) throw Error("constant observation field");
  return std::sqrt(s.mse) / s.var;
}

double nrmse(std::span<const double> pred, std::span<const double> obs,
             std::span<const std::uint8_t> mask) {
  const TopStats s = top_stats(pred, obs, mask);
  if (s.var == 0) throw Error("constant observation field");
  return std::sqrt(s.mse) / std::sqrt(s.var);
}

std::vector<double> absolute_error(std::span<const double> pred, std::span<const double> obs,
                                   std::span<const std::uint8_t> mask) {
  std::vector<double> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(std::abs(pred[i] - obs[i]));
  }
  return out;
}

EvalReport evaluate(const Prediction& pred) {
  EvalReport rep;
  TermArray raw_sum{};
  for (const auto& lp : pred.layers) {
    std::vector<double> er, nr;
    for (std::size_t f = 1; f < lp.states.size(); ++f) {
      rep.max_temperature.push_back(*std::max_element(lp.states[f].begin(), lp.states[f].end()));
      const TopStats s = top_stats(lp.states[f], lp.obs[f], lp.observed);
      if (s.var == 0) {
        ++rep.skipped_timepoints;
        continue;
      }
      er.push_back(std::sqrt(s.mse) / s.var);
      nr.push_back(std::sqrt(s.mse) / std::sqrt(s.var));
      rep.timepoint_layer.push_back(lp.layer);
      rep.abs_error = absolute_error(lp.states[f], lp.obs[f], lp.observed);
    }
    rep.eps_r.insert(rep.eps_r.end(), er.begin(), er.end());
    rep.nrmse.insert(rep.nrmse.end(), nr.begin(), nr.end());
    if (!er.empty()) {
      rep.layer_mean_eps_r.push_back(mean_of(er));
      rep.layer_mean_nrmse.push_back(mean_of(nr));
    }
    std::vector<double> comp;
    for (const auto& ph : lp.physics) comp.push_back(ph.composite());
    if (!comp.empty()) rep.layer_energy_metric.push_back(mean_of(comp));
    for (int t = 0; t < kNumLossTerms; ++t) raw_sum[t] += lp.raw[t];
  }
  rep.mean_eps_r_timepoints = mean_of(rep.eps_r);
  rep.mean_eps_r_layers = mean_of(rep.layer_mean_eps_r);
  rep.mean_nrmse_timepoints = mean_of(rep.nrmse);
  rep.mean_nrmse_layers = mean_of(rep.layer_mean_nrmse);
  rep.mean_energy_metric = mean_of(rep.layer_energy_metric);
  rep.mean_data_loss = pred.mean_data_loss;
  if (!pred.layers.empty()) {
    for (int t = 0; t < kNumLossTerms; ++t) {
      rep.mean_raw[t] = raw_sum[t] / static_cast<double>(pred.layers.size());
    }
  }
  return rep;
}

std::string EvalReport::to_json() const {
  std::ostringstream o;
  o << "{\n";
  o << "  \"eps_r\": " << json_array(eps_r) << ",\n";
  o << "  \"mean_eps_r_timepoints\": " << format_double(mean_eps_r_timepoints) << ",\n";
  o << "  \"mean_eps_r_layers\": " << format_double(mean_eps_r_layers) << ",\n";
  o << "  \"nrmse\": " << json_array(nrmse) << ",\n";
  o << "  \"mean_nrmse_timepoints\": " << format_double(mean_nrmse_timepoints) << ",\n";
  o << "  \"mean_nrmse_layers\": " << format_double(mean_nrmse_layers) << ",\n";
  o << "  \"timepoint_layer\": [";
  for (std::size_t i = 0; i < timepoint_layer.size(); ++i) o << (i ? ", " : "") << timepoint_layer[i];
  o << "],\n";
  o << "  \"layer_energy_metric\": " << json_array(layer_energy_metric) << ",\n";
  o << "  \"mean_energy_metric\": " << format_double(mean_energy_metric) << ",\n";
  o << "  \"abs_error_last_timepoint\": " << json_array(abs_error) << ",\n";
  o << "  \"max_temperature\": " << json_array(max_temperature) << ",\n";
  o << "  \"mean_data_loss\": " << format_double(mean_data_loss) << ",\n";
  o << "  \"mean_losses\": {";
  for (int t = 0; t < kNumLossTerms; ++t) {
    o << (t ? ", " : "") << "\"" << to_string(static_cast<LossTerm>(t))
      << "\": " << format_double(mean_raw[t]);
  }
  o << "},\n";
  o << "  \"skipped_timepoints\": " << skipped_timepoints << ",\n";
  o << "  \"timings_s\": {";
  bool first = true;
  for (const auto& [k, v] : timings_s) {
    o << (first ? "" : ", ") << json(k).dump() << ": " << format_double(v);
    first = false;
  }
  o << "}\n}\n";
  return o.str();
}

std::vector<AblationRow> run_ablation(const ThermalSequence& seq,
                                      const std::vector<LayeredGraph>& graphs,
                                      const TrainConfig& base, std::span<const AblationCell> cells) {
  std::vector<AblationRow> rows;
  for (const auto& cell : cells) {
    TrainConfig cfg = base;
    cfg.weights = LossWeights::preset(cell.subset, cell.preset);
    cfg.checkpoint_path.reset();
    cfg.history_path.reset();
    const TrainResult tr = train_curriculum(seq, graphs, cfg);
    const Prediction pred = predict_sequence(tr.checkpoint.model, seq, graphs, cfg.rollout);
    const EvalReport ev = evaluate(pred);
    AblationRow row;
    row.cell = cell;
    row.data = ev.mean_data_loss;
    row.phi = ev.mean_raw[static_cast<int>(LossTerm::phi)];
    row.psi = ev.mean_raw[static_cast<int>(LossTerm::psi)];
    row.energy = ev.mean_raw[static_cast<int>(LossTerm::energy)];
    row.iterations = tr.total_iterations;
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream o;
  // Values print round-trip exact, so columns are sized for 17 significant digits.
  o << std::left << std::setw(16) << "regularization" << std::setw(8) << "weight" << std::setw(26)
    << "L_data" << std::setw(26) << "L_phi" << std::setw(26) << "L_psi" << "L_energy\n";
  for (const auto& r : rows) {
    o << std::left << std::setw(16) << to_string(r.cell.subset) << std::setw(8)
      << to_string(r.cell.preset) << std::setw(26) << format_double(r.data) << std::setw(26)
      << format_double(r.phi) << std::setw(26) << format_double(r.psi) << format_double(r.energy)
      << '\n';
  }
  return o.str();
}

std::vector<SchemeRow> run_scheme_comparison(const ThermalSequence& seq,
                                             const std::vector<LayeredGraph>& graphs,
                                             const TrainConfig& base) {
  std::vector<SchemeRow> rows;
  for (Scheme s : {Scheme::explicit_euler, Scheme::crank_nicolson}) {
    TrainConfig cfg = base;
    cfg.rollout.step.scheme = s;
    cfg.checkpoint_path.reset();
    cfg.history_path.reset();
    const TrainResult tr = train_curriculum(seq, graphs, cfg);
    const EvalReport ev = evaluate(predict_sequence(tr.checkpoint.model, seq, graphs, cfg.rollout));
    rows.push_back({s, ev.mean_eps_r_layers, ev.mean_nrmse_layers, ev.mean_energy_metric,
                    tr.total_iterations});
  }
  return rows;
}

std::string scheme_table(std::span<const SchemeRow> rows) {
  std::ostringstream o;
  o << std::left << std::setw(8) << "scheme" << std::setw(26) << "mean_eps_r" << std::setw(26)
    << "mean_nrmse" << "mean_energy_metric\n";
  for (const auto& r : rows) {
    o << std::left << std::setw(8) << to_string(r.scheme) << std::setw(26)
      << format_double(r.mean_eps_r) << std::setw(26) << format_double(r.mean_nrmse)
      << format_double(r.mean_energy_metric) << '\n';
  }
  return o.str();
}

void apply_train_json(const std::string& text, TrainConfig& cfg) {
  json j;
  try {
    j = json::parse(text);
    cfg.budget = j.value("budget", cfg.budget);
    cfg.window = j.value("window", cfg.window);
    cfg.stage_tolerance = j.value("stage_tolerance", cfg.stage_tolerance);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.material = j.value("material", cfg.material);
    cfg.adam.lr = j.value("lr", cfg.adam.lr);
    cfg.rollout.step.substeps = j.value("substeps", cfg.rollout.step.substeps);
    cfg.rollout.step.cg_tol = j.value("cg_tol", cfg.rollout.step.cg_tol);
    if (j.contains("scheme")) cfg.rollout.step.scheme = scheme_from_string(j["scheme"].get<std::string>());
    if (j.contains("phi_form")) {
      const auto f = j["phi_form"].get<std::string>();
      if (f == "direct") cfg.rollout.phi_form = PhiLossForm::direct;
      else if (f == "log_derivative") cfg.rollout.phi_form = PhiLossForm::log_derivative;
      else throw Error("unknown phi_form '" + f + "'");
    }
    if (j.contains("reg") || j.contains("weights")) {
      cfg.weights = LossWeights::preset(reg_subset_from_string(j.value("reg", std::string("all"))),
                                        weight_preset_from_string(j.value("weights", std::string("normal"))));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
  if (cfg.rollout.step.substeps < 1) throw Error("train config: substeps must be >= 1");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  ExperimentConfig ec;
  json j;
  try {
    j = json::parse(text);
    if (j.contains("synth")) ec.synth = SynthConfig::from_json_text(j["synth"].dump());
    if (j.contains("graph")) {
      const auto& g = j["graph"];
      ec.graph.prune_target = g.value("prune_target", ec.graph.prune_target);
      ec.graph.top_k = g.value("top_k", ec.graph.top_k);
      if (g.contains("alpha") && g["alpha"].is_number()) ec.graph.alpha = g["alpha"].get<double>();
    }
    if (j.contains("train")) apply_train_json(j["train"].dump(), ec.train);
    if (j.contains("cells")) {
      for (const auto& c : j["cells"]) {
        ec.cells.push_back({reg_subset_from_string(c.at(0).get<std::string>()),
                            weight_preset_from_string(c.at(1).get<std::string>())});
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment config: ") + e.what());
  }
  return ec;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open experiment config");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace thermograph
