#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "thermograph/checkpoint.hpp"
#include "thermograph/eval.hpp"
#include "thermograph/export.hpp"
#include "thermograph/graph.hpp"
#include "thermograph/ingest.hpp"
#include "thermograph/runtime.hpp"
#include "thermograph/synth.hpp"
#include "thermograph/trainer.hpp"

namespace fs = std::filesystem;
using namespace thermograph;

namespace {

struct GraphOpts {
  std::size_t prune_target{GraphBuildParams{}.prune_target};
  int top_k{GraphBuildParams{}.top_k};
  std::string alpha{"auto"};

  GraphBuildParams params() const {
    GraphBuildParams p;
    p.prune_target = prune_target;
    p.top_k = top_k;
    if (alpha != "auto") {
      try {
        p.alpha = std::stod(alpha);
      } catch (const std::exception&) {
        throw Error("--alpha expects a length in mm or 'auto'");
      }
      if (!(*p.alpha > 0)) throw Error("--alpha must be positive");
    }
    return p;
  }
};

struct TrainOpts {
  std::string scheme{"cn"};
  std::string reg{"all"};
  std::string weights{"normal"};
  std::uint64_t seed{0};
  std::size_t budget{TrainConfig{}.budget};
  double lr{AdamConfig{}.lr};
  int window{TrainConfig{}.window};
  int substeps{StepConfig{}.substeps};
  double stage_tolerance{TrainConfig{}.stage_tolerance};
  std::string phi_form{"direct"};
  std::string history;
  bool resume{false};

  void add(CLI::App* app) {
    app->add_option("--scheme", scheme, "euler|backward|cn")->capture_default_str();
    app->add_option("--reg", reg, "all|math|phys|none")->capture_default_str();
    app->add_option("--weights", weights, "high|normal|low")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--budget", budget, "total iteration budget")->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
    app->add_option("--window", window, "intervals per training rollout")->capture_default_str();
    app->add_option("--substeps", substeps)->capture_default_str();
    app->add_option("--stage-tolerance", stage_tolerance)->capture_default_str();
    app->add_option("--phi-form", phi_form, "direct|log_derivative")->capture_default_str();
    app->add_option("--history", history, "metric history file (one JSON line per iteration)");
    app->add_flag("--resume", resume, "continue from the .resume file next to --out");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.rollout.step.scheme = scheme_from_string(scheme);
    c.rollout.step.substeps = substeps;
    if (phi_form == "direct") c.rollout.phi_form = PhiLossForm::direct;
    else if (phi_form == "log_derivative") c.rollout.phi_form = PhiLossForm::log_derivative;
    else throw Error("unknown --phi-form '" + phi_form + "'");
    c.weights = LossWeights::preset(reg_subset_from_string(reg), weight_preset_from_string(weights));
    c.seed = seed;
    c.budget = budget;
    c.adam.lr = lr;
    c.window = window;
    c.stage_tolerance = stage_tolerance;
    if (!history.empty()) c.history_path = history;
    c.resume = resume;
    return c;
  }
};

template <class F>
double median_seconds(int runs, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < runs; ++r) {
    const auto a = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::vector<LayeredGraph> graphs_for(const ThermalSequence& seq, const std::string& graphs_dir,
                                     const GraphOpts& g) {
  if (!graphs_dir.empty()) return read_graph_sequence(graphs_dir);
  return build_graph_sequence(seq, g.params());
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error(p.string() + ": cannot open for writing");
  out << text;
}

RolloutConfig rollout_of(const Checkpoint& c) {
  RolloutConfig r;
  r.step.scheme = c.scheme;
  r.step.substeps = c.substeps;
  return r;
}

void print_stages(const TrainResult& tr) {
  for (const auto& s : tr.stages) {
    std::cout << "stage layer " << s.layer << ": " << s.iterations << " iterations, "
              << (s.converged ? "converged" : "budget exhausted") << '\n';
  }
  for (const auto& w : tr.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "total iterations " << tr.total_iterations << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermograph: layer-wise thermal surrogate on graphs"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic pyramid build");
  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "JSON config (defaults when omitted)");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", synth_seed);

  // build-graph
  auto* bg = app.add_subcommand("build-graph", "build the per-layer graph sequence from frames");
  std::string bg_frames, bg_out;
  GraphOpts bg_opts;
  bg->add_option("--frames", bg_frames, "frame directory or manifest")->required();
  bg->add_option("--out", bg_out)->required();
  bg->add_option("--prune-target", bg_opts.prune_target)->capture_default_str();
  bg->add_option("--top-k", bg_opts.top_k)->capture_default_str();
  bg->add_option("--alpha", bg_opts.alpha, "mm or auto")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "curriculum training");
  std::string tr_graphs, tr_frames, tr_out;
  TrainOpts tr_opts;
  train->add_option("--graphs", tr_graphs)->required();
  train->add_option("--frames", tr_frames)->required();
  train->add_option("--out", tr_out, "checkpoint path")->required();
  tr_opts.add(train);

  // transfer
  auto* tf = app.add_subcommand("transfer", "apply a trained checkpoint to a new build");
  std::string tf_base, tf_frames, tf_out, tf_mode{"inference"}, tf_graphs, tf_states;
  GraphOpts tf_gopts;
  TrainOpts tf_opts;
  tf->add_option("--base", tf_base)->required();
  tf->add_option("--frames", tf_frames)->required();
  tf->add_option("--mode", tf_mode, "inference|finetune")->capture_default_str();
  tf->add_option("--out", tf_out, "checkpoint (finetune) or state directory (inference)")->required();
  tf->add_option("--graphs", tf_graphs, "prebuilt graph directory");
  tf->add_option("--states", tf_states, "also write predicted states here (finetune)");
  tf->add_option("--prune-target", tf_gopts.prune_target)->capture_default_str();
  tf->add_option("--top-k", tf_gopts.top_k)->capture_default_str();
  tf_opts.add(tf);

  // eval
  auto* ev = app.add_subcommand("eval", "free-running evaluation of a checkpoint");
  std::string ev_model, ev_frames, ev_report, ev_graphs, ev_states;
  GraphOpts ev_gopts;
  int ev_runs = 3;
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--frames", ev_frames)->required();
  ev->add_option("--report", ev_report)->required();
  ev->add_option("--graphs", ev_graphs, "prebuilt graph directory");
  ev->add_option("--states", ev_states, "write predicted states here");
  ev->add_option("--prune-target", ev_gopts.prune_target)->capture_default_str();
  ev->add_option("--top-k", ev_gopts.top_k)->capture_default_str();
  ev->add_option("--timing-runs", ev_runs)->capture_default_str()->check(CLI::PositiveNumber);

  // ablation / compare-schemes
  auto* ab = app.add_subcommand("ablation", "regularization ablation grid");
  std::string ab_config, ab_out;
  ab->add_option("--config", ab_config)->required();
  ab->add_option("--out", ab_out)->required();
  auto* cs = app.add_subcommand("compare-schemes", "Euler versus Crank-Nicolson");
  std::string cs_config, cs_out;
  cs->add_option("--config", cs_config)->required();
  cs->add_option("--out", cs_out)->required();

  // export
  auto* ex = app.add_subcommand("export", "export predicted states");
  std::string ex_states, ex_format, ex_out;
  ex->add_option("--states", ex_states)->required();
  ex->add_option("--format", ex_format, "csv|vtk|json-plot")->required();
  ex->add_option("--out", ex_out, "output directory (default <states>/export)");

  CLI11_PARSE(app, argc, argv);
  retain_heap_memory();

  try {
    if (*synth) {
      SynthConfig cfg = synth_config.empty() ? SynthConfig{} : SynthConfig::from_json_file(synth_config);
      if (synth_seed) cfg.seed = *synth_seed;
      const SynthResult r = generate_synthetic(cfg);
      const fs::path manifest = save_sequence(r.sequence, synth_out);
      write_text(fs::path(synth_out) / "synth_config.json", cfg.to_json());
      std::cout << "wrote " << r.sequence.frames.size() << " frames, manifest " << manifest.string()
                << '\n';
    } else if (*bg) {
      const auto seq = load_sequence(resolve_manifest(bg_frames));
      const auto graphs = build_graph_sequence(seq, bg_opts.params());
      write_graph_sequence(graphs, bg_out);
      std::cout << "wrote " << graphs.size() << " graphs; top graph has "
                << graphs.back().vertices.size() << " vertices, " << graphs.back().edges.size()
                << " edges\n";
    } else if (*train) {
      const auto seq = load_sequence(resolve_manifest(tr_frames));
      const auto graphs = read_graph_sequence(tr_graphs);
      TrainConfig cfg = tr_opts.config();
      cfg.checkpoint_path = tr_out;
      const TrainResult tr = train_curriculum(seq, graphs, cfg);
      save_checkpoint(tr.checkpoint, tr_out);
      if (cfg.history_path) {
        std::cout << "history " << cfg.history_path->string() << '\n';
      }
      print_stages(tr);
    } else if (*tf) {
      const Checkpoint base = load_checkpoint(tf_base);
      const auto seq = load_sequence(resolve_manifest(tf_frames));
      const auto graphs = graphs_for(seq, tf_graphs, tf_gopts);
      const TransferMode mode = transfer_mode_from_string(tf_mode);
      TrainConfig cfg = tf_opts.config();
      if (mode == TransferMode::inference) {
        cfg.budget = 0;
        cfg.rollout = rollout_of(base);
      } else {
        cfg.checkpoint_path = tf_out;
      }
      const TransferResult r = transfer(base, seq, graphs, mode, cfg);
      const EvalReport rep = evaluate(r.prediction);
      if (mode == TransferMode::finetune && r.training) {
        save_checkpoint(r.training->checkpoint, tf_out);
        print_stages(*r.training);
        if (!tf_states.empty()) write_state_set(state_set_from_prediction(r.prediction, seq), tf_states);
      } else {
        write_state_set(state_set_from_prediction(r.prediction, seq), tf_out);
        write_text(fs::path(tf_out) / "report.json", rep.to_json());
      }
      std::cout << "training iterations " << r.iterations << "\nmean eps_r " << rep.mean_eps_r_layers
                << "\nmean nrmse " << rep.mean_nrmse_layers << '\n';
    } else if (*ev) {
      const Checkpoint ckpt = load_checkpoint(ev_model);
      const auto seq = load_sequence(resolve_manifest(ev_frames));
      std::vector<LayeredGraph> graphs;
      const double t_graph = median_seconds(ev_runs, [&] { graphs = graphs_for(seq, ev_graphs, ev_gopts); });
      const RolloutConfig rc = rollout_of(ckpt);
      Prediction pred;
      const double t_inf = median_seconds(ev_runs, [&] { pred = predict_sequence(ckpt.model, seq, graphs, rc); });
      EvalReport rep = evaluate(pred);
      rep.timings_s[ev_graphs.empty() ? "graph_build" : "graph_load"] = t_graph;
      rep.timings_s["inference"] = t_inf;
      write_text(ev_report, rep.to_json());
      if (!ev_states.empty()) write_state_set(state_set_from_prediction(pred, seq), ev_states);
      std::cout << "mean eps_r (layers) " << rep.mean_eps_r_layers << "\nmean nrmse (layers) "
                << rep.mean_nrmse_layers << "\nmean energy metric " << rep.mean_energy_metric << '\n';
    } else if (*ab || *cs) {
      const std::string& config = *ab ? ab_config : cs_config;
      const fs::path out = *ab ? ab_out : cs_out;
      const ExperimentConfig ec = ExperimentConfig::from_json_file(config);
      const SynthResult data = generate_synthetic(ec.synth);
      const auto graphs = build_graph_sequence(data.sequence, ec.graph);
      fs::create_directories(out);
      std::string table;
      if (*ab) {
        std::vector<AblationCell> cells = ec.cells;
        if (cells.empty()) cells.push_back({});
        table = ablation_table(run_ablation(data.sequence, graphs, ec.train, cells));
        write_text(out / "ablation.txt", table);
      } else {
        table = scheme_table(run_scheme_comparison(data.sequence, graphs, ec.train));
        write_text(out / "schemes.txt", table);
      }
      std::cout << table;
    } else if (*ex) {
      const StateSet set = read_state_set(ex_states);
      const fs::path out = ex_out.empty() ? fs::path(ex_states) / "export" : fs::path(ex_out);
      const auto files = export_states(set, export_format_from_string(ex_format), out);
      std::cout << "wrote " << files.size() << " files to " << out.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
