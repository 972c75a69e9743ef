#include "thermograph/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "thermograph/numeric_text.hpp"

namespace thermograph {

namespace fs = std::filesystem;

std::vector<Interval> StagePlan::window(std::size_t first, std::size_t count) const {
  std::vector<Interval> out;
  for (std::size_t k = first; k < first + count && k < intervals(); ++k) {
    out.push_back({obs[k + 1], laser[k]});
  }
  return out;
}

std::vector<double> StagePlan::overwrite(std::span<const double> T, std::size_t f) const {
  std::vector<double> out(T.begin(), T.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (ctx.observed[i]) out[i] = obs[f][i];
  }
  return out;
}

std::vector<double> observe(const LayeredGraph& graph, const ThermalFrame& frame,
                            const SequenceManifest& manifest) {
  std::vector<double> out(graph.num_vertices(), 0.0);
  for (std::size_t i = 0; i < graph.num_vertices(); ++i) {
    if (graph.vertices[i].layer != graph.max_layer()) continue;
    const auto px = pixel_of(graph.vertices[i].position, manifest.pixel_pitch_mm);
    if (px.col < 0 || px.row < 0 || static_cast<std::size_t>(px.col) >= frame.width ||
        static_cast<std::size_t>(px.row) >= frame.height) {
      throw Error("observe: vertex outside the frame");
    }
    out[i] = frame.at(static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col));
  }
  return out;
}

std::vector<StagePlan> plan_stages(const ThermalSequence& seq, const std::vector<LayeredGraph>& graphs,
                                   const Normalization& norm) {
  if (static_cast<int>(graphs.size()) != seq.max_layer() + 1) {
    throw Error("plan_stages: need one graph per layer (" + std::to_string(seq.max_layer() + 1) +
                "), got " + std::to_string(graphs.size()));
  }
  std::vector<StagePlan> plans;
  for (int n = 1; n <= seq.max_layer(); ++n) {
    StagePlan p;
    p.layer = n;
    p.ctx = GraphContext::build(graphs[n], norm);
    const auto idx = seq.frames_of_layer(n);
    if (idx.empty()) throw Error("plan_stages: layer " + std::to_string(n) + " has no frames");
    for (std::size_t f : idx) {
      p.obs.push_back(observe(graphs[n], seq.frames[f], seq.manifest));
      p.frame_times.push_back(seq.frames[f].time_s);
    }
    for (std::size_t k = 1; k < idx.size(); ++k) {
      p.laser.push_back(laser_center_mm(seq.frames[idx[k - 1]], seq.frames[idx[k]], seq.manifest));
    }
    if (n < seq.max_layer()) {
      const auto next = seq.frames_of_layer(n + 1);
      const double gap = seq.frames[next.front()].time_s - seq.frames[idx.back()].time_s;
      p.gap_intervals = static_cast<int>(std::lround(gap * seq.manifest.frame_rate_hz));
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

std::vector<double> initial_state(const ThermalSequence& seq, const StagePlan& first) {
  const auto& g = first.ctx.graph;
  const auto layer0 = seq.frames_of_layer(0);
  if (layer0.empty()) throw Error("initial_state: no layer-0 frames");
  const auto& f0 = seq.frames[layer0.back()];
  std::vector<double> T(g.num_vertices(), 0.0);
  for (std::size_t i = 0; i < g.num_vertices(); ++i) {
    const auto px = pixel_of(g.vertices[i].position, seq.manifest.pixel_pitch_mm);
    T[i] = f0.at(static_cast<std::size_t>(px.row), static_cast<std::size_t>(px.col));
  }
  return first.overwrite(T, 0);
}

std::vector<double> hand_off(const LayeredGraph& from, std::span<const double> T,
                             const LayeredGraph& to) {
  std::map<std::tuple<double, double, double>, double> by_pos;
  for (std::size_t i = 0; i < from.num_vertices(); ++i) {
    const auto& p = from.vertices[i].position;
    by_pos[{p.x, p.y, p.z}] = T[i];
  }
  std::vector<double> out(to.num_vertices(), 0.0);
  for (std::size_t i = 0; i < to.num_vertices(); ++i) {
    const auto& p = to.vertices[i].position;
    auto it = by_pos.find({p.x, p.y, p.z});
    if (it != by_pos.end()) {
      out[i] = it->second;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < from.num_vertices(); ++j) {
      const double d = distance(p, from.vertices[j].position);
      if (d < best) {
        best = d;
        out[i] = T[j];
      }
    }
  }
  return out;
}

std::vector<double> run_gap(const StagePlan& stage, const Model& model, std::span<const double> T,
                            const RolloutConfig& cfg) {
  if (stage.gap_intervals <= 0) return {T.begin(), T.end()};
  std::vector<Interval> gap(static_cast<std::size_t>(stage.gap_intervals));
  const auto r = rollout(stage.ctx, model, T, gap, cfg);
  return r.states.back();
}

Normalization default_normalization(const LayeredGraph& reference) {
  Normalization n = Normalization::from_graph(reference);
  n.c_scale = 1.0 / (n.rho_ref * n.rho_ref);
  return n;
}

LaserParams estimate_laser(const ThermalSequence& seq, const Normalization& norm, int substeps) {
  std::vector<double> rises;
  for (int n = 1; n <= seq.max_layer(); ++n) {
    const auto idx = seq.frames_of_layer(n);
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const auto& prev = seq.frames[idx[k - 1]];
      const auto& cur = seq.frames[idx[k]];
      if (!detect_laser(cur, seq.manifest.threshold_K)) continue;
      const auto it = std::max_element(cur.values.begin(), cur.values.end());
      const auto pos = static_cast<std::size_t>(it - cur.values.begin());
      rises.push_back(std::max(0.0, *it - prev.values[pos]));
    }
  }
  double I = 0;
  if (!rises.empty()) {
    std::nth_element(rises.begin(), rises.begin() + rises.size() / 2, rises.end());
    I = rises[rises.size() / 2] / substeps;
  }
  LaserParams p;
  p.i_raw = I / kLaserIntensityScale;
  (void)norm;
  return p;
}

namespace {

TermArray mean_raw_over_windows(const StagePlan& plan, const Model& model,
                                const std::vector<std::vector<double>>& H, int window,
                                const RolloutConfig& cfg) {
  TermArray acc{};
  const std::size_t K = plan.intervals();
  for (std::size_t s = 0; s < K; ++s) {
    const auto T0 = plan.overwrite(H[s], s);
    const auto iv = plan.window(s, static_cast<std::size_t>(window));
    const auto r = rollout(plan.ctx, model, T0, iv, cfg);
    for (int t = 0; t < kNumLossTerms; ++t) acc[t] += r.raw[t];
  }
  for (auto& v : acc) v /= static_cast<double>(std::max<std::size_t>(K, 1));
  return acc;
}

// Teacher-forced trajectory: H[f+1] is one interval from overwrite(H[f], f).
void refresh_trajectory(const StagePlan& plan, const Model& model, std::vector<std::vector<double>>& H,
                        const RolloutConfig& cfg) {
  for (std::size_t f = 0; f < plan.intervals(); ++f) {
    const auto r = rollout(plan.ctx, model, plan.overwrite(H[f], f), plan.window(f, 1), cfg);
    H[f + 1] = r.states.back();
  }
}

void write_resume(const fs::path& path, int stage_done, std::size_t iterations,
                  const std::vector<double>& hidden, const AdamState& adam) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot write resume file");
  out << "stage " << stage_done << "\niterations " << iterations << "\nadam_t " << adam.t << '\n';
  auto vec = [&](const char* name, const std::vector<double>& v) {
    out << name << ' ' << v.size();
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  };
  vec("hidden", hidden);
  vec("adam_m", adam.m);
  vec("adam_v", adam.v);
}

struct ResumeData {
  int stage_done{0};
  std::size_t iterations{0};
  std::vector<double> hidden;
  std::uint64_t adam_t{0};
  std::vector<double> m, v;
};

ResumeData read_resume(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open resume file");
  ResumeData r;
  std::string key;
  auto vec = [&](std::vector<double>& v) {
    std::size_t n = 0;
    in >> n;
    v.resize(n);
    for (auto& x : v) {
      std::string tok;
      in >> tok;
      x = parse_double(tok);
    }
  };
  while (in >> key) {
    if (key == "stage") in >> r.stage_done;
    else if (key == "iterations") in >> r.iterations;
    else if (key == "adam_t") in >> r.adam_t;
    else if (key == "hidden") vec(r.hidden);
    else if (key == "adam_m") vec(r.m);
    else if (key == "adam_v") vec(r.v);
    else throw FormatError(path.string() + ": unknown key '" + key + "'");
  }
  return r;
}

}  // namespace

TrainResult train_curriculum(const ThermalSequence& seq, const std::vector<LayeredGraph>& graphs,
                             const TrainConfig& cfg, const std::optional<Model>& init) {
  if (graphs.size() < 2) throw Error("train_curriculum: need at least two layers");
  if (cfg.window < 1) throw Error("train_curriculum: window must be >= 1");
  RolloutConfig rcfg = cfg.rollout;
  rcfg.step.delta_t = 1.0 / seq.manifest.frame_rate_hz;

  Model model;
  if (init) {
    model = *init;
  } else {
    model.norm = default_normalization(graphs[1]);
    model.nets = SubModels::xavier(cfg.seed);
    model.laser = estimate_laser(seq, model.norm, rcfg.step.substeps);
  }
  const auto plans = plan_stages(seq, graphs, model.norm);
  const std::size_t cap = std::max<std::size_t>(cfg.budget / plans.size(), 0);

  TrainResult result;
  AdamState adam = AdamState::init(model.num_params(), cfg.adam);
  std::vector<double> hidden = initial_state(seq, plans.front());
  std::size_t first_stage = 0;
  std::size_t iterations = 0;

  std::optional<fs::path> resume_path;
  if (cfg.checkpoint_path) resume_path = fs::path(cfg.checkpoint_path->string() + ".resume");
  if (cfg.resume && resume_path && fs::exists(*resume_path) && fs::exists(*cfg.checkpoint_path)) {
    const Checkpoint ck = load_checkpoint(*cfg.checkpoint_path);
    const ResumeData rd = read_resume(*resume_path);
    model = ck.model;
    adam.t = rd.adam_t;
    adam.m = rd.m;
    adam.v = rd.v;
    if (adam.m.size() != model.num_params() || adam.v.size() != model.num_params()) {
      throw FormatError(resume_path->string() + ": optimizer state does not match the model");
    }
    first_stage = static_cast<std::size_t>(rd.stage_done);
    iterations = rd.iterations;
    hidden = rd.hidden;
    if (first_stage < plans.size() && hidden.size() != plans[first_stage].ctx.n()) {
      throw FormatError(resume_path->string() + ": hidden state does not match the stage graph");
    }
  }

  std::ofstream history;
  if (cfg.history_path) {
    history.open(*cfg.history_path, cfg.resume ? std::ios::app : std::ios::trunc);
    if (!history) throw FormatError(cfg.history_path->string() + ": cannot write history");
  }

  const TermArray wa = cfg.weights.as_array();
  for (std::size_t si = first_stage; si < plans.size(); ++si) {
    const StagePlan& plan = plans[si];
    const std::size_t K = plan.intervals();
    StageRecord rec;
    rec.layer = plan.layer;

    std::vector<std::vector<double>> H(K + 1);
    H[0] = plan.overwrite(hidden, 0);
    if (K > 0 && cap > 0) {
      refresh_trajectory(plan, model, H, rcfg);
      rec.snapshot = mean_raw_over_windows(plan, model, H, cfg.window, rcfg);
      const TermArray snap = floored(rec.snapshot);
      TermArray coeff{};
      for (int t = 0; t < kNumLossTerms; ++t) coeff[t] = wa[t] / snap[t];

      double cycle_sum = 0;
      std::size_t cycle_n = 0;
      for (std::size_t it = 0; it < cap; ++it) {
        const std::size_t s = it % K;
        const auto T0 = plan.overwrite(H[s], s);
        const auto iv = plan.window(s, static_cast<std::size_t>(cfg.window));
        RolloutCache cache;
        const RolloutResult r = rollout(plan.ctx, model, T0, iv, rcfg, &cache);
        const LossReport rep = make_report(r.raw, rec.snapshot, cfg.weights);
        result.max_forward_residual = std::max(result.max_forward_residual, r.max_cg_residual);
        if (r.finite && std::isfinite(rep.total)) {
          double adj = 0;
          const ModelGrads g = backward_through_rollout(plan.ctx, model, cache, iv, r, rcfg, coeff, &adj);
          result.max_adjoint_residual = std::max(result.max_adjoint_residual, adj);
          std::vector<double> flat = model.flatten();
          const std::vector<double> gf = g.flatten();
          if (std::all_of(gf.begin(), gf.end(), [](double v) { return std::isfinite(v); })) {
            adam_update(adam, flat, gf);
            model.unflatten(flat);
          } else {
            result.warnings.push_back("stage " + std::to_string(plan.layer) + " iteration " +
                                      std::to_string(it) + ": non-finite gradient, update skipped");
          }
        } else {
          result.warnings.push_back("stage " + std::to_string(plan.layer) + " iteration " +
                                    std::to_string(it) + ": non-finite rollout, update skipped");
        }
        H[s + 1] = r.states.front();
        ++iterations;
        ++rec.iterations;

        std::ostringstream line;
        const std::string rj = rep.to_json_line();
        line << "{\"iteration\": " << iterations << ", \"layer\": " << plan.layer
             << ", \"window_start\": " << s << ", " << rj.substr(1);
        result.history.push_back(line.str());
        if (history) history << line.str() << '\n';

        cycle_sum += rep.normalized[0];
        ++cycle_n;
        if (cycle_n == K) {
          rec.last_cycle_data_norm = cycle_sum / static_cast<double>(cycle_n);
          cycle_sum = 0;
          cycle_n = 0;
          if (rec.last_cycle_data_norm <= cfg.stage_tolerance) {
            rec.converged = true;
            break;
          }
        }
      }
      if (!rec.converged) {
        result.warnings.push_back("stage " + std::to_string(plan.layer) + ": iteration cap " +
                                  std::to_string(cap) + " reached without convergence");
      }
    }

    // Hidden state for the next stage: teacher-forced pass, last frame, gap.
    refresh_trajectory(plan, model, H, rcfg);
    std::vector<double> end = plan.overwrite(H[K], K);
    result.stages.push_back(rec);
    if (si + 1 < plans.size()) {
      end = run_gap(plan, model, end, rcfg);
      hidden = hand_off(plan.ctx.graph, end, plans[si + 1].ctx.graph);
    }

    Checkpoint& ck = result.checkpoint;
    ck.material = cfg.material;
    ck.model = model;
    ck.scheme = rcfg.step.scheme;
    ck.substeps = rcfg.step.substeps;
    ck.weights = cfg.weights;
    ck.iterations = iterations;
    ck.seed = cfg.seed;
    ck.stages_completed = static_cast<int>(si + 1);
    if (cfg.checkpoint_path) {
      save_checkpoint(ck, *cfg.checkpoint_path);
      write_resume(*resume_path, static_cast<int>(si + 1), iterations, hidden, adam);
    }
    if (cfg.stop_after_stages > 0 && static_cast<int>(si + 1) >= cfg.stop_after_stages) break;
  }
  if (first_stage >= plans.size()) {
    result.checkpoint = load_checkpoint(*cfg.checkpoint_path);
  }
  result.total_iterations = iterations;
  return result;
}

Prediction predict_sequence(const Model& model, const ThermalSequence& seq,
                            const std::vector<LayeredGraph>& graphs, const RolloutConfig& cfg_in) {
  RolloutConfig cfg = cfg_in;
  cfg.step.delta_t = 1.0 / seq.manifest.frame_rate_hz;
  const auto plans = plan_stages(seq, graphs, model.norm);
  Prediction pred;
  pred.graphs = graphs;
  std::vector<double> hidden = initial_state(seq, plans.front());
  double data_sum = 0;
  std::size_t data_n = 0;
  for (std::size_t si = 0; si < plans.size(); ++si) {
    const StagePlan& plan = plans[si];
    LayerPrediction lp;
    lp.layer = plan.layer;
    lp.obs = plan.obs;
    lp.observed = plan.ctx.observed;
    const auto T0 = plan.overwrite(hidden, 0);
    lp.states.push_back(T0);
    const auto iv = plan.window(0, plan.intervals());
    std::vector<double> last = T0;
    if (!iv.empty()) {
      const RolloutResult r = rollout(plan.ctx, model, T0, iv, cfg);
      lp.states.insert(lp.states.end(), r.states.begin(), r.states.end());
      lp.physics = r.physics;
      lp.raw = r.raw;
      data_sum += r.raw[0] * static_cast<double>(r.data_intervals);
      data_n += r.data_intervals;
      last = r.states.back();
    }
    pred.layers.push_back(std::move(lp));
    if (si + 1 < plans.size()) {
      auto end = plan.overwrite(last, plan.intervals());
      end = run_gap(plan, model, end, cfg);
      hidden = hand_off(plan.ctx.graph, end, plans[si + 1].ctx.graph);
    }
  }
  pred.mean_data_loss = data_n ? data_sum / static_cast<double>(data_n) : 0.0;
  return pred;
}

TransferMode transfer_mode_from_string(std::string_view s) {
  if (s == "inference") return TransferMode::inference;
  if (s == "finetune") return TransferMode::finetune;
  throw Error("unknown transfer mode '" + std::string(s) + "'");
}

TransferResult transfer(const Checkpoint& base, const ThermalSequence& seq,
                        const std::vector<LayeredGraph>& graphs, TransferMode mode,
                        const TrainConfig& cfg) {
  if (base.model.nets.phi.input_dim() != kEdgeFeatureDim ||
      base.model.nets.psi.input_dim() != kVertexFeatureDim) {
    throw Error("transfer: checkpoint feature dimensions do not match the featurizer");
  }
  TransferResult out;
  Model model = base.model;
  if (mode == TransferMode::finetune && cfg.budget > 0) {
    out.training = train_curriculum(seq, graphs, cfg, model);
    model = out.training->checkpoint.model;
    out.iterations = out.training->total_iterations;
  }
  out.prediction = predict_sequence(model, seq, graphs, cfg.rollout);
  return out;
}

}  // namespace thermograph
