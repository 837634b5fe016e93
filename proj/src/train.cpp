// Copyright 2026 The dgnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "dgnet/error.hpp"
#include "dgnet/rng.hpp"
#include "json.hpp"

namespace dgnet {
namespace {

// Runs job(i) for i in [0, count) on up to `threads` threads; rethrows the
// first exception by index.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, const Job& job) {
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t w, std::size_t stride) {
    for (std::size_t i = w; i < count; i += stride) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
  if (n == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(run, w, n);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Tensor stack_windows(const std::vector<Tensor>& src,
                     std::span<const std::size_t> rows, Shape shape) {
  const std::size_t per = src[rows[0]].size();
  shape.insert(shape.begin(), rows.size());
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src[rows[r]].raw(), per, out.raw() + r * per);
  }
  return out;
}

// Frame indices of the window whose scored position lands on t.
std::vector<std::size_t> window_frames(std::size_t t, std::size_t length,
                                       std::size_t frames, std::size_t scored) {
  std::vector<std::size_t> idx(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const long f = static_cast<long>(t) - static_cast<long>(scored) +
                   static_cast<long>(k);
    idx[k] = static_cast<std::size_t>(
        std::clamp(f, 0L, static_cast<long>(length) - 1));
  }
  return idx;
}

std::size_t scored_position(const EvalOptions& o, std::size_t frames) {
  if (o.scored_frame < 0) return (frames - 1) / 2;
  if (static_cast<std::size_t>(o.scored_frame) >= frames) {
    throw ConfigError("scored frame " + std::to_string(o.scored_frame) +
                      " outside a " + std::to_string(frames) + "-frame window");
  }
  return static_cast<std::size_t>(o.scored_frame);
}

Tensor copy_frames(const Tensor& src, const std::vector<std::size_t>& idx) {
  const std::size_t per = src.size() / src.dim(0);
  Shape shape = src.shape();
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(src.raw() + idx[k] * per, per, out.raw() + k * per);
  }
  return out;
}

Tensor concat_frames(const std::vector<const Tensor*>& parts) {
  Shape shape = parts.front()->shape();
  shape[0] = 0;
  for (const Tensor* p : parts) shape[0] += p->dim(0);
  Tensor out(shape);
  std::size_t off = 0;
  for (const Tensor* p : parts) {
    std::copy_n(p->raw(), p->size(), out.raw() + off);
    off += p->size();
  }
  return out;
}

Metrics compute_metrics(const Tensor& pred, const Tensor& gt, const PckOptions& pck) {
  Metrics m;
  m.frames = pred.dim(0);
  m.mpjpe = mpjpe(pred, gt);
  m.p_mpjpe = procrustes_mpjpe(pred, gt);
  const PckResult p = pck_auc(pred, gt, pck);
  m.pck = p.pck;
  m.auc = p.auc;
  return m;
}

void add_report(LossReport& acc, const LossReport& r) {
  acc.total += r.total;
  acc.network_loss += r.network_loss;
  if (acc.block_losses.size() < r.block_losses.size()) {
    acc.block_losses.resize(r.block_losses.size(), 0.0);
  }
  for (std::size_t b = 0; b < r.block_losses.size(); ++b) {
    acc.block_losses[b] += r.block_losses[b];
  }
}

bool report_finite(const LossReport& r) {
  if (!std::isfinite(r.total) || !std::isfinite(r.network_loss)) return false;
  for (double b : r.block_losses) {
    if (!std::isfinite(b)) return false;
  }
  return true;
}

}  // namespace

const char* to_string(Supervision s) {
  return s == Supervision::kNetwork ? "network" : "total";
}

Supervision parse_supervision(const std::string& s) {
  if (s == "network" || s == "network-loss-only") return Supervision::kNetwork;
  if (s == "total" || s == "total-loss") return Supervision::kTotal;
  throw ConfigError("unknown supervision '" + s + "' (network|total)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be > 0");
  if (batch == 0) throw ConfigError("batch must be > 0");
  if (chunk == 0) throw ConfigError("chunk must be > 0");
  if (threads == 0) throw ConfigError("threads must be > 0");
  if (log_every == 0) throw ConfigError("log_every must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be a non-negative number");
  }
  adam.validate();
}

Tensor normalize_2d(const Tensor& joints2d, const Intrinsics& k) {
  k.validate();
  Tensor out = joints2d;
  for (std::size_t i = 0; i + 1 < out.size(); i += 2) {
    out[i] = (out[i] - k.cx) / k.f;
    out[i + 1] = (out[i + 1] - k.cy) / k.f;
  }
  return out;
}

Tensor root_relative(const Tensor& joints3d, std::size_t root) {
  const std::size_t t_count = joints3d.dim(0), n = joints3d.dim(1);
  if (root >= n) throw ValidationError("root joint outside the pose");
  Tensor out = joints3d;
  for (std::size_t t = 0; t < t_count; ++t) {
    double* f = out.raw() + t * n * 3;
    const double r[3] = {f[root * 3], f[root * 3 + 1], f[root * 3 + 2]};
    for (std::size_t j = 0; j < n; ++j) {
      for (int a = 0; a < 3; ++a) f[j * 3 + a] -= r[a];
    }
  }
  return out;
}

Windows training_windows(const std::vector<PoseSequence>& seqs, std::size_t frames,
                         std::size_t root) {
  if (frames == 0) throw ConfigError("window length must be > 0");
  Windows w;
  w.frames = frames;
  for (const PoseSequence& s : seqs) {
    if (w.joints == 0) w.joints = s.joints();
    if (s.joints() != w.joints) {
      throw ValidationError("sequence '" + s.seq_id + "' has " +
                            std::to_string(s.joints()) + " joints, expected " +
                            std::to_string(w.joints));
    }
    const Tensor in = normalize_2d(s.joints2d, s.intrinsics);
    const Tensor tgt = root_relative(s.joints3d, root);
    for (std::size_t start = 0; start + frames <= s.frames(); start += frames) {
      std::vector<std::size_t> idx(frames);
      std::iota(idx.begin(), idx.end(), start);
      w.inputs.push_back(copy_frames(in, idx));
      w.targets.push_back(copy_frames(tgt, idx));
    }
  }
  return w;
}

bool is_validation(const std::string& seq_id) { return fnv1a64(seq_id) % 10 == 0; }

std::pair<std::vector<PoseSequence>, std::vector<PoseSequence>> split_validation(
    const std::vector<PoseSequence>& seqs) {
  std::pair<std::vector<PoseSequence>, std::vector<PoseSequence>> out;
  for (const PoseSequence& s : seqs) {
    (is_validation(s.seq_id) ? out.second : out.first).push_back(s);
  }
  return out;
}

std::string format_log_record(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["total_loss"] = r.loss.total;
  j["network_loss"] = r.loss.network_loss;
  j["block_losses"] = r.loss.block_losses;
  j["lr"] = r.lr;
  if (r.val_mpjpe >= 0.0) j["val_mpjpe_mm"] = r.val_mpjpe;
  return j.dump();
}

TrainResult train(DgNetModel& model, const std::vector<PoseSequence>& train_set,
                  const std::vector<PoseSequence>& val_set, const TrainConfig& cfg,
                  std::ostream* log, const EvalOptions& val_options) {
  cfg.validate();
  if (train_set.empty()) throw ValidationError("training set is empty");
  const VariantSpec& spec = model.variant();
  const std::size_t root = model.skeleton().root;
  const Windows windows = training_windows(train_set, spec.frames, root);
  if (windows.size() == 0) {
    throw ValidationError("no training window fits: sequences are shorter than T=" +
                          std::to_string(spec.frames));
  }
  if (windows.joints != model.skeleton().joint_count) {
    throw ValidationError("dataset has " + std::to_string(windows.joints) +
                          " joints, skeleton has " +
                          std::to_string(model.skeleton().joint_count));
  }

  const ParamList& params = model.parameters();
  Adam adam(params, cfg.adam);
  const std::size_t max_chunks = (std::min(cfg.batch, windows.size()) + cfg.chunk - 1) /
                                 cfg.chunk;
  std::vector<GradBuffer> grads;
  for (std::size_t c = 0; c < max_chunks; ++c) grads.emplace_back(params);

  const std::size_t t = spec.frames, n = windows.joints;
  Rng shuffle_rng(splitmix64(cfg.seed));
  std::vector<std::size_t> order(windows.size());
  TrainResult result;
  auto emit = [&](const LogRecord& r) {
    result.log.push_back(r);
    if (log) *log << format_log_record(r) << '\n';
  };

  std::size_t step = 0;
  bool done = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    LossReport epoch_sum;
    std::size_t epoch_steps = 0;
    const double epoch_lr = adam.lr();
    for (std::size_t b0 = 0; b0 < order.size() && !done; b0 += cfg.batch) {
      const std::size_t bsize = std::min(cfg.batch, order.size() - b0);
      const std::size_t chunks = (bsize + cfg.chunk - 1) / cfg.chunk;
      std::vector<LossReport> reports(chunks);
      auto run_chunk = [&](std::size_t c, bool check) {
        const std::size_t lo = b0 + c * cfg.chunk;
        const std::size_t hi = std::min(b0 + bsize, lo + cfg.chunk);
        const std::span<const std::size_t> rows(order.data() + lo, hi - lo);
        const Tensor input = stack_windows(windows.inputs, rows, {t, n, 2});
        Tensor target = stack_windows(windows.targets, rows, {t, n, 3});
        target = target.reshaped({rows.size() * t, n, 3});
        grads[c].zero();
        Tape tape;
        tape.set_check_finite(check);
        ParamBinder binder(tape, &grads[c]);
        const ModelOutput out = model.forward(tape, binder, input);
        const LossVars lv = loss(out, tape.constant(std::move(target)), cfg.lambda, bsize);
        reports[c] = lv.report();
        if (!check && !report_finite(reports[c])) return;
        tape.backward(cfg.supervision == Supervision::kTotal ? lv.total : lv.network);
      };
      parallel_for(chunks, cfg.threads,
                   [&](std::size_t c) { run_chunk(c, cfg.check_finite); });

      LossReport step_report;
      for (std::size_t c = 0; c < chunks; ++c) {
        if (!report_finite(reports[c])) {
          try {
            run_chunk(c, true);
          } catch (const NumericError& e) {
            throw NumericError("step " + std::to_string(step + 1) +
                               ": non-finite loss; first non-finite tensor: " +
                               e.what());
          }
          throw NumericError("step " + std::to_string(step + 1) +
                             ": non-finite loss");
        }
        add_report(step_report, reports[c]);
      }
      for (std::size_t c = 1; c < chunks; ++c) grads[0].add(grads[c]);
      const double lr = adam.lr();
      adam.step(grads[0]);
      ++step;
      ++epoch_steps;
      add_report(epoch_sum, step_report);
      if (step % cfg.log_every == 0) {
        emit({"step", epoch, step, step_report, lr, -1.0});
      }
      if (cfg.max_steps != 0 && step >= cfg.max_steps) done = true;
    }

    LogRecord rec{"epoch", epoch, step, epoch_sum, epoch_lr, -1.0};
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, epoch_steps));
    rec.loss.total *= inv;
    rec.loss.network_loss *= inv;
    for (double& v : rec.loss.block_losses) v *= inv;
    if (!val_set.empty()) rec.val_mpjpe = evaluate(model, val_set, val_options).overall.mpjpe;
    emit(rec);
    if (!done) adam.end_epoch();
  }
  result.steps = step;
  result.lr = adam.lr();
  return result;
}

std::vector<Tensor> predict_windows(const DgNetModel& model, const Windows& windows,
                                    std::size_t chunk, std::size_t threads) {
  if (chunk == 0) throw ConfigError("chunk must be > 0");
  const std::size_t t = windows.frames, n = windows.joints;
  std::vector<Tensor> out(windows.size());
  const std::size_t chunks = (windows.size() + chunk - 1) / chunk;
  std::vector<std::size_t> all(windows.size());
  std::iota(all.begin(), all.end(), 0);
  ForwardOptions fo;
  fo.block_heads = false;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = c * chunk, hi = std::min(windows.size(), lo + chunk);
    const std::span<const std::size_t> rows(all.data() + lo, hi - lo);
    const Tensor input = stack_windows(windows.inputs, rows, {t, n, 2});
    Tape tape;
    ParamBinder binder(tape);
    const ModelOutput res = model.forward(tape, binder, input, fo);
    const Tensor& pred = res.network_pred.value();
    const std::size_t per = t * n * 3;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Tensor w({t, n, 3});
      std::copy_n(pred.raw() + r * per, per, w.raw());
      out[lo + r] = std::move(w);
    }
  });
  return out;
}

Tensor predict_sequence(const DgNetModel& model, const PoseSequence& seq,
                        const EvalOptions& options) {
  const std::size_t t = model.variant().frames, n = seq.joints();
  const std::size_t root = model.skeleton().root;
  if (n != model.skeleton().joint_count) {
    throw ValidationError("sequence '" + seq.seq_id + "' has " + std::to_string(n) +
                          " joints, skeleton has " +
                          std::to_string(model.skeleton().joint_count));
  }
  const std::size_t scored = scored_position(options, t);
  const std::size_t length = seq.frames();
  const Tensor in = normalize_2d(seq.joints2d, seq.intrinsics);
  Windows w;
  w.frames = t;
  w.joints = n;
  for (std::size_t f = 0; f < length; ++f) {
    w.inputs.push_back(copy_frames(in, window_frames(f, length, t, scored)));
  }
  const std::vector<Tensor> preds = predict_windows(model, w, options.chunk, options.threads);
  Tensor out({length, n, 3});
  for (std::size_t f = 0; f < length; ++f) {
    std::copy_n(preds[f].raw() + scored * n * 3, n * 3, out.raw() + f * n * 3);
  }
  if (options.balance) {
    // Place the prediction at the ground-truth root depth, then balance
    // against the input pixels.
    Tensor uv({length, n, 3});
    for (std::size_t i = 0; i < length * n; ++i) {
      uv[3 * i] = seq.joints2d[2 * i];
      uv[3 * i + 1] = seq.joints2d[2 * i + 1];
    }
    for (std::size_t f = 0; f < length; ++f) {
      const double* gr = seq.joints3d.raw() + (f * n + root) * 3;
      double* p = out.raw() + f * n * 3;
      const double pr[3] = {p[root * 3], p[root * 3 + 1], p[root * 3 + 2]};
      for (std::size_t j = 0; j < n; ++j) {
        for (int a = 0; a < 3; ++a) p[j * 3 + a] += gr[a] - pr[a];
      }
    }
    out = balance_coordinates(out, uv, seq.intrinsics);
  }
  return root_relative(out, root);
}

AffinityDump dump_affinities(const DgNetModel& model, const PoseSequence& seq,
                             std::size_t frame, std::size_t block,
                             const EvalOptions& options) {
  const std::size_t t = model.variant().frames, n = seq.joints();
  if (n != model.skeleton().joint_count) {
    throw ValidationError("sequence '" + seq.seq_id + "' has " + std::to_string(n) +
                          " joints, skeleton has " +
                          std::to_string(model.skeleton().joint_count));
  }
  if (frame >= seq.frames()) {
    throw ValidationError("frame " + std::to_string(frame) + " outside sequence '" +
                          seq.seq_id + "' of " + std::to_string(seq.frames()) +
                          " frames");
  }
  if (block == 0 || block > model.variant().blocks) {
    throw ConfigError("block " + std::to_string(block) + " outside 1.." +
                      std::to_string(model.variant().blocks));
  }
  const std::size_t scored = scored_position(options, t);
  const Tensor in = normalize_2d(seq.joints2d, seq.intrinsics);
  Tensor input = copy_frames(in, window_frames(frame, seq.frames(), t, scored));
  input = input.reshaped({1, t, n, 2});
  AffinityRecorder recorder;
  ForwardOptions fo;
  fo.block_heads = false;
  fo.recorder = &recorder;
  Tape tape;
  ParamBinder binder(tape);
  model.forward(tape, binder, input, fo);

  const std::string prefix = "block" + std::to_string(block) + "/";
  auto pick = [&](const std::string& name, Tensor& dst) {
    for (const auto& [key, value] : recorder.entries) {
      if (key.rfind(prefix, 0) != 0) continue;
      if (key.size() < name.size() + 1 ||
          key.compare(key.size() - name.size() - 1, std::string::npos,
                      "/" + name) != 0) {
        continue;
      }
      dst = Tensor({n, n});
      std::copy_n(value.raw() + scored * n * n, n * n, dst.raw());
      return true;
    }
    return false;
  };
  AffinityDump d;
  d.has_spatial = pick("B", d.spatial);
  const bool next = pick("Q_next", d.temporal_next);
  const bool prev = pick("Q_prev", d.temporal_prev);
  d.has_temporal = next && prev;
  return d;
}

Metrics evaluate_windows(const DgNetModel& model, const Windows& windows,
                         const EvalOptions& options) {
  if (windows.size() == 0) throw ValidationError("no windows to evaluate");
  const std::size_t root = model.skeleton().root;
  const std::vector<Tensor> preds =
      predict_windows(model, windows, options.chunk, options.threads);
  std::vector<Tensor> centered;
  std::vector<const Tensor*> p, g;
  centered.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    centered.push_back(root_relative(preds[i], root));
    p.push_back(&centered.back());
    g.push_back(&windows.targets[i]);
  }
  return compute_metrics(concat_frames(p), concat_frames(g), options.pck);
}

EvalReport evaluate(const DgNetModel& model, const std::vector<PoseSequence>& seqs,
                    const EvalOptions& options) {
  if (seqs.empty()) throw ValidationError("evaluation set is empty");
  const std::size_t root = model.skeleton().root;
  std::vector<Tensor> preds(seqs.size()), gts(seqs.size());
  EvalOptions inner = options;
  inner.threads = 1;
  parallel_for(seqs.size(), options.threads, [&](std::size_t i) {
    preds[i] = predict_sequence(model, seqs[i], inner);
    gts[i] = root_relative(seqs[i].joints3d, root);
  });
  std::vector<const Tensor*> all_p, all_g;
  std::map<std::string, std::pair<std::vector<const Tensor*>, std::vector<const Tensor*>>>
      by_action;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    all_p.push_back(&preds[i]);
    all_g.push_back(&gts[i]);
    if (!seqs[i].action.empty()) {
      auto& slot = by_action[seqs[i].action];
      slot.first.push_back(&preds[i]);
      slot.second.push_back(&gts[i]);
    }
  }
  EvalReport r;
  r.overall = compute_metrics(concat_frames(all_p), concat_frames(all_g), options.pck);
  for (const auto& [action, pg] : by_action) {
    r.per_action[action] =
        compute_metrics(concat_frames(pg.first), concat_frames(pg.second), options.pck);
  }
  return r;
}

std::vector<double> default_noise_levels() { return {0.0, 5.0, 10.0, 15.0, 20.0}; }

std::vector<RobustnessRow> run_robustness_protocol(
    const DgNetModel& model, const std::vector<PoseSequence>& seqs,
    const std::vector<double>& sigmas, std::uint64_t seed,
    const EvalOptions& options) {
  std::vector<RobustnessRow> rows;
  for (double sigma : sigmas) {
    std::vector<PoseSequence> noisy;
    noisy.reserve(seqs.size());
    for (const PoseSequence& s : seqs) noisy.push_back(corrupt_2d(s, {sigma, seed}));
    const EvalReport r = evaluate(model, noisy, options);
    rows.push_back({sigma, r.overall.mpjpe, r.overall.p_mpjpe});
  }
  return rows;
}

}  // namespace dgnet
