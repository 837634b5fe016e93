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


// Acceptance runner. Prints one PASS/FAIL line per criterion followed by its
// measurements, and exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli.hpp"
#include "dgnet/affinity.hpp"
#include "dgnet/checkpoint.hpp"
#include "dgnet/data.hpp"
#include "dgnet/gradcheck.hpp"
#include "dgnet/graph_conv.hpp"
#include "dgnet/metrics.hpp"
#include "dgnet/model.hpp"
#include "dgnet/train.hpp"
#include "oracles.hpp"

namespace dgnet {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  o.pass = true;
  const auto t0 = Clock::now();
  const GradcheckTarget layers[] = {GradcheckTarget::kFsg, GradcheckTarget::kDsg,
                                    GradcheckTarget::kFtg, GradcheckTarget::kDtg,
                                    GradcheckTarget::kNonlocal, GradcheckTarget::kFullModel};
  for (GradcheckTarget t : layers) {
    GradcheckOptions opt;
    opt.trials = 10;
    opt.tolerance = t == GradcheckTarget::kFullModel ? 1e-3 : 1e-4;
    // The full model has about 150 parameter tensors; four coordinates of each
    // per trial keeps the suite inside its time budget.
    if (t == GradcheckTarget::kFullModel) opt.samples = 4;
    const auto t1 = Clock::now();
    const GradcheckReport r = run_gradcheck(t, opt);
    std::size_t checked = 0;
    for (const auto& g : r.groups) checked += g.checked;
    o.pass &= r.passed;
    o.details.push_back(fmt("%-10s worst %.3e (< %.0e) over %zu coordinates, %zu trials, %.1fs",
                            to_string(t), r.worst, opt.tolerance, checked, opt.trials,
                            seconds_since(t1)));
  }
  const double total = seconds_since(t0);
  o.pass &= total < 120.0;
  o.details.push_back(fmt("runtime %.1fs (< 120s)", total));
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Tensor tie_heavy(std::size_t n, std::size_t c, Rng& rng) {
  Tensor x({n, c});
  for (double& v : x.data()) v = static_cast<double>(rng.below(3)) - 1.0;
  return x;
}

std::set<int> support_of(const Tensor& m, std::size_t row) {
  std::set<int> s;
  for (std::size_t j = 0; j < m.dim(1); ++j) {
    if (m.at(row, j) != 0.0) s.insert(static_cast<int>(j));
  }
  return s;
}

Outcome affinity_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t mismatches = 0, tie_trials = 0, rows = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 17, c = 1 + rng.below(6);
    const bool ties = trial % 2 == 0;
    tie_trials += ties;
    auto features = [&] { return ties ? tie_heavy(n, c, rng) : oracle::random_tensor({n, c}, rng); };
    const Tensor x = features(), y = features();
    const WeightingHead binary = WeightingHead::make(HeadActivation::kUnweighted, c, nullptr);

    const std::size_t ks = 1 + rng.below(n - 1);
    const auto want_s = oracle::knn_spatial(x, ks, false);
    const NeighborSet got_s = knn_spatial(x, ks);
    const Tensor bs = build_dynamical_spatial(x, ks, binary).values;

    const std::size_t kt = 1 + rng.below(n);
    const auto want_t = oracle::knn_temporal(x, y, kt, true);
    const NeighborSet got_t = knn_temporal(x, y, kt);
    const Tensor bt = build_dynamical_temporal(x, y, kt, binary, TemporalDirection::kForward).values;

    for (std::size_t i = 0; i < n; ++i, ++rows) {
      const bool ok = got_s.indices(i) == want_s[i] &&
                      support_of(bs, i) == std::set<int>(want_s[i].begin(), want_s[i].end()) &&
                      got_t.indices(i) == want_t[i] &&
                      support_of(bt, i) == std::set<int>(want_t[i].begin(), want_t[i].end());
      mismatches += !ok;
    }
  }
  const double secs = seconds_since(t0);
  o.pass = mismatches == 0 && secs < 30.0;
  o.details.push_back(fmt("200 feature matrices (%zu tie-heavy), %zu joint rows, %zu mismatches",
                          tie_trials, rows, mismatches));
  o.details.push_back(fmt("runtime %.2fs (< 30s)", secs));
  return o;
}

// ---- 3 ---------------------------------------------------------------------

struct Pass {
  Pass(std::size_t batch, std::size_t frames)
      : params(tape), ctx(tape, params, FrameLayout::make(batch, frames)) {}
  Tape tape;
  ParamBinder params;
  ForwardContext ctx;
};

Outcome reduction_identities() {
  Outcome o;
  Rng rng(33);
  const std::size_t b = 2, t = 4, n = 17, c = 8;

  // (a) FTG against the explicit identity-affinity products.
  bool a_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    FtgLayer layer(c, c, &rng);
    layer.bias = oracle::random_tensor({c}, rng);
    const Tensor x = oracle::random_tensor({b * t, n, c}, rng);
    Pass p(b, t);
    const Var vx = p.tape.constant(x);
    const Tensor got = layer.preact(p.ctx, vx).value();
    const Tensor pf = build_fixed_temporal(n, TemporalDirection::kForward).values;
    const Tensor pb = build_fixed_temporal(n, TemporalDirection::kBackward).values;
    const Var next = bmm(p.tape.constant(pf), index_select(vx, p.ctx.layout.next));
    const Var prev = bmm(p.tape.constant(pb), index_select(vx, p.ctx.layout.prev));
    ParamBinder& w = p.params;
    const Tensor want =
        linear({vx, next, prev}, {w(layer.w_x), w(layer.w_f), w(layer.w_b)}, w(layer.bias)).value();
    a_ok &= got == want;
  }

  // (b) DTG, zero motion, K = 1, heads fixed at 1, against FTG with the same weights.
  double b_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    DtgLayer dtg({ConnectionStyle::kDynamical, HeadActivation::kIdentity, 1, true}, nullptr, c, c,
                 &rng);
    for (WeightingHead* h : {&dtg.alpha, &dtg.beta}) {
      std::fill(h->weight.data().begin(), h->weight.data().end(), 0.0);
      h->bias[0] = 1.0;
    }
    dtg.bias = oracle::random_tensor({c}, rng);
    FtgLayer ftg(c, c, nullptr);
    ftg.w_x = dtg.u_x;
    ftg.w_f = dtg.u_f;
    ftg.w_b = dtg.u_b;
    ftg.bias = dtg.bias;
    Tensor x({b * t, n, c});
    for (std::size_t s = 0; s < b; ++s) {
      const Tensor pose = oracle::random_tensor({n, c}, rng);
      for (std::size_t fr = 0; fr < t; ++fr) {
        std::copy_n(pose.raw(), n * c, x.raw() + (s * t + fr) * n * c);
      }
    }
    Pass p(b, t);
    const Var vx = p.tape.constant(x);
    const Tensor yd = dtg.preact(p.ctx, vx).value();
    const Tensor yf = ftg.preact(p.ctx, vx).value();
    b_err = std::max(b_err, max_abs_diff(yd, yf));
  }

  // (c) FSG with identity affinity and identity weights.
  bool c_ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    FsgLayer layer(std::make_shared<const Tensor>(Tensor::identity(n)), c, c, nullptr);
    layer.theta = Tensor::identity(c);
    const Tensor x = oracle::random_tensor({t, n, c}, rng);
    Pass p(1, t);
    c_ok &= layer.preact(p.ctx, p.tape.constant(x)).value() == x;
  }

  o.pass = a_ok && b_err <= 1e-12 && c_ok;
  o.details.push_back(fmt("(a) FTG == explicit identity-affinity form bitwise: %s (10 trials)",
                          a_ok ? "yes" : "no"));
  o.details.push_back(fmt("(b) DTG(K=1, zero motion, unit heads) vs FTG: max |diff| %.2e (<= 1e-12)",
                          b_err));
  o.details.push_back(fmt("(c) FSG(identity affinity, identity weights) == input: %s (10 trials)",
                          c_ok ? "yes" : "no"));
  return o;
}

// ---- 4 ---------------------------------------------------------------------

// Per-frame MPJPE of a [F x N x 3] prediction against window targets.
double window_mpjpe(const Tensor& pred, const Windows& w, std::size_t first) {
  const std::size_t per = w.frames * w.joints * 3;
  Tensor gt({pred.dim(0), w.joints, 3});
  for (std::size_t s = 0; s < pred.dim(0) / w.frames; ++s) {
    std::copy_n(w.targets[first + s].raw(), per, gt.raw() + s * per);
  }
  return mpjpe(pred, gt);
}

Outcome overfit() {
  Outcome o;
  const SkeletonGraph sk = SkeletonGraph::human36m17();
  const auto seqs = generate_synthetic(4, 4, sk, 7);
  auto model = configure_variant(VariantSpec{}, sk);
  const Windows win = training_windows(seqs, 4, static_cast<std::size_t>(sk.root));
  const double before = evaluate_windows(*model, win).mpjpe;

  TrainConfig cfg;
  cfg.batch = 4;
  cfg.max_steps = 2000;
  cfg.epochs = 2000;
  // One window batch per epoch: a per-epoch decay of 0.96 would stop learning
  // within a hundred steps.
  cfg.adam.decay = 0.999;
  cfg.log_every = 1000000;
  cfg.threads = 1;
  const auto t0 = Clock::now();
  const TrainResult r = train(*model, seqs, {}, cfg);
  const double secs = seconds_since(t0);
  const double after = evaluate_windows(*model, win).mpjpe;
  const double ratio = after / before;
  o.pass = r.steps == 2000 && ratio <= 0.1 && secs < 600.0;
  o.details.push_back(fmt("train MPJPE %.2f mm -> %.2f mm after %zu steps: ratio %.4f (<= 0.1)",
                          before, after, r.steps, ratio));
  o.details.push_back(fmt("runtime %.1fs on one thread (< 600s), %zu parameters", secs,
                          model->parameter_count()));

  // Side measurements on the overfit model.
  Tensor in({win.size(), win.frames, win.joints, 2});
  for (std::size_t s = 0; s < win.size(); ++s) {
    std::copy_n(win.inputs[s].raw(), win.inputs[s].size(), in.raw() + s * win.inputs[s].size());
  }
  Tape tape;
  ParamBinder params(tape);
  const ModelOutput out = model->forward(tape, params, in);
  o.details.push_back(fmt("network_pred MPJPE %.2f mm, block1 MPJPE %.2f mm",
                          window_mpjpe(out.network_pred.value(), win, 0),
                          window_mpjpe(out.block_preds[0].value(), win, 0)));
  EvalOptions cam, bal;
  bal.balance = true;
  const double cam_err = evaluate(*model, seqs, cam).overall.mpjpe;
  const double bal_err = evaluate(*model, seqs, bal).overall.mpjpe;
  o.details.push_back(fmt("eval MPJPE camera-only %.2f mm, balanced %.2f mm", cam_err, bal_err));
  return o;
}

// ---- 5, 6, 7 ---------------------------------------------------------------

struct OrderingBudget {
  std::size_t seeds = 5;
  std::size_t sequences = 200;
  std::size_t frames = 16;
  std::size_t channels = 32;
  std::size_t epochs = 20;
  std::size_t batch = 8;
  double lr = 1e-3;
  // Anneals the step size so the final epoch is not caught mid-swing.
  double decay = 0.9;
};

struct SeedResult {
  double dynamical = 0.0;  // validation MPJPE, total loss
  double fixed_only = 0.0;
  double network_only = 0.0;
  std::vector<RobustnessRow> robustness;
};

std::vector<SeedResult> run_orderings(const OrderingBudget& b, std::ostream& log) {
  const SkeletonGraph sk = SkeletonGraph::human36m17();
  std::vector<SeedResult> out;
  for (std::uint64_t seed = 1; seed <= b.seeds; ++seed) {
    const auto data = generate_synthetic(b.sequences, b.frames, sk, seed);
    const auto [train_set, val_set] = split_validation(data);
    auto fit = [&](bool fixed_only, Supervision sup) {
      VariantSpec v;
      v.channels = b.channels;
      v.seed = seed;
      if (fixed_only) {
        v.spatial_stack = {LayerType::kFsg};
        v.temporal_stack = {LayerType::kFtg};
      }
      auto model = configure_variant(v, sk);
      TrainConfig tc;
      tc.epochs = b.epochs;
      tc.batch = b.batch;
      tc.adam.lr = b.lr;
      tc.adam.decay = b.decay;
      tc.seed = seed;
      tc.supervision = sup;
      tc.log_every = 1000000;
      const auto t0 = Clock::now();
      train(*model, train_set, {}, tc);
      const double err = evaluate(*model, val_set).overall.mpjpe;
      log << fmt("    seed %llu %-13s %-7s val MPJPE %.2f mm (%.0fs)\n",
                 static_cast<unsigned long long>(seed), fixed_only ? "FSG/FTG" : "dynamical",
                 sup == Supervision::kTotal ? "total" : "network", err, seconds_since(t0))
          << std::flush;
      return std::pair{std::move(model), err};
    };
    SeedResult r;
    auto [dyn, dyn_err] = fit(false, Supervision::kTotal);
    r.dynamical = dyn_err;
    r.robustness = run_robustness_protocol(*dyn, val_set, default_noise_levels(), seed);
    r.fixed_only = fit(true, Supervision::kTotal).second;
    r.network_only = fit(false, Supervision::kNetwork).second;
    out.push_back(std::move(r));
  }
  return out;
}

Outcome ordering(const std::vector<SeedResult>& seeds, double SeedResult::*better,
                 double SeedResult::*worse, const char* better_name, const char* worse_name) {
  Outcome o;
  std::size_t held = 0;
  std::vector<double> bv, wv;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const double x = seeds[i].*better, y = seeds[i].*worse;
    held += x <= y;
    bv.push_back(x);
    wv.push_back(y);
    o.details.push_back(fmt("seed %zu: %s %.2f mm vs %s %.2f mm %s", i + 1, better_name, x,
                            worse_name, y, x <= y ? "(holds)" : "(reversed)"));
  }
  const std::size_t need = seeds.size() >= 5 ? 4 : seeds.size();
  o.pass = held >= need;
  o.details.push_back(fmt("median %.2f vs %.2f mm; ordering held in %zu of %zu seeds (need %zu)",
                          median(bv), median(wv), held, seeds.size(), need));
  return o;
}

Outcome robustness(const std::vector<SeedResult>& seeds) {
  Outcome o;
  o.pass = true;
  const auto sigmas = default_noise_levels();
  double prev = -1.0;
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    std::vector<double> v;
    for (const auto& r : seeds) v.push_back(r.robustness[s].p_mpjpe);
    const double m = median(v);
    o.pass &= m >= prev;
    o.details.push_back(fmt("sigma %4.1f px: median P-MPJPE %.3f mm", sigmas[s], m));
    prev = m;
  }
  return o;
}

// ---- 8 ---------------------------------------------------------------------

Tensor rotation(Rng& rng) {
  double q[4], norm = 0.0;
  for (double& v : q) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  Tensor r({3, 3});
  const double m[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                       2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                       2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
  std::copy_n(m, 9, r.raw());
  return r;
}

double squared_error(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

Outcome metric_suite() {
  Outcome o;
  Rng rng(88);
  const std::size_t n = 17;
  // Pose pairs from the synthetic walker: half a pose and a noisy copy of it,
  // half two unrelated poses. All root-relative.
  const SkeletonGraph sk = SkeletonGraph::human36m17();
  const auto seqs = generate_synthetic(100, 16, sk, 88);
  auto random_pose = [&] {
    const PoseSequence& s = seqs[rng.below(seqs.size())];
    const Tensor r = root_relative(s.joints3d, static_cast<std::size_t>(sk.root));
    Tensor p({n, 3});
    std::copy_n(r.raw() + rng.below(s.frames()) * n * 3, n * 3, p.raw());
    return p;
  };
  std::size_t violations = 0, sq_violations = 0;
  double worst_gap = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor gt = random_pose();
    Tensor pred;
    if (trial % 2) {
      pred = gt;
      const double sd = rng.uniform(5.0, 150.0);
      for (double& v : pred.data()) v += rng.normal(0.0, sd);
    } else {
      pred = random_pose();
    }
    const double gap = procrustes_mpjpe(pred, gt) - mpjpe(pred, gt);
    worst_gap = std::max(worst_gap, gap);
    // 1e-9 mm absorbs roundoff when both poses coincide.
    violations += gap > 1e-9;
    sq_violations +=
        squared_error(procrustes_align(pred, gt), gt) > squared_error(pred, gt) * (1 + 1e-12) + 1e-18;
  }

  double worst_rigid = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor gt = oracle::random_tensor({n, 3}, rng, -800.0, 800.0);
    const Tensor r = rotation(rng);
    const double s = rng.uniform(0.5, 2.0);
    const double tr[3] = {rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)};
    Tensor moved({n, 3});
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        double v = tr[a];
        for (std::size_t k = 0; k < 3; ++k) v += s * r.at(a, k) * gt.at(j, k);
        moved.at(j, a) = v;
      }
    }
    worst_rigid = std::max(worst_rigid, procrustes_mpjpe(moved, gt));
  }

  Tensor gt({n, 3}), shifted({n, 3});
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t a = 0; a < 3; ++a) gt.at(j, a) = static_cast<double>(rng.below(1601)) - 800.0;
    shifted.at(j, 0) = gt.at(j, 0) + 3.0;
    shifted.at(j, 1) = gt.at(j, 1);
    shifted.at(j, 2) = gt.at(j, 2) + 4.0;
  }
  const double offset = mpjpe(shifted, gt);

  o.pass = violations == 0 && sq_violations == 0 && worst_rigid < 1e-9 && offset == 5.0;
  o.details.push_back(fmt("procrustes_mpjpe <= mpjpe on 1000 pose pairs: %zu violations "
                          "(largest P-MPJPE - MPJPE %.3e mm)",
                          violations, worst_gap));
  // The alignment minimizes squared error, so this half always holds; the
  // mean of per-joint distances is not what it minimizes.
  o.details.push_back(fmt("aligned squared error <= raw squared error: %zu violations",
                          sq_violations));
  o.details.push_back(fmt("rigid + scale copies: worst P-MPJPE %.3e mm (< 1e-9)", worst_rigid));
  o.details.push_back(fmt("uniform (3,0,4) offset: MPJPE %.17g (== 5.0)", offset));
  return o;
}

// ---- 9 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& scratch) {
  Outcome o;
  auto run = [&](const std::string& tag) {
    const fs::path dir = scratch / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ostringstream out, err;
    const std::string data = (dir / "synth.jsonl").string();
    int code = cli::run({"synth-gen", "--count", "12", "--frames", "8", "--seed", "5", "--out",
                         data},
                        out, err);
    code |= cli::run({"train", "--data", data, "--out", (dir / "run").string(), "--epochs", "2",
                      "--batch", "4", "--channels", "16", "--seed", "11"},
                     out, err);
    if (code != 0) o.details.push_back("command failed: " + err.str());
    return dir;
  };
  const fs::path a = run("a"), b = run("b");
  o.pass = true;
  for (const char* f : {"synth.jsonl", "run/train_log.jsonl", "run/model.ckpt"}) {
    const std::string x = slurp(a / f), y = slurp(b / f);
    const bool same = !x.empty() && x == y;
    o.pass &= same;
    o.details.push_back(fmt("%-20s %zu bytes, %s", f, x.size(), same ? "identical" : "DIFFERENT"));
  }
  fs::remove_all(a);
  fs::remove_all(b);
  return o;
}

}  // namespace
}  // namespace dgnet

int main(int argc, char** argv) {
  using namespace dgnet;
  CLI::App app{"dgnet acceptance runner"};
  std::set<int> only;
  OrderingBudget budget;
  std::string scratch = (fs::temp_directory_path() / "dgnet_acceptance").string();
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--seeds", budget.seeds, "Seeds for criteria 5-7")->capture_default_str();
  app.add_option("--sequences", budget.sequences, "Synthetic sequences per seed")
      ->capture_default_str();
  app.add_option("--frames", budget.frames, "Frames per synthetic sequence")
      ->capture_default_str();
  app.add_option("--channels", budget.channels, "Channels for criteria 5-7")
      ->capture_default_str();
  app.add_option("--epochs", budget.epochs, "Epochs for criteria 5-7")->capture_default_str();
  app.add_option("--batch", budget.batch, "Batch size for criteria 5-7")->capture_default_str();
  app.add_option("--lr", budget.lr, "Learning rate for criteria 5-7")->capture_default_str();
  app.add_option("--decay", budget.decay, "Per-epoch learning-rate decay for criteria 5-7")
      ->capture_default_str();
  app.add_option("--scratch", scratch, "Scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int c) { return only.empty() || only.count(c) != 0; };
  const char* names[] = {"",
                         "gradient suite",
                         "affinity oracle",
                         "reduction identities",
                         "overfit check",
                         "ablation ordering (dynamical vs fixed-only)",
                         "multi-level supervision ordering",
                         "robustness protocol",
                         "metric suite",
                         "determinism"};
  bool all = true;
  auto report = [&](int c, const std::function<Outcome()>& fn) {
    if (!wanted(c)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    all &= o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c << ": " << names[c] << "\n";
    for (const auto& d : o.details) std::cout << "    " << d << "\n";
    std::cout << std::flush;
  };

  report(1, gradient_suite);
  report(2, affinity_oracle);
  report(3, reduction_identities);
  report(4, overfit);
  if (wanted(5) || wanted(6) || wanted(7)) {
    std::cout << fmt("  training for criteria 5-7: %zu seeds x 3 models, %zu sequences of %zu "
                     "frames, C=%zu, %zu epochs, batch %zu, lr %g, decay %g\n",
                     budget.seeds, budget.sequences, budget.frames, budget.channels,
                     budget.epochs, budget.batch, budget.lr, budget.decay)
              << std::flush;
    std::vector<SeedResult> seeds;
    std::string failure;
    try {
      seeds = run_orderings(budget, std::cout);
    } catch (const std::exception& e) {
      failure = e.what();
    }
    auto guarded = [&](auto fn) {
      return [&, fn]() -> Outcome {
        if (!failure.empty()) throw std::runtime_error(failure);
        return fn();
      };
    };
    report(5, guarded([&] {
             return ordering(seeds, &SeedResult::dynamical, &SeedResult::fixed_only,
                             "dynamical", "FSG/FTG");
           }));
    report(6, guarded([&] {
             return ordering(seeds, &SeedResult::dynamical, &SeedResult::network_only,
                             "total-loss", "network-loss");
           }));
    report(7, guarded([&] { return robustness(seeds); }));
  }
  report(8, metric_suite);
  report(9, [&] { return determinism(scratch); });
  return all ? 0 : 1;
}
