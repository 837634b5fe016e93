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

// Training loop, evaluation protocols and the robustness sweep.

#ifndef DGNET_TRAIN_HPP_
#define DGNET_TRAIN_HPP_

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/data.hpp"
#include "dgnet/metrics.hpp"
#include "dgnet/model.hpp"
#include "dgnet/optim.hpp"

namespace dgnet {

enum class Supervision { kNetwork, kTotal };
const char* to_string(Supervision s);
Supervision parse_supervision(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double lambda = 0.1;
  Supervision supervision = Supervision::kTotal;
  AdamConfig adam;
  // Stop after this many optimizer steps (0: run all epochs).
  std::size_t max_steps = 0;
  // Windows per gradient chunk. Chunks are the unit of parallel work and are
  // summed in a fixed order, so results do not depend on `threads`.
  std::size_t chunk = 8;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  bool check_finite = false;
  // Write a step record every `log_every` steps (epoch records always).
  std::size_t log_every = 1;

  void validate() const;
};

// Model inputs and targets for one T-frame window.
struct Windows {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::vector<Tensor> inputs;   // [T x N x 2], normalized image coordinates
  std::vector<Tensor> targets;  // [T x N x 3], root-relative millimeters
  std::size_t size() const { return inputs.size(); }
};

// (u - c) / f per coordinate.
Tensor normalize_2d(const Tensor& joints2d, const Intrinsics& k);
// joints3d minus the root joint of each frame.
Tensor root_relative(const Tensor& joints3d, std::size_t root);

// Non-overlapping windows starting at frame 0; a trailing remainder shorter
// than T is dropped.
Windows training_windows(const std::vector<PoseSequence>& seqs, std::size_t frames,
                         std::size_t root);

// Sequence ids with FNV-1a(seq_id) % 10 == 0 form the validation split.
bool is_validation(const std::string& seq_id);
std::pair<std::vector<PoseSequence>, std::vector<PoseSequence>> split_validation(
    const std::vector<PoseSequence>& seqs);

struct LogRecord {
  std::string kind;  // "step" or "epoch"
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossReport loss;
  double lr = 0.0;
  double val_mpjpe = -1.0;  // epoch records with a validation set only
};
std::string format_log_record(const LogRecord& r);

struct TrainResult {
  std::vector<LogRecord> log;
  std::size_t steps = 0;
  double lr = 0.0;
};

struct EvalOptions {
  // Window position scored for each frame; -1 for floor((T - 1) / 2).
  int scored_frame = -1;
  bool balance = false;
  PckOptions pck;
  std::size_t chunk = 64;
  std::size_t threads = 1;
};

// Loss and parameter updates are driven by `train_set`; `val_set` (may be
// empty) is evaluated at every epoch end. `log` receives one JSON line per
// record when non-null.
TrainResult train(DgNetModel& model, const std::vector<PoseSequence>& train_set,
                  const std::vector<PoseSequence>& val_set, const TrainConfig& config,
                  std::ostream* log = nullptr,
                  const EvalOptions& val_options = {});

// Forward pass on every window of `windows` (in chunks); network predictions
// as [W x T x N x 3].
std::vector<Tensor> predict_windows(const DgNetModel& model, const Windows& windows,
                                    std::size_t chunk = 64, std::size_t threads = 1);

// Root-centered prediction for every frame of `seq`: frame t is read from a
// window whose scored position sits at t, with edge frames replicated.
Tensor predict_sequence(const DgNetModel& model, const PoseSequence& seq,
                        const EvalOptions& options = {});

struct Metrics {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double pck = 0.0;
  double auc = 0.0;
  std::size_t frames = 0;
};

struct EvalReport {
  Metrics overall;
  std::map<std::string, Metrics> per_action;  // sequences with an action label
};

// Metrics over every frame of every window (the training view of a dataset).
Metrics evaluate_windows(const DgNetModel& model, const Windows& windows,
                         const EvalOptions& options = {});

EvalReport evaluate(const DgNetModel& model, const std::vector<PoseSequence>& seqs,
                    const EvalOptions& options = {});

// Affinities of one block for one frame of a sequence, taken from the window
// that scores that frame. Matrices are [N x N]. With several dynamical layers
// in the block, the first one of each kind is reported.
struct AffinityDump {
  Tensor spatial;        // B_t
  Tensor temporal_next;  // Q_{t+1}
  Tensor temporal_prev;  // Q_{t-1}
  bool has_spatial = false;
  bool has_temporal = false;
};
AffinityDump dump_affinities(const DgNetModel& model, const PoseSequence& seq,
                             std::size_t frame, std::size_t block = 1,
                             const EvalOptions& options = {});

struct RobustnessRow {
  double sigma = 0.0;
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
};

std::vector<double> default_noise_levels();  // 0, 5, 10, 15, 20

std::vector<RobustnessRow> run_robustness_protocol(
    const DgNetModel& model, const std::vector<PoseSequence>& seqs,
    const std::vector<double>& sigmas, std::uint64_t seed,
    const EvalOptions& options = {});

}  // namespace dgnet

#endif  // DGNET_TRAIN_HPP_
