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


#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/ablation.hpp"
#include "dgnet/checkpoint.hpp"
#include "dgnet/config.hpp"
#include "dgnet/data.hpp"
#include "dgnet/error.hpp"
#include "dgnet/gradcheck.hpp"
#include "dgnet/model.hpp"
#include "dgnet/skeleton.hpp"
#include "dgnet/train.hpp"

namespace dgnet::cli {
namespace {

namespace fs = std::filesystem;

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

fs::path default_out_dir() {
  if (const char* e = std::getenv("DGNET_OUT_DIR"); e && *e) return e;
  return "dgnet_out";
}

SkeletonGraph skeleton_from(const std::string& path) {
  return path.empty() ? SkeletonGraph::human36m17() : load_skeleton(path);
}

void require_readable(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string(what) + " '" + path + "' is not readable");
}

// Creates `dir` and checks that files can be written into it.
void require_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path probe = dir / ".dgnet-write-probe";
  std::ofstream f(probe);
  if (ec || !f) {
    throw ValidationError("output directory '" + dir.string() + "' is not writable");
  }
  f.close();
  fs::remove(probe, ec);
}

void require_writable_file(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::app);
  if (!f) throw ValidationError("output file '" + path.string() + "' is not writable");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Error("failed to write '" + path.string() + "'");
}

// ---- Run configuration ------------------------------------------------------

struct RunConfig {
  TrainConfig train;
  VariantSpec variant;
  std::string data;
  std::string val_data;
  std::string out;
  std::string skeleton;
};

const std::vector<std::string>& train_keys() {
  static const std::vector<std::string> k{
      "epochs", "batch",  "lambda",    "supervision", "lr",
      "beta1",  "beta2",  "eps",       "decay",       "max_steps",
      "chunk",  "threads", "seed",     "check_finite", "log_every"};
  return k;
}

const std::vector<std::string>& path_keys() {
  static const std::vector<std::string> k{"data", "val_data", "out", "skeleton"};
  return k;
}

std::set<std::string> allowed_keys() {
  std::set<std::string> s(train_keys().begin(), train_keys().end());
  s.insert(path_keys().begin(), path_keys().end());
  for (const auto& [k, v] : variant_fields(VariantSpec{})) s.insert(k);
  return s;
}

std::size_t to_size(const std::string& v, const std::string& key) {
  const std::int64_t x = parse_int(v, key);
  if (x < 0) throw ConfigError(key + " must be non-negative, got " + v);
  return static_cast<std::size_t>(x);
}

void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  TrainConfig& t = c.train;
  if (key == "epochs") t.epochs = to_size(v, key);
  else if (key == "batch") t.batch = to_size(v, key);
  else if (key == "lambda") t.lambda = parse_double(v, key);
  else if (key == "supervision") t.supervision = parse_supervision(v);
  else if (key == "lr") t.adam.lr = parse_double(v, key);
  else if (key == "beta1") t.adam.beta1 = parse_double(v, key);
  else if (key == "beta2") t.adam.beta2 = parse_double(v, key);
  else if (key == "eps") t.adam.eps = parse_double(v, key);
  else if (key == "decay") t.adam.decay = parse_double(v, key);
  else if (key == "max_steps") t.max_steps = to_size(v, key);
  else if (key == "chunk") t.chunk = to_size(v, key);
  else if (key == "threads") t.threads = to_size(v, key);
  else if (key == "seed") t.seed = static_cast<std::uint64_t>(to_size(v, key));
  else if (key == "check_finite") t.check_finite = parse_bool(v, key);
  else if (key == "log_every") t.log_every = to_size(v, key);
  else if (key == "data") c.data = v;
  else if (key == "val_data") c.val_data = v;
  else if (key == "out") c.out = v;
  else if (key == "skeleton") c.skeleton = v;
  else if (!set_variant_field(c.variant, key, v)) {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// `seed` seeds both training and model initialization unless model_seed is
// given as well.
RunConfig resolve(const std::map<std::string, std::string>& merged) {
  RunConfig c;
  if (auto it = merged.find("seed"); it != merged.end()) {
    apply_key(c, "seed", it->second);
    c.variant.seed = c.train.seed;
  }
  for (const auto& [k, v] : merged) {
    if (k != "seed") apply_key(c, k, v);
  }
  return c;
}

std::vector<std::pair<std::string, std::string>> config_fields(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::vector<std::pair<std::string, std::string>> f{
      {"epochs", std::to_string(t.epochs)},
      {"batch", std::to_string(t.batch)},
      {"lambda", exact(t.lambda)},
      {"supervision", to_string(t.supervision)},
      {"lr", exact(t.adam.lr)},
      {"beta1", exact(t.adam.beta1)},
      {"beta2", exact(t.adam.beta2)},
      {"eps", exact(t.adam.eps)},
      {"decay", exact(t.adam.decay)},
      {"max_steps", std::to_string(t.max_steps)},
      {"chunk", std::to_string(t.chunk)},
      {"threads", std::to_string(t.threads)},
      {"seed", std::to_string(t.seed)},
      {"check_finite", t.check_finite ? "true" : "false"},
      {"log_every", std::to_string(t.log_every)},
      {"data", c.data},
      {"val_data", c.val_data},
      {"out", c.out},
      {"skeleton", c.skeleton},
  };
  for (auto& kv : variant_fields(c.variant)) f.push_back(std::move(kv));
  return f;
}

std::string format_config(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_fields(c)) {
    if (v.empty()) continue;
    s += k + " = " + v + "\n";
  }
  return s;
}

// Flags that override config keys; the flag name is the key with '-'.
const std::vector<std::string>& train_flag_keys() {
  static const std::vector<std::string> k{
      "epochs",    "batch",       "lambda",     "supervision", "lr",
      "decay",     "max_steps",   "seed",       "threads",     "chunk",
      "log_every", "check_finite", "channels",  "blocks",      "frames",
      "k_spatial", "k_temporal",  "weighting",  "connection_style", "dg_form",
      "nonlocal",  "spatial_stack", "temporal_stack"};
  return k;
}

const char* train_flag_help(const std::string& key) {
  static const std::map<std::string, const char*> h{
      {"epochs", "Training epochs"},
      {"batch", "Windows per optimizer step"},
      {"lambda", "Weight of the block losses in the total loss"},
      {"supervision", "total (network + lambda * blocks) or network"},
      {"lr", "Initial Adam learning rate"},
      {"decay", "Learning-rate factor applied after every epoch"},
      {"max_steps", "Stop after this many steps (0: no limit)"},
      {"seed", "Seed for shuffling and, unless model_seed is set, initialization"},
      {"threads", "Worker threads for the batch forward/backward"},
      {"chunk", "Windows per parallel gradient chunk"},
      {"log_every", "Write a step record every N steps"},
      {"check_finite", "Check every tape node for NaN/Inf"},
      {"channels", "Feature channels"},
      {"blocks", "DG-Conv blocks"},
      {"frames", "Input frames per window (T)"},
      {"k_spatial", "Neighbors per joint in DSG"},
      {"k_temporal", "Neighbors per joint in DTG"},
      {"weighting", "Weighting head: sigmoid, identity, eg or none"},
      {"connection_style", "dynamical, fixed, full, random, symmetry or precomputed"},
      {"dg_form", "factorized or unified"},
      {"nonlocal", "Non-local block after each unit"},
      {"spatial_stack", "Spatial unit layers, e.g. FSG+DSG"},
      {"temporal_stack", "Temporal unit layers, e.g. FTG+DTG+FTG"},
  };
  return h.at(key);
}

std::string dashed(std::string key) {
  for (char& ch : key) {
    if (ch == '_') ch = '-';
  }
  return key;
}

// ---- Tables -----------------------------------------------------------------

void write_eval_table(std::ostream& out, const EvalReport& r, const std::string& protocol) {
  if (protocol == "1") out << "action\tframes\tmpjpe_mm\n";
  else if (protocol == "2") out << "action\tframes\tmpjpe_mm\tp_mpjpe_mm\n";
  else out << "action\tframes\tpck\tauc\n";
  auto row = [&](const std::string& name, const Metrics& m) {
    out << name << '\t' << m.frames << '\t';
    if (protocol == "1") out << number(m.mpjpe);
    else if (protocol == "2") out << number(m.mpjpe) << '\t' << number(m.p_mpjpe);
    else out << number(m.pck) << '\t' << number(m.auc);
    out << '\n';
  };
  for (const auto& [action, m] : r.per_action) row(action, m);
  row("all", r.overall);
}

std::string matrix_tsv(const Tensor& m, const SkeletonGraph& sk) {
  const std::size_t n = m.dim(0);
  std::string s;
  for (std::size_t j = 0; j < n; ++j) {
    if (j) s += '\t';
    s += sk.names.size() == n ? sk.names[j] : "j" + std::to_string(j);
  }
  s += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j) s += '\t';
      s += exact(m.at(i, j));
    }
    s += '\n';
  }
  return s;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_double(trim(item), what));
  if (v.empty()) throw ConfigError(std::string(what) + ": empty list");
  return v;
}

// ---- Commands ---------------------------------------------------------------

struct Io {
  std::ostream& out;
  std::ostream& err;
};

struct SynthArgs {
  std::size_t count = 200;
  std::size_t frames = 64;
  std::string skeleton;
  std::uint64_t seed = 1;
  std::string out;
  bool no_actions = false;
};

int cmd_synth_gen(const SynthArgs& a, Io io) {
  const SkeletonGraph sk = skeleton_from(a.skeleton);
  const fs::path path = a.out.empty() ? default_out_dir() / "synth.jsonl" : fs::path(a.out);
  require_writable_file(path);
  SynthOptions o;
  o.actions = !a.no_actions;
  const auto seqs = generate_synthetic(a.count, a.frames, sk, a.seed, o);
  if (a.count == 0) io.err << "warning: count=0, writing an empty dataset\n";
  write_dataset(seqs, path);
  io.out << "wrote " << seqs.size() << " sequences to " << path.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // key -> value, only when given
};

int cmd_train(const TrainArgs& a, const CLI::App& sub, Io io) {
  std::map<std::string, std::string> merged;
  if (!a.config.empty()) {
    require_readable(a.config, "config file");
    const KeyValueFile kv = KeyValueFile::load(a.config);
    kv.reject_unknown(allowed_keys());
    for (const auto& [k, e] : kv.entries()) merged[k] = e.value;
  }
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    merged[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
  for (const auto& key : train_flag_keys()) {
    if (sub.get_option("--" + dashed(key))->count() > 0) merged[key] = a.flags.at(key);
  }
  for (const char* key : {"data", "val_data", "out", "skeleton"}) {
    if (sub.get_option("--" + dashed(key))->count() > 0) merged[key] = a.flags.at(key);
  }
  for (const auto& [k, v] : merged) {
    if (!allowed_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunConfig c = resolve(merged);
  if (c.out.empty()) c.out = default_out_dir().string();
  if (c.data.empty()) throw ConfigError("train: no dataset given (--data or data = ...)");

  // Everything is checked before training starts.
  c.train.validate();
  const SkeletonGraph sk = skeleton_from(c.skeleton);
  c.variant.validate(sk.joint_count);
  require_readable(c.data, "dataset");
  if (!c.val_data.empty()) require_readable(c.val_data, "validation dataset");
  const fs::path dir = c.out;
  require_writable_dir(dir);

  std::vector<PoseSequence> train_set, val_set;
  if (c.val_data.empty()) {
    std::tie(train_set, val_set) = split_validation(read_dataset(c.data, sk.joint_count));
  } else {
    train_set = read_dataset(c.data, sk.joint_count);
    val_set = read_dataset(c.val_data, sk.joint_count);
  }
  if (train_set.empty()) throw ValidationError("train: the dataset has no training sequences");

  auto model = configure_variant(c.variant, sk);
  io.out << "parameters: train " << model->parameter_count(true) << ", test "
         << model->parameter_count(false) << "\n";
  io.out << "sequences: train " << train_set.size() << ", validation " << val_set.size()
         << "\n";
  write_text(dir / "config.txt", format_config(c));
  std::ofstream log(dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw ValidationError("cannot open the training log in '" + dir.string() + "'");
  const TrainResult r = train(*model, train_set, val_set, c.train, &log);
  log.close();
  save_checkpoint(*model, dir / "model.ckpt");
  if (!r.log.empty()) {
    const LogRecord& last = r.log.back();
    io.out << "steps " << r.steps << ", final total loss " << number(last.loss.total);
    if (last.val_mpjpe >= 0.0) io.out << ", val mpjpe " << number(last.val_mpjpe) << " mm";
    io.out << "\n";
  }
  io.out << "wrote " << (dir / "model.ckpt").string() << " and "
         << (dir / "train_log.jsonl").string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string protocol = "1";
  bool balance = false;
  int scored_frame = -1;
  std::size_t threads = 1;
  double pck_threshold = 150.0;
  bool robustness = false;
  std::string sigmas = "0,5,10,15,20";
  std::uint64_t noise_seed = 1;
  std::string out;
};

int cmd_eval(const EvalArgs& a, Io io) {
  require_readable(a.checkpoint, "checkpoint");
  require_readable(a.data, "dataset");
  if (!a.out.empty()) require_writable_file(a.out);
  const std::vector<double> sigmas =
      a.robustness ? parse_list(a.sigmas, "--sigmas") : std::vector<double>{};
  auto model = load_checkpoint(a.checkpoint);
  const auto seqs = read_dataset(a.data, model->skeleton().joint_count);
  if (seqs.empty()) throw ValidationError("eval: the dataset is empty");
  EvalOptions o;
  o.balance = a.balance;
  o.scored_frame = a.scored_frame;
  o.threads = a.threads;
  o.pck.threshold = a.pck_threshold;
  std::ostringstream table;
  if (a.robustness) {
    table << "sigma_px\tmpjpe_mm\tp_mpjpe_mm\n";
    for (const RobustnessRow& r : run_robustness_protocol(*model, seqs, sigmas, a.noise_seed, o)) {
      table << number(r.sigma) << '\t' << number(r.mpjpe) << '\t' << number(r.p_mpjpe) << '\n';
    }
  } else {
    write_eval_table(table, evaluate(*model, seqs, o), a.protocol);
  }
  if (a.out.empty()) {
    io.out << table.str();
  } else {
    write_text(a.out, table.str());
    io.out << "wrote " << a.out << "\n";
  }
  return kExitOk;
}

struct GradcheckArgs {
  std::string layer = "fsg";
  std::size_t trials = 10;
  std::optional<double> tolerance;
  std::size_t samples = 16;
  std::uint64_t seed = 1;
  std::string weighting = "sigmoid";
};

int cmd_gradcheck(const GradcheckArgs& a, Io io) {
  const GradcheckTarget target = parse_gradcheck_target(a.layer);
  GradcheckOptions o;
  o.trials = a.trials;
  o.tolerance = a.tolerance.value_or(target == GradcheckTarget::kFullModel ? 1e-3 : 1e-4);
  o.samples = a.samples;
  o.seed = a.seed;
  o.weighting = parse_head_activation(a.weighting);
  if (o.trials == 0) throw ConfigError("--trials must be > 0");
  if (!(o.tolerance >= 0.0)) throw ConfigError("--tolerance must be >= 0");
  const GradcheckReport r = run_gradcheck(target, o);
  io.out << "group\tworst_rel_error\tchecked\tkinks\n";
  for (const GroupResult& g : r.groups) {
    io.out << g.name << '\t' << exact(g.worst) << '\t' << g.checked << '\t' << g.kinks << '\n';
  }
  io.err << "gradcheck " << to_string(target) << ": worst " << exact(r.worst)
         << ", tolerance " << exact(o.tolerance) << ", " << o.trials << " trials: "
         << (r.passed ? "PASS" : "FAIL") << "\n";
  return r.passed ? kExitOk : kExitRuntime;
}

struct DumpArgs {
  std::string checkpoint;
  std::string data;
  std::string seq_id;
  std::size_t frame = 0;
  std::size_t block = 1;
  std::string out;
};

int cmd_dump_affinity(const DumpArgs& a, Io io) {
  require_readable(a.checkpoint, "checkpoint");
  require_readable(a.data, "dataset");
  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  require_writable_dir(dir);
  auto model = load_checkpoint(a.checkpoint);
  const auto seqs = read_dataset(a.data, model->skeleton().joint_count);
  const PoseSequence* seq = nullptr;
  for (const auto& s : seqs) {
    if (s.seq_id == a.seq_id) {
      seq = &s;
      break;
    }
  }
  if (!seq) throw ValidationError("unknown seq-id '" + a.seq_id + "' in " + a.data);
  const AffinityDump d = dump_affinities(*model, *seq, a.frame, a.block);
  if (!d.has_spatial && !d.has_temporal) {
    throw ValidationError("block " + std::to_string(a.block) +
                          " has no dynamical layers to dump");
  }
  const SkeletonGraph& sk = model->skeleton();
  std::vector<std::string> written;
  if (d.has_spatial) {
    write_text(dir / "B_t.tsv", matrix_tsv(d.spatial, sk));
    written.push_back("B_t.tsv");
  }
  if (d.has_temporal) {
    write_text(dir / "Q_next.tsv", matrix_tsv(d.temporal_next, sk));
    write_text(dir / "Q_prev.tsv", matrix_tsv(d.temporal_prev, sk));
    written.push_back("Q_next.tsv");
    written.push_back("Q_prev.tsv");
  }
  io.out << "block " << a.block << ", " << a.seq_id << " frame " << a.frame << ":";
  for (const auto& w : written) io.out << " " << (dir / w).string();
  io.out << "\n";
  return kExitOk;
}

struct AblateArgs {
  std::string axis;
  std::string data;
  std::string skeleton;
  std::string out;
  AblationBudget budget;
};

int cmd_ablate(const AblateArgs& a, Io io) {
  const AblationAxis axis = parse_ablation_axis(a.axis);
  a.budget.validate();
  const SkeletonGraph sk = skeleton_from(a.skeleton);
  if (!a.data.empty()) require_readable(a.data, "dataset");
  const fs::path dir = a.out.empty() ? default_out_dir() : fs::path(a.out);
  require_writable_dir(dir);
  const auto data = a.data.empty()
                        ? generate_synthetic(a.budget.sequences, a.budget.frames, sk,
                                             a.budget.seed)
                        : read_dataset(a.data, sk.joint_count);
  const auto rows = run_ablation(axis, a.budget, data, sk, &io.err);
  std::ostringstream table;
  write_ablation_table(table, axis, rows);
  const fs::path path = dir / ("ablation_" + std::string(to_string(axis)) + ".tsv");
  write_text(path, table.str());
  io.out << table.str();
  io.err << "wrote " << path.string() << "\n";
  return kExitOk;
}

struct InfoArgs {
  std::string checkpoint;
  std::string config;
};

int cmd_info(const InfoArgs& a, Io io) {
  std::unique_ptr<DgNetModel> model;
  if (!a.checkpoint.empty()) {
    require_readable(a.checkpoint, "checkpoint");
    model = load_checkpoint(a.checkpoint);
  } else {
    std::map<std::string, std::string> merged;
    if (!a.config.empty()) {
      require_readable(a.config, "config file");
      const KeyValueFile kv = KeyValueFile::load(a.config);
      kv.reject_unknown(allowed_keys());
      for (const auto& [k, e] : kv.entries()) merged[k] = e.value;
    }
    const RunConfig c = resolve(merged);
    const SkeletonGraph sk = skeleton_from(c.skeleton);
    model = configure_variant(c.variant, sk);
  }
  io.out << "key\tvalue\n";
  for (const auto& [k, v] : variant_fields(model->variant())) io.out << k << '\t' << v << '\n';
  io.out << "joints\t" << model->skeleton().joint_count << '\n';
  io.out << "params_train\t" << model->parameter_count(true) << '\n';
  io.out << "params_test\t" << model->parameter_count(false) << '\n';
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DG-Net: 2D-to-3D human pose lifting with dynamical graph convolutions",
               "dgnet"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::function<int()> action;
  Io io{out, err};

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth-gen", "Write a synthetic pose dataset (JSON lines)");
  s->add_option("--count", synth.count, "Number of sequences");
  s->add_option("--frames", synth.frames, "Frames per sequence");
  s->add_option("--skeleton", synth.skeleton, "Skeleton file (default: built-in H36M-17)");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output file (default: $DGNET_OUT_DIR/synth.jsonl)");
  s->add_flag("--no-actions", synth.no_actions, "Leave the action label empty");
  s->callback([&] { action = [&] { return cmd_synth_gen(synth, io); }; });

  TrainArgs targs;
  RunConfig defaults;
  std::map<std::string, std::string> flag_defaults;
  for (const auto& [k, v] : config_fields(defaults)) flag_defaults[k] = v;
  CLI::App* t = app.add_subcommand("train", "Train a model; writes model.ckpt, train_log.jsonl, config.txt");
  t->add_option("--config", targs.config, "key = value config file; flags override it");
  t->add_option("--set", targs.sets, "Override any config key (key=value, repeatable)")
      ->default_str("");
  for (const char* key : {"data", "val_data", "out", "skeleton"}) {
    const std::string k = key;
    t->add_option("--" + dashed(k), targs.flags[k],
                  k == "data"       ? "Training dataset (JSON lines)"
                  : k == "val_data" ? "Validation dataset (default: hash split of --data)"
                  : k == "out"      ? "Output directory (default: $DGNET_OUT_DIR or dgnet_out)"
                                    : "Skeleton file (default: built-in H36M-17)");
  }
  for (const auto& k : train_flag_keys()) {
    t->add_option("--" + dashed(k), targs.flags[k], train_flag_help(k))
        ->default_str(flag_defaults[k]);
  }
  t->callback([&] { action = [&] { return cmd_train(targs, *t, io); }; });

  EvalArgs eargs;
  CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", eargs.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", eargs.data, "Dataset (JSON lines)")->required();
  e->add_option("--protocol", eargs.protocol, "1: MPJPE, 2: MPJPE and P-MPJPE, pck: PCK and AUC")
      ->check(CLI::IsMember({"1", "2", "pck"}));
  e->add_flag("--balance", eargs.balance, "Apply coordinate balancing");
  e->add_option("--scored-frame", eargs.scored_frame,
                "Window position scored per frame (-1: center)");
  e->add_option("--threads", eargs.threads, "Worker threads");
  e->add_option("--pck-threshold", eargs.pck_threshold, "PCK threshold (mm)");
  e->add_flag("--robustness", eargs.robustness,
              "Report MPJPE and P-MPJPE under 2D Gaussian noise instead");
  e->add_option("--sigmas", eargs.sigmas, "Noise levels in pixels (comma separated)");
  e->add_option("--noise-seed", eargs.noise_seed, "Noise seed");
  e->add_option("--out", eargs.out, "Write the table to this file instead of stdout");
  e->callback([&] { action = [&] { return cmd_eval(eargs, io); }; });

  GradcheckArgs gargs;
  double tolerance = -1.0;
  CLI::App* g = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  g->add_option("--layer", gargs.layer, "fsg, dsg, ftg, dtg, nonlocal or full-model")
      ->check(CLI::IsMember({"fsg", "dsg", "ftg", "dtg", "nonlocal", "full-model"}));
  g->add_option("--trials", gargs.trials, "Random trials");
  g->add_option("--tolerance", tolerance,
                "Max relative error (default 1e-4 for layers, 1e-3 for full-model; 0 always fails)")
      ->default_str("auto");
  g->add_option("--samples", gargs.samples, "Coordinates checked per parameter tensor and trial");
  g->add_option("--seed", gargs.seed, "Seed");
  g->add_option("--weighting", gargs.weighting, "Weighting head: sigmoid, identity, eg, none");
  g->callback([&] {
    if (g->get_option("--tolerance")->count() > 0) gargs.tolerance = tolerance;
    action = [&] { return cmd_gradcheck(gargs, io); };
  });

  DumpArgs dargs;
  CLI::App* d = app.add_subcommand("dump-affinity",
                                   "Write block affinities B_t, Q_{t+1}, Q_{t-1} as TSV matrices");
  d->add_option("--checkpoint", dargs.checkpoint, "Checkpoint file")->required();
  d->add_option("--data", dargs.data, "Dataset (JSON lines)")->required();
  d->add_option("--seq-id", dargs.seq_id, "Sequence id")->required();
  d->add_option("--frame", dargs.frame, "Frame index");
  d->add_option("--block", dargs.block, "DG-Conv block (1-based)");
  d->add_option("--out", dargs.out, "Output directory (default: $DGNET_OUT_DIR or dgnet_out)");
  d->callback([&] { action = [&] { return cmd_dump_affinity(dargs, io); }; });

  AblateArgs aargs;
  CLI::App* a = app.add_subcommand("ablate", "Train every variant of one ablation axis");
  std::vector<std::string> axis_names;
  for (AblationAxis ax : all_ablation_axes()) axis_names.push_back(to_string(ax));
  a->add_option("--axis", aargs.axis, "Ablation axis")->required()->check(CLI::IsMember(axis_names));
  a->add_option("--data", aargs.data, "Dataset (default: synthetic, per budget)");
  a->add_option("--skeleton", aargs.skeleton, "Skeleton file (default: built-in H36M-17)");
  a->add_option("--out", aargs.out, "Output directory (default: $DGNET_OUT_DIR or dgnet_out)");
  a->add_option("--sequences", aargs.budget.sequences, "Synthetic sequences");
  a->add_option("--frames", aargs.budget.frames, "Frames per synthetic sequence");
  a->add_option("--channels", aargs.budget.channels, "Feature channels");
  a->add_option("--epochs", aargs.budget.epochs, "Epochs per variant");
  a->add_option("--batch", aargs.budget.batch, "Batch size");
  a->add_option("--lr", aargs.budget.lr, "Initial learning rate");
  a->add_option("--seed", aargs.budget.seed, "Seed for data, models and training");
  a->callback([&] { action = [&] { return cmd_ablate(aargs, io); }; });

  InfoArgs iargs;
  CLI::App* inf = app.add_subcommand("info", "Print a variant and its parameter counts");
  auto* ck = inf->add_option("--checkpoint", iargs.checkpoint, "Checkpoint file");
  inf->add_option("--config", iargs.config, "Config file (default: the default variant)")
      ->excludes(ck);
  inf->callback([&] { action = [&] { return cmd_info(iargs, io); }; });

  std::vector<const char*> argv{"dgnet"};
  for (const auto& s2 : args) argv.push_back(s2.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    return action ? action() : kExitValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex);
  }
}

}  // namespace dgnet::cli
