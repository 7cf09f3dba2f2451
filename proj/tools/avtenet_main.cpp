#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "avtenet/checkpoint.hpp"
#include "avtenet/errors.hpp"
#include "avtenet/harness.hpp"

namespace fs = std::filesystem;
using namespace avtenet;

namespace {

const char* kUsage = R"(avtenet - audio-visual forgery detection pipeline

usage: avtenet <command> [flags]

commands:
  gen-data        synthesize a dataset (media + manifest)
  train           train one classifier from scratch
  train-ensemble  train a fusion head on frozen components
  eval            evaluate a model or an ensemble on a test subset
  describe        print parameter counts of a checkpoint
  gradcheck       finite-difference gradient audit of a classifier

common flags:
  --config PATH   key=value overlay file ('#' comments); precedence is
                  flag > config > AVTENET_SEED (seed only) > default
  --help          show the command's flags

exit codes: 0 ok, 1 verification failure, 2 usage, 3 I/O, 4 empty data,
            5 numeric divergence, 6 checkpoint mismatch
)";

const std::map<std::string, std::string> kCommandUsage = {
    {"gen-data", R"(usage: avtenet gen-data --out DIR [flags]
  --out DIR            output directory (created; must be empty unless --force)
  --seed N             global seed (default 42, env AVTENET_SEED)
  --counts SPEC        per-category training counts, e.g.
                       "RvRa=10,RvFa=10,FvRa=10,FvFa=10"; when given, the
                       balance/test blocks default to 0 unless set explicitly
  --balance-factor N   extra pristine pool = N * RvRa count (default 2)
  --test-reals N       pristine test clips shared by all subsets (default 60)
  --test-fakes N       manipulated test clips per subset (default 60)
  --train-subjects N   training speaker pool (default 40)
  --test-subjects N    held-out speaker pool (default 12)
  --jobs N             parallel synthesis workers (default 1)
  --force              write into a non-empty directory
)"},
    {"train", R"(usage: avtenet train --network KIND --data DIR --out CKPT [flags]
  --network KIND   vn | an | avn-fused | avn-concat
  --data DIR       dataset directory (manifest.ndjson + media)
  --out CKPT       checkpoint file to write
  --lr F           Adam learning rate (default 1e-3)
  --epochs N       training epochs (default 5; 0 writes the initialization)
  --batch N        batch size (default 16)
  --seed N         init + shuffle seed (default 42, env AVTENET_SEED)
  --dim/--heads/--layers/--ffn N   width knobs (defaults 64/4/2/128)
)"},
    {"train-ensemble", R"(usage: avtenet train-ensemble --strategy S --components V A AV --data DIR --out CKPT [flags]
  --strategy S      sf | ff (mv/asf have nothing to train)
  --components V A AV   three frozen component checkpoints, in that order
  --data DIR        dataset directory
  --out CKPT        fusion-head checkpoint to write
  --lr F            Adam learning rate (default 2e-3)
  --epochs N        training epochs (default 5)
  --batch N         batch size (default 16)
  --seed N          head init + shuffle seed (default 42, env AVTENET_SEED)
  --jobs N          parallel component evaluation workers (default 1)
  --dim/--heads/--layers/--ffn N   component width knobs (defaults 64/4/2/128)
)"},
    {"eval", R"(usage: avtenet eval (--model KIND --ckpt C | --ensemble S --ckpt V A AV [HEAD]) --data DIR --subset NAME [flags]
  --model KIND          evaluate one network (vn | an | avn-fused | avn-concat)
  --ensemble S          evaluate a fusion strategy (mv | asf | sf | ff);
                        sf/ff take the trained head as the fourth --ckpt path
  --ckpt PATHS          checkpoint path(s) as above
  --data DIR            dataset directory
  --subset NAME         visual-only | audio-only | both | mixed-i | mixed-ii | full
  --jobs N              parallel evaluation workers (default 1)
  --json PATH           also write the JSON report
  --md PATH             also write the markdown report
  --dump-embeddings P   write per-sample embeddings (checkpoint format)
)"},
    {"describe", R"(usage: avtenet describe --ckpt PATH
  --ckpt PATH   checkpoint to inspect (prints per-prefix and total counts)
)"},
    {"gradcheck", R"(usage: avtenet gradcheck --network KIND [--seed N]
  --network KIND   vn | an | avn-fused | avn-concat
  --seed N         perturbation sampling seed (default 1)

Runs the classifier at reduced widths (dim 8, heads 2, layers 1, ffn 16) on
two synthesized clips and compares analytic against central finite-difference
gradients. Prints max_rel_err; exits 1 when it exceeds 1e-4.
)"}};

void print_usage(std::ostream& os, const std::string& cmd) {
  auto it = kCommandUsage.find(cmd);
  os << (it == kCommandUsage.end() ? kUsage : it->second);
}

// Flag store with flag > config > env(seed) > default precedence.
class Options {
 public:
  Options(const std::string& cmd, int argc, char** argv,
          const std::set<std::string>& value_keys, const std::set<std::string>& bool_keys,
          const std::set<std::string>& multi_keys = {})
      : cmd_(cmd) {
    std::vector<std::string> args(argv, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string key = args[i];
      if (key == "--help") {
        help_ = true;
        continue;
      }
      if (key.rfind("--", 0) != 0) throw usage_error(cmd + ": expected a flag, got '" + key + "'");
      key = key.substr(2);
      std::string value;
      bool has_value = false;
      const std::size_t eq = key.find('=');
      if (eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
        has_value = true;
      }
      if (bool_keys.count(key)) {
        if (has_value) throw usage_error(cmd + ": flag --" + key + " takes no value");
        flags_[key] = "true";
        continue;
      }
      if (multi_keys.count(key)) {
        if (has_value) throw usage_error(cmd + ": pass --" + key + " values separately");
        std::vector<std::string> vals;
        while (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) vals.push_back(args[++i]);
        if (vals.empty()) throw usage_error(cmd + ": flag --" + key + " needs at least one value");
        multi_[key] = std::move(vals);
        continue;
      }
      if (!value_keys.count(key) && key != "config")
        throw usage_error(cmd + ": unknown flag --" + key);
      if (!has_value) {
        if (i + 1 >= args.size()) throw usage_error(cmd + ": flag --" + key + " needs a value");
        value = args[++i];
      }
      flags_[key] = value;
    }

    if (flags_.count("config")) {
      std::ifstream in(flags_["config"]);
      if (!in) throw io_error(cmd + ": cannot open config file " + flags_["config"]);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
          throw usage_error(cmd + ": config line " + std::to_string(line_no) +
                            " is not key=value");
        const std::string key = line.substr(0, eq);
        if (!value_keys.count(key) && !bool_keys.count(key))
          throw usage_error(cmd + ": config sets unknown key '" + key + "'");
        config_[key] = line.substr(eq + 1);
      }
    }
  }

  bool help() const { return help_; }

  bool has(const std::string& key) const { return flags_.count(key) || config_.count(key); }
  bool has_flag(const std::string& key) const { return flags_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto f = flags_.find(key);
    if (f != flags_.end()) return f->second;
    auto c = config_.find(key);
    if (c != config_.end()) return c->second;
    return fallback;
  }

  std::string require(const std::string& key) const {
    if (!has(key)) throw usage_error(cmd_ + ": missing required flag --" + key);
    return get(key, "");
  }

  bool get_bool(const std::string& key) const {
    const std::string v = get(key, "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw usage_error(cmd_ + ": '" + v + "' is not a boolean for --" + key);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    return parse_u64(key, get(key, ""));
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw usage_error(cmd_ + ": '" + v + "' is not a number for --" + key);
    }
  }

  // flag > config > AVTENET_SEED > fallback.
  std::uint64_t get_seed(std::uint64_t fallback) const {
    if (has("seed")) return get_u64("seed", fallback);
    if (const char* env = std::getenv("AVTENET_SEED")) return parse_u64("seed (env)", env);
    return fallback;
  }

  std::vector<std::string> get_multi(const std::string& key) const {
    auto it = multi_.find(key);
    return it == multi_.end() ? std::vector<std::string>{} : it->second;
  }

 private:
  std::uint64_t parse_u64(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const unsigned long long u = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return u;
    } catch (const std::exception&) {
      throw usage_error(cmd_ + ": '" + v + "' is not an unsigned integer for --" + key);
    }
  }

  std::string cmd_;
  bool help_ = false;
  std::map<std::string, std::string> flags_;
  std::map<std::string, std::string> config_;
  std::map<std::string, std::vector<std::string>> multi_;
};

NetDims dims_from(const Options& opt) {
  NetDims d;
  d.dim = opt.get_u64("dim", d.dim);
  d.heads = opt.get_u64("heads", d.heads);
  d.layers = opt.get_u64("layers", d.layers);
  d.ffn = opt.get_u64("ffn", d.ffn);
  return d;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("cannot open file for hashing: " + p.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Manifest load_data_dir(const fs::path& data) { return load_manifest(data / "manifest.ndjson"); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw io_error("cannot write " + p.string());
  out << text;
  if (!out) throw io_error("failed while writing " + p.string());
}

// ----- subcommands -----

int cmd_gen_data(const Options& opt) {
  GenConfig cfg;
  cfg.seed = opt.get_seed(cfg.seed);
  if (opt.has("counts")) {
    cfg.train_counts = {0, 0, 0, 0};
    // The counts spec describes exactly what to generate; the other blocks
    // stay empty unless their flags are given.
    cfg.balance_factor = 0;
    cfg.test_reals = 0;
    cfg.test_fakes_per_subset = 0;
    std::stringstream ss(opt.get("counts", ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos)
        throw usage_error("gen-data: counts entry '" + item + "' is not NAME=N");
      const Category c = [&] {
        try {
          return category_from_string(item.substr(0, eq));
        } catch (const std::invalid_argument& e) {
          throw usage_error(std::string("gen-data: ") + e.what());
        }
      }();
      try {
        std::size_t pos = 0;
        const std::string num = item.substr(eq + 1);
        cfg.train_counts[static_cast<std::size_t>(c)] = std::stoull(num, &pos);
        if (pos != num.size()) throw std::invalid_argument(num);
      } catch (const std::exception&) {
        throw usage_error("gen-data: counts entry '" + item + "' needs an unsigned count");
      }
    }
  }
  cfg.balance_factor = opt.get_u64("balance-factor", cfg.balance_factor);
  cfg.test_reals = opt.get_u64("test-reals", cfg.test_reals);
  cfg.test_fakes_per_subset = opt.get_u64("test-fakes", cfg.test_fakes_per_subset);
  cfg.train_subjects = opt.get_u64("train-subjects", cfg.train_subjects);
  cfg.test_subjects = opt.get_u64("test-subjects", cfg.test_subjects);
  const int jobs = static_cast<int>(opt.get_u64("jobs", 1));

  const fs::path out = opt.require("out");
  if (fs::exists(out) && !fs::is_directory(out)) throw io_error(out.string() + " is not a directory");
  if (fs::exists(out) && !fs::is_empty(out) && !opt.get_bool("force"))
    throw io_error(out.string() + " is not empty (pass --force to overwrite)");

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw usage_error(std::string("gen-data: ") + e.what());
  }
  const Manifest m = generate_dataset(cfg, out, jobs, &std::cout);
  std::cout << "digest " << m.digest << "\n";
  return 0;
}

int cmd_train(const Options& opt) {
  const NetKind kind = [&] {
    try {
      return net_kind_from_string(opt.require("network"));
    } catch (const std::invalid_argument& e) {
      throw usage_error(std::string("train: ") + e.what());
    }
  }();
  const fs::path data = opt.require("data");
  const fs::path out = opt.require("out");
  TrainConfig cfg;
  cfg.lr = opt.get_double("lr", cfg.lr);
  cfg.epochs = opt.get_u64("epochs", cfg.epochs);
  cfg.batch = opt.get_u64("batch", cfg.batch);
  cfg.seed = opt.get_seed(cfg.seed);

  const Manifest m = load_data_dir(data);
  const TrainResult result = train_network(kind, dims_from(opt), m, data, cfg, &std::cout);
  save_checkpoint(out, result.params);
  std::cout << "wrote " << out.string() << " (" << parameter_count(result.params)
            << " parameters)\n";
  return 0;
}

int cmd_train_ensemble(const Options& opt) {
  const Strategy strat = [&] {
    try {
      return strategy_from_string(opt.require("strategy"));
    } catch (const std::invalid_argument& e) {
      throw usage_error(std::string("train-ensemble: ") + e.what());
    }
  }();
  if (strat == Strategy::mv || strat == Strategy::asf)
    throw usage_error("train-ensemble: strategy '" + strategy_name(strat) +
                      "' has no trainable parameters (only sf and ff are trained)");

  const std::vector<std::string> comp = opt.get_multi("components");
  if (comp.size() != 3)
    throw usage_error("train-ensemble: --components needs exactly 3 paths (video, audio, av)");
  const fs::path data = opt.require("data");
  const fs::path out = opt.require("out");
  const int jobs = static_cast<int>(opt.get_u64("jobs", 1));

  FusionTrainConfig cfg;
  cfg.lr = opt.get_double("lr", cfg.lr);
  cfg.epochs = opt.get_u64("epochs", cfg.epochs);
  cfg.batch = opt.get_u64("batch", cfg.batch);
  cfg.seed = opt.get_seed(cfg.seed);

  const NetDims dims = dims_from(opt);
  std::vector<std::uint64_t> before;
  for (const std::string& p : comp) before.push_back(file_hash(p));
  const Model video = load_model(comp[0], dims);
  const Model audio = load_model(comp[1], dims);
  const Model av = load_model(comp[2], dims);
  if (video.kind() != NetKind::vn)
    throw checkpoint_mismatch_error("first component must be the video network");
  if (audio.kind() != NetKind::an)
    throw checkpoint_mismatch_error("second component must be the audio network");
  if (av.kind() != NetKind::avn_fused && av.kind() != NetKind::avn_concat)
    throw checkpoint_mismatch_error("third component must be an audio-visual network");

  const Manifest m = load_data_dir(data);
  std::vector<std::size_t> records;
  for (const LabeledSample& ls : build_training_set(m, TrainTarget::avn))
    records.push_back(ls.record_index);
  if (records.empty()) throw empty_data_error("train-ensemble: manifest has no training records");

  const std::vector<ComponentRow> rows = run_components(video, audio, av, m, records, data, jobs);
  const std::vector<FusionExample> examples = fusion_examples(strat, rows);
  const FusionHead head = train_fusion_head(strat, examples, cfg, &std::cout);
  save_checkpoint(out, fusion_head_params(head));

  for (std::size_t i = 0; i < comp.size(); ++i) {
    const std::uint64_t after = file_hash(comp[i]);
    if (after != before[i])
      throw checkpoint_mismatch_error("component changed during fusion training: " + comp[i]);
    std::cout << "component " << comp[i] << " hash " << hex64(after) << " unchanged\n";
  }
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_eval(const Options& opt) {
  const bool single = opt.has("model");
  const bool ens = opt.has("ensemble");
  if (single == ens)
    throw usage_error("eval: pass exactly one of --model KIND or --ensemble STRATEGY");
  const std::vector<std::string> ckpts = opt.get_multi("ckpt");
  const fs::path data = opt.require("data");
  const std::string subset = lower(opt.require("subset"));
  const int jobs = static_cast<int>(opt.get_u64("jobs", 1));
  const NetDims dims = dims_from(opt);

  const Manifest m = load_data_dir(data);
  const std::vector<std::size_t> records = [&] {
    try {
      return subset_indices(m, subset);
    } catch (const std::invalid_argument& e) {
      throw usage_error(std::string("eval: ") + e.what());
    }
  }();

  EvalReport report;
  if (single) {
    const NetKind kind = [&] {
      try {
        return net_kind_from_string(opt.get("model", ""));
      } catch (const std::invalid_argument& e) {
        throw usage_error(std::string("eval: ") + e.what());
      }
    }();
    if (ckpts.size() != 1) throw usage_error("eval: --model takes exactly one --ckpt path");
    const Model model = load_model(ckpts[0], dims);
    if (model.kind() != kind)
      throw checkpoint_mismatch_error("checkpoint holds a " + net_kind_name(model.kind()) +
                                      " but --model asked for " + net_kind_name(kind));
    const std::vector<ScoredSample> rows = run_model(model, m, records, data, jobs);
    std::vector<int> pred, truth;
    std::vector<double> scores;
    for (const ScoredSample& r : rows) {
      pred.push_back(r.pred_fake);
      truth.push_back(r.truth_fake);
      scores.push_back(r.score_fake);
    }
    report = make_report(net_kind_name(kind), std::nullopt, subset, m.digest, pred, truth, scores);
    if (opt.has("dump-embeddings")) {
      const std::string tag = kind == NetKind::vn ? "E_v" : (kind == NetKind::an ? "E_a" : "E_av");
      dump_embeddings(opt.get("dump-embeddings", ""), rows, tag);
    }
  } else {
    const Strategy strat = [&] {
      try {
        return strategy_from_string(lower(opt.get("ensemble", "")));
      } catch (const std::invalid_argument& e) {
        throw usage_error(std::string("eval: ") + e.what());
      }
    }();
    const bool learned = strat == Strategy::sf || strat == Strategy::ff;
    if (ckpts.size() != (learned ? 4u : 3u))
      throw usage_error(std::string("eval: --ensemble ") + strategy_name(strat) + " takes " +
                        (learned ? "4" : "3") + " --ckpt paths (video, audio, av" +
                        (learned ? ", head)" : ")"));
    const Model video = load_model(ckpts[0], dims);
    const Model audio = load_model(ckpts[1], dims);
    const Model av = load_model(ckpts[2], dims);
    if (video.kind() != NetKind::vn)
      throw checkpoint_mismatch_error("first component must be the video network");
    if (audio.kind() != NetKind::an)
      throw checkpoint_mismatch_error("second component must be the audio network");
    if (av.kind() != NetKind::avn_fused && av.kind() != NetKind::avn_concat)
      throw checkpoint_mismatch_error("third component must be an audio-visual network");
    FusionHead head;
    if (learned) head = fusion_head_from_params(strat, load_checkpoint(ckpts[3]));

    const std::vector<ComponentRow> rows = run_components(video, audio, av, m, records, data, jobs);
    std::vector<int> pred, truth;
    std::vector<double> scores;
    for (const ComponentRow& r : rows) {
      const EnsembleDecision d = decide(strat, r.outputs, learned ? &head : nullptr);
      pred.push_back(d.label);
      truth.push_back(r.truth_fake);
      scores.push_back(d.fused_score);
    }
    report = make_report("avtenet", strategy_name(strat), subset, m.digest, pred, truth, scores);
    if (opt.has("dump-embeddings"))
      dump_component_embeddings(opt.get("dump-embeddings", ""), rows, true);
  }

  const std::string md = report_markdown(report);
  std::cout << md;
  if (opt.has("json")) write_text(opt.get("json", ""), report_json(report));
  if (opt.has("md")) write_text(opt.get("md", ""), md);
  return 0;
}

int cmd_describe(const Options& opt) {
  const ParameterSet ps = load_checkpoint(opt.require("ckpt"));
  std::map<std::string, std::size_t> by_prefix;
  std::size_t total = 0;
  for (const auto& [name, t] : ps) {
    const std::size_t dot = name.find('.');
    by_prefix[dot == std::string::npos ? name : name.substr(0, dot)] += t.numel();
    total += t.numel();
  }
  for (const auto& [prefix, count] : by_prefix)
    std::cout << prefix << " " << count << "\n";
  std::cout << "total " << total << "\n";
  return 0;
}

int cmd_gradcheck(const Options& opt) {
  const NetKind kind = [&] {
    try {
      return net_kind_from_string(opt.require("network"));
    } catch (const std::invalid_argument& e) {
      throw usage_error(std::string("gradcheck: ") + e.what());
    }
  }();
  const std::uint64_t seed = opt.get_seed(1);
  const NetDims dims{8, 2, 1, 16};  // reduced widths, full input geometry

  // One pristine and one fully manipulated clip, synthesized in memory.
  const AVSample real = generate_sample(seed, 0, 0, Category::RvRa);
  const AVSample fake = generate_sample(seed, 1, 1, Category::FvFa);
  const std::vector<double> y_real = {1.0, 0.0};

  ParameterSet* params = nullptr;
  std::function<Tensor()> forward;

  VideoNet vn(dims);
  AudioNet an(dims);
  FusedAVNet fused(dims);
  ConcatAVNet concat_net(dims);
  auto media_fb = [](const AVSample& s) {
    return log_filterbank(s.waveform, FusedAVNet::kFilters, AudioNet::kWin, AudioNet::kHop,
                          AudioNet::kNfft, FusedAVNet::kAudioFrames);
  };
  auto batch_loss = [&](auto&& f) {
    std::vector<Tensor> preds;
    preds.push_back(slice(softmax(f(real).logits, 0), 0, 0, 1));
    preds.push_back(slice(softmax(f(fake).logits, 0), 0, 0, 1));
    return bce_loss(concat(0, preds), y_real);
  };
  switch (kind) {
    case NetKind::vn:
      vn.init(seed);
      params = &vn.params();
      forward = [&] { return batch_loss([&](const AVSample& s) { return vn.forward(s.frames); }); };
      break;
    case NetKind::an:
      an.init(seed);
      params = &an.params();
      forward = [&] {
        return batch_loss([&](const AVSample& s) { return an.forward(s.waveform); });
      };
      break;
    case NetKind::avn_fused:
      fused.init(seed);
      params = &fused.params();
      forward = [&] {
        return batch_loss([&](const AVSample& s) {
          return fused.forward(media_fb(s), crop_lip(s.frames, s.lip_box));
        });
      };
      break;
    case NetKind::avn_concat:
      concat_net.init(seed);
      params = &concat_net.params();
      forward = [&] {
        return batch_loss([&](const AVSample& s) { return concat_net.forward(s.waveform, s.frames); });
      };
      break;
  }

  const double worst = grad_check(forward, *params, 1e-5, mix_seed(seed, 7), 2);
  std::cout << "max_rel_err " << worst << "\n";
  if (!(worst <= 1e-4)) {
    std::cerr << "gradient check failed: max relative error " << worst << " exceeds 1e-4\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  const std::string cmd = argv[1];
  if (cmd == "--help" || cmd == "help") {
    std::cout << kUsage;
    return 0;
  }

  try {
    if (cmd == "gen-data") {
      Options opt(cmd, argc - 2, argv + 2,
                  {"out", "seed", "counts", "balance-factor", "test-reals", "test-fakes",
                   "train-subjects", "test-subjects", "jobs"},
                  {"force"});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_gen_data(opt);
    }
    if (cmd == "train") {
      Options opt(cmd, argc - 2, argv + 2,
                  {"network", "data", "out", "lr", "epochs", "batch", "seed", "dim", "heads",
                   "layers", "ffn"},
                  {});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_train(opt);
    }
    if (cmd == "train-ensemble") {
      Options opt(cmd, argc - 2, argv + 2,
                  {"strategy", "data", "out", "lr", "epochs", "batch", "seed", "jobs", "dim",
                   "heads", "layers", "ffn"},
                  {}, {"components"});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_train_ensemble(opt);
    }
    if (cmd == "eval") {
      Options opt(cmd, argc - 2, argv + 2,
                  {"model", "ensemble", "data", "subset", "jobs", "json", "md",
                   "dump-embeddings", "dim", "heads", "layers", "ffn"},
                  {}, {"ckpt"});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_eval(opt);
    }
    if (cmd == "describe") {
      Options opt(cmd, argc - 2, argv + 2, {"ckpt"}, {});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_describe(opt);
    }
    if (cmd == "gradcheck") {
      Options opt(cmd, argc - 2, argv + 2, {"network", "seed"}, {});
      if (opt.help()) {
        print_usage(std::cout, cmd);
        return 0;
      }
      return cmd_gradcheck(opt);
    }
    std::cerr << "error: unknown command '" << cmd << "'\n" << kUsage;
    return 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_usage(std::cerr, cmd);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const empty_data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const checkpoint_mismatch_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
