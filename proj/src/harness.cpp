#include "avtenet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "avtenet/checkpoint.hpp"
#include "avtenet/errors.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace avtenet {

namespace {

double ratio_or_zero(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

ClassMetrics metrics_from(double tp, double fp, double fn) {
  ClassMetrics m;
  m.precision = ratio_or_zero(tp, tp + fp);
  m.recall = ratio_or_zero(tp, tp + fn);
  m.f1 = ratio_or_zero(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

}  // namespace

ConfusionCounts count_confusion(const std::vector<int>& pred_fake,
                                const std::vector<int>& truth_fake) {
  if (pred_fake.size() != truth_fake.size())
    throw std::invalid_argument("confusion: prediction/label length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred_fake.size(); ++i) {
    const int p = pred_fake[i], t = truth_fake[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1))
      throw std::invalid_argument("confusion: labels must be 0 or 1");
    if (t == 1)
      (p == 1 ? c.tp : c.fn) += 1;
    else
      (p == 1 ? c.fp : c.tn) += 1;
  }
  return c;
}

ClassMetrics fake_class_metrics(const ConfusionCounts& c) {
  return metrics_from(static_cast<double>(c.tp), static_cast<double>(c.fp),
                      static_cast<double>(c.fn));
}

ClassMetrics real_class_metrics(const ConfusionCounts& c) {
  // Positive class swapped: real hits are TN, false reals are FN, missed
  // reals are FP.
  return metrics_from(static_cast<double>(c.tn), static_cast<double>(c.fn),
                      static_cast<double>(c.fp));
}

double accuracy_of(const ConfusionCounts& c) {
  return ratio_or_zero(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
}

double auc_score(const std::vector<double>& scores_fake, const std::vector<int>& truth_fake) {
  if (scores_fake.size() != truth_fake.size())
    throw std::invalid_argument("auc: score/label length mismatch");
  const std::size_t n = scores_fake.size();
  std::size_t n_pos = 0;
  for (int t : truth_fake) {
    if (t != 0 && t != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(t);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores_fake[a] < scores_fake[b]; });

  // Average ranks across ties, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores_fake[order[j + 1]] == scores_fake[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (truth_fake[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

// ----- training -----

namespace {

Spectrogram fused_filterbank(const Waveform& w) {
  return log_filterbank(w, FusedAVNet::kFilters, AudioNet::kWin, AudioNet::kHop,
                        AudioNet::kNfft, FusedAVNet::kAudioFrames);
}

struct Trainer {
  virtual ~Trainer() = default;
  virtual void init(std::uint64_t seed) = 0;
  virtual ParameterSet& params() = 0;
  virtual void prepare(const SampleMedia& media) = 0;
  virtual NetOutput forward(std::size_t cached) const = 0;
};

struct VnTrainer final : Trainer {
  VideoNet net;
  std::vector<VideoNet::Input> cache;
  explicit VnTrainer(const NetDims& d) : net(d) {}
  void init(std::uint64_t s) override { net.init(s); }
  ParameterSet& params() override { return net.params(); }
  void prepare(const SampleMedia& m) override { cache.push_back(net.prepare(m.frames)); }
  NetOutput forward(std::size_t i) const override { return net.forward(cache[i]); }
};

struct AnTrainer final : Trainer {
  AudioNet net;
  std::vector<AudioNet::Input> cache;
  explicit AnTrainer(const NetDims& d) : net(d) {}
  void init(std::uint64_t s) override { net.init(s); }
  ParameterSet& params() override { return net.params(); }
  void prepare(const SampleMedia& m) override { cache.push_back(net.prepare(m.wav)); }
  NetOutput forward(std::size_t i) const override { return net.forward(cache[i]); }
};

struct FusedTrainer final : Trainer {
  FusedAVNet net;
  std::vector<FusedAVNet::Input> cache;
  explicit FusedTrainer(const NetDims& d) : net(d) {}
  void init(std::uint64_t s) override { net.init(s); }
  ParameterSet& params() override { return net.params(); }
  void prepare(const SampleMedia& m) override {
    cache.push_back(net.prepare(fused_filterbank(m.wav), crop_lip(m.frames, m.lip_box)));
  }
  NetOutput forward(std::size_t i) const override { return net.forward(cache[i]); }
};

struct ConcatTrainer final : Trainer {
  ConcatAVNet net;
  std::vector<ConcatAVNet::Input> cache;
  explicit ConcatTrainer(const NetDims& d) : net(d) {}
  void init(std::uint64_t s) override { net.init(s); }
  ParameterSet& params() override { return net.params(); }
  void prepare(const SampleMedia& m) override { cache.push_back(net.prepare(m.wav, m.frames)); }
  NetOutput forward(std::size_t i) const override { return net.forward(cache[i]); }
};

std::unique_ptr<Trainer> make_trainer(NetKind kind, const NetDims& dims) {
  switch (kind) {
    case NetKind::vn: return std::make_unique<VnTrainer>(dims);
    case NetKind::an: return std::make_unique<AnTrainer>(dims);
    case NetKind::avn_fused: return std::make_unique<FusedTrainer>(dims);
    case NetKind::avn_concat: return std::make_unique<ConcatTrainer>(dims);
  }
  throw std::invalid_argument("unknown network kind");
}

TrainTarget target_of(NetKind kind) {
  switch (kind) {
    case NetKind::vn: return TrainTarget::vn;
    case NetKind::an: return TrainTarget::an;
    default: return TrainTarget::avn;
  }
}

}  // namespace

SampleMedia load_media(const std::filesystem::path& root, const ManifestRecord& rec) {
  SampleMedia sm;
  sm.wav = read_wav(root / rec.wav_path);
  sm.frames = read_frames_dir(root / rec.frames_dir, kVideoFrames);
  sm.lip_box = rec.lip_box;
  return sm;
}

TrainResult train_network(NetKind kind, const NetDims& dims, const Manifest& m,
                          const std::filesystem::path& root, const TrainConfig& cfg,
                          std::ostream* log) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (cfg.batch == 0) throw std::invalid_argument("train: batch must be positive");

  const std::vector<LabeledSample> labeled = build_training_set(m, target_of(kind));
  if (labeled.empty()) throw empty_data_error("train: manifest has no training records");

  auto trainer = make_trainer(kind, dims);
  trainer->init(cfg.seed);
  for (const LabeledSample& ls : labeled) {
    trainer->prepare(load_media(root, m.records[ls.record_index]));
  }
  for (auto& [name, p] : trainer->params()) p.set_requires_grad(true);

  AdamState adam;
  adam.lr = cfg.lr;

  TrainResult result;
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, epoch + 1));
    shuffle(order, shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      zero_grads(trainer->params());
      std::vector<Tensor> preds;
      std::vector<double> y_real;
      preds.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t si = order[k];
        NetOutput out = trainer->forward(si);
        Tensor p = softmax(out.logits, 0);
        preds.push_back(slice(p, 0, 0, 1));  // P(real); logits are [real, fake]
        y_real.push_back(labeled[si].label_fake ? 0.0 : 1.0);
      }
      Tensor loss = bce_loss(concat(0, preds), y_real);
      const double lv = loss.item();
      if (!std::isfinite(lv)) throw numeric_error("train: non-finite loss");
      loss_sum += lv * static_cast<double>(end - start);
      backward(loss);
      adam_step(trainer->params(), adam);
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    result.epoch_losses.push_back(epoch_loss);
    if (log) *log << "epoch " << (epoch + 1) << " loss " << epoch_loss << "\n";
  }

  for (auto& [name, p] : trainer->params()) {
    p.zero_grad();
    p.set_requires_grad(false);
  }
  result.params = trainer->params();
  return result;
}

// ----- frozen models -----

Model::Model(NetKind kind, const NetDims& dims, ParameterSet params) : kind_(kind) {
  for (auto& [name, p] : params) p.set_requires_grad(false);
  switch (kind_) {
    case NetKind::vn:
      vn_ = std::make_shared<VideoNet>(dims);
      vn_->adopt(std::move(params));
      break;
    case NetKind::an:
      an_ = std::make_shared<AudioNet>(dims);
      an_->adopt(std::move(params));
      break;
    case NetKind::avn_fused:
      fused_ = std::make_shared<FusedAVNet>(dims);
      fused_->adopt(std::move(params));
      break;
    case NetKind::avn_concat:
      concat_ = std::make_shared<ConcatAVNet>(dims);
      concat_->adopt(std::move(params));
      break;
  }
}

ClassifierOutput Model::run(const SampleMedia& media) const {
  switch (kind_) {
    case NetKind::vn: return to_classifier_output(vn_->forward(media.frames));
    case NetKind::an: return to_classifier_output(an_->forward(media.wav));
    case NetKind::avn_fused:
      return to_classifier_output(
          fused_->forward(fused_filterbank(media.wav), crop_lip(media.frames, media.lip_box)));
    case NetKind::avn_concat:
      return to_classifier_output(concat_->forward(media.wav, media.frames));
  }
  throw std::invalid_argument("unknown network kind");
}

Model load_model(const std::filesystem::path& ckpt, const NetDims& dims) {
  ParameterSet params = load_checkpoint(ckpt);
  if (params.empty()) throw checkpoint_mismatch_error("checkpoint holds no tensors: " +
                                                      ckpt.string());
  const std::string& first = params.begin()->first;
  const std::size_t dot = first.find('.');
  const std::string prefix = dot == std::string::npos ? first : first.substr(0, dot);
  NetKind kind;
  if (prefix == "vn")
    kind = NetKind::vn;
  else if (prefix == "an")
    kind = NetKind::an;
  else if (prefix == "avn_fused")
    kind = NetKind::avn_fused;
  else if (prefix == "avn_concat")
    kind = NetKind::avn_concat;
  else
    throw checkpoint_mismatch_error("checkpoint does not hold a known network (prefix '" +
                                    prefix + "')");
  return Model(kind, dims, std::move(params));
}

// ----- per-sample rows -----

std::vector<std::size_t> subset_indices(const Manifest& m, const std::string& subset) {
  const auto& names = subset_names();
  if (std::find(names.begin(), names.end(), subset) == names.end())
    throw std::invalid_argument("unknown subset: " + subset);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const ManifestRecord& r = m.records[i];
    if (r.split != "test") continue;
    if (std::find(r.subsets.begin(), r.subsets.end(), subset) != r.subsets.end())
      out.push_back(i);
  }
  if (out.empty()) throw empty_data_error("subset has no samples: " + subset);
  return out;
}

std::vector<ScoredSample> run_model(const Model& model, const Manifest& m,
                                    const std::vector<std::size_t>& records,
                                    const std::filesystem::path& root, int jobs) {
  std::vector<ScoredSample> rows(records.size());
  const int threads = jobs > 0 ? jobs : 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    const ManifestRecord& rec = m.records[records[static_cast<std::size_t>(i)]];
    const ClassifierOutput out = model.run(load_media(root, rec));
    ScoredSample& row = rows[static_cast<std::size_t>(i)];
    row.id = rec.id;
    row.truth_fake = category_video_label(rec.category);
    row.score_fake = out.score_fake;
    row.pred_fake = binarize(out.score_fake);
    row.embedding = out.embedding;
  }
  (void)threads;
  std::sort(rows.begin(), rows.end(),
            [](const ScoredSample& a, const ScoredSample& b) { return a.id < b.id; });
  return rows;
}

std::vector<ComponentRow> run_components(const Model& video, const Model& audio,
                                         const Model& av, const Manifest& m,
                                         const std::vector<std::size_t>& records,
                                         const std::filesystem::path& root, int jobs) {
  std::vector<ComponentRow> rows(records.size());
  const int threads = jobs > 0 ? jobs : 1;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    const ManifestRecord& rec = m.records[records[static_cast<std::size_t>(i)]];
    const SampleMedia media = load_media(root, rec);
    const ClassifierOutput ov = video.run(media);
    const ClassifierOutput oa = audio.run(media);
    const ClassifierOutput oav = av.run(media);
    ComponentRow& row = rows[static_cast<std::size_t>(i)];
    row.id = rec.id;
    row.truth_fake = category_video_label(rec.category);
    row.outputs.s_v = ov.score_fake;
    row.outputs.s_a = oa.score_fake;
    row.outputs.s_av = oav.score_fake;
    row.outputs.e_v = ov.embedding;
    row.outputs.e_a = oa.embedding;
    row.outputs.e_av = oav.embedding;
  }
  (void)threads;
  std::sort(rows.begin(), rows.end(),
            [](const ComponentRow& a, const ComponentRow& b) { return a.id < b.id; });
  return rows;
}

std::vector<FusionExample> fusion_examples(Strategy s, const std::vector<ComponentRow>& rows) {
  if (s != Strategy::sf && s != Strategy::ff)
    throw std::invalid_argument("fusion examples exist only for learned strategies");
  std::vector<FusionExample> out;
  out.reserve(rows.size());
  for (const ComponentRow& r : rows) {
    FusionExample ex;
    if (s == Strategy::sf) {
      ex.features = {r.outputs.s_v, r.outputs.s_a, r.outputs.s_av};
    } else {
      ex.features.reserve(r.outputs.e_v.size() + r.outputs.e_a.size() + r.outputs.e_av.size());
      ex.features.insert(ex.features.end(), r.outputs.e_v.begin(), r.outputs.e_v.end());
      ex.features.insert(ex.features.end(), r.outputs.e_a.begin(), r.outputs.e_a.end());
      ex.features.insert(ex.features.end(), r.outputs.e_av.begin(), r.outputs.e_av.end());
    }
    ex.label_fake = r.truth_fake;
    out.push_back(std::move(ex));
  }
  return out;
}

// ----- reports -----

EvalReport make_report(std::string model, std::optional<std::string> strategy,
                       std::string subset, std::string digest,
                       const std::vector<int>& pred_fake, const std::vector<int>& truth_fake,
                       const std::vector<double>& scores_fake) {
  EvalReport r;
  r.model = std::move(model);
  r.strategy = std::move(strategy);
  r.subset = std::move(subset);
  r.digest = std::move(digest);
  r.counts = count_confusion(pred_fake, truth_fake);
  r.real = real_class_metrics(r.counts);
  r.fake = fake_class_metrics(r.counts);
  r.accuracy = accuracy_of(r.counts);
  bool has_pos = false, has_neg = false;
  for (int t : truth_fake) (t ? has_pos : has_neg) = true;
  if (has_pos && has_neg) r.auc = auc_score(scores_fake, truth_fake);
  return r;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  if (r.strategy) j["strategy"] = *r.strategy;
  j["subset"] = r.subset;
  j["digest"] = r.digest;
  j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp},
                 {"fn", r.counts.fn}};
  j["per_class"] = {
      {"real",
       {{"precision", r.real.precision}, {"recall", r.real.recall}, {"f1", r.real.f1}}},
      {"fake",
       {{"precision", r.fake.precision}, {"recall", r.fake.recall}, {"f1", r.fake.f1}}}};
  j["accuracy"] = r.accuracy;
  if (r.auc) j["auc"] = *r.auc;
  return j.dump(2) + "\n";
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_markdown(const EvalReport& r) {
  std::ostringstream os;
  os << "### " << r.model;
  if (r.strategy) os << " (" << *r.strategy << ")";
  os << " on " << r.subset << "\n\n";
  os << "| Class | Precision | Recall | F1-Score | Accuracy |\n";
  os << "|-------|-----------|--------|----------|----------|\n";
  os << "| Real | " << fixed4(r.real.precision) << " | " << fixed4(r.real.recall) << " | "
     << fixed4(r.real.f1) << " | " << fixed4(r.accuracy) << " |\n";
  os << "| Fake | " << fixed4(r.fake.precision) << " | " << fixed4(r.fake.recall) << " | "
     << fixed4(r.fake.f1) << " | |\n";
  if (r.auc) os << "\nAUC: " << fixed4(*r.auc) << "\n";
  return os.str();
}

EvalReport evaluate_model(const Model& model, const Manifest& m, const std::string& subset,
                          const std::filesystem::path& root, int jobs) {
  const std::vector<ScoredSample> rows =
      run_model(model, m, subset_indices(m, subset), root, jobs);
  std::vector<int> pred, truth;
  std::vector<double> scores;
  for (const ScoredSample& r : rows) {
    pred.push_back(r.pred_fake);
    truth.push_back(r.truth_fake);
    scores.push_back(r.score_fake);
  }
  return make_report(net_kind_name(model.kind()), std::nullopt, subset, m.digest, pred, truth,
                     scores);
}

EvalReport evaluate_ensemble(Strategy s, const Model& video, const Model& audio,
                             const Model& av, const FusionHead* head, const Manifest& m,
                             const std::string& subset, const std::filesystem::path& root,
                             int jobs) {
  const std::vector<ComponentRow> rows =
      run_components(video, audio, av, m, subset_indices(m, subset), root, jobs);
  std::vector<int> pred, truth;
  std::vector<double> scores;
  for (const ComponentRow& r : rows) {
    const EnsembleDecision d = decide(s, r.outputs, head);
    pred.push_back(d.label);
    truth.push_back(r.truth_fake);
    scores.push_back(d.fused_score);
  }
  return make_report("avtenet", strategy_name(s), subset, m.digest, pred, truth, scores);
}

// ----- embedding dumps -----

void dump_embeddings(const std::filesystem::path& path, const std::vector<ScoredSample>& rows,
                     const std::string& tag) {
  ParameterSet ps;
  for (const ScoredSample& r : rows) {
    ps.emplace(r.id + "." + tag, Tensor(Shape{r.embedding.size()}, r.embedding));
  }
  save_checkpoint(path, ps);
}

void dump_component_embeddings(const std::filesystem::path& path,
                               const std::vector<ComponentRow>& rows, bool with_ff) {
  ParameterSet ps;
  for (const ComponentRow& r : rows) {
    ps.emplace(r.id + ".E_v", Tensor(Shape{r.outputs.e_v.size()}, r.outputs.e_v));
    ps.emplace(r.id + ".E_a", Tensor(Shape{r.outputs.e_a.size()}, r.outputs.e_a));
    ps.emplace(r.id + ".E_av", Tensor(Shape{r.outputs.e_av.size()}, r.outputs.e_av));
    if (with_ff) {
      std::vector<double> ff;
      ff.reserve(r.outputs.e_v.size() + r.outputs.e_a.size() + r.outputs.e_av.size());
      ff.insert(ff.end(), r.outputs.e_v.begin(), r.outputs.e_v.end());
      ff.insert(ff.end(), r.outputs.e_a.begin(), r.outputs.e_a.end());
      ff.insert(ff.end(), r.outputs.e_av.begin(), r.outputs.e_av.end());
      const Shape ff_shape{ff.size()};
      ps.emplace(r.id + ".E_ff", Tensor(ff_shape, std::move(ff)));
    }
  }
  save_checkpoint(path, ps);
}

}  // namespace avtenet
