#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avtenet/ensemble.hpp"
#include "avtenet/nets.hpp"
#include "avtenet/synthdata.hpp"

namespace avtenet {

// ----- evaluation arithmetic (positive class = fake) -----

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

// Labels are 1 = fake, 0 = real. Throws std::invalid_argument on length
// mismatch or out-of-domain labels.
ConfusionCounts count_confusion(const std::vector<int>& pred_fake,
                                const std::vector<int>& truth_fake);

struct ClassMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Zero denominators yield 0 by convention.
ClassMetrics fake_class_metrics(const ConfusionCounts& c);
// Same formulas with the positive class swapped to real.
ClassMetrics real_class_metrics(const ConfusionCounts& c);
double accuracy_of(const ConfusionCounts& c);

// Rank-based (Mann-Whitney) AUC with average ranks on ties: the probability
// that a random fake outscores a random real. Throws std::invalid_argument
// unless both classes are present.
double auc_score(const std::vector<double>& scores_fake, const std::vector<int>& truth_fake);

// ----- training -----

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 16;
  std::size_t epochs = 5;
  std::uint64_t seed = 42;
};

struct TrainResult {
  ParameterSet params;  // prefixed tensor names, ready for save_checkpoint
  std::vector<double> epoch_losses;
};

// Trains one classifier from scratch on its label mapping over the manifest's
// training records (media loaded from root). Single-threaded over samples;
// per-epoch seeded shuffle; per-batch Adam on the batch BCE. Logs
// "epoch K loss L" per epoch. Throws empty_data_error without training
// records and numeric_error when a loss goes non-finite.
TrainResult train_network(NetKind kind, const NetDims& dims, const Manifest& m,
                          const std::filesystem::path& root, const TrainConfig& cfg,
                          std::ostream* log = nullptr);

// ----- frozen models -----

struct SampleMedia {
  Waveform wav;
  FrameStack frames;
  LipBox lip_box;
};

SampleMedia load_media(const std::filesystem::path& root, const ManifestRecord& rec);

// A frozen classifier of any kind behind one interface. Parameters are
// adopted without gradient tracking, so run() builds no graphs and is safe
// to call from parallel workers.
class Model {
 public:
  Model(NetKind kind, const NetDims& dims, ParameterSet params);
  NetKind kind() const { return kind_; }
  ClassifierOutput run(const SampleMedia& media) const;

 private:
  NetKind kind_;
  std::shared_ptr<VideoNet> vn_;
  std::shared_ptr<AudioNet> an_;
  std::shared_ptr<FusedAVNet> fused_;
  std::shared_ptr<ConcatAVNet> concat_;
};

// Loads a checkpoint and infers the network kind from its tensor-name prefix.
// Throws checkpoint_mismatch_error when the prefix is not a known network or
// shapes disagree with the architecture.
Model load_model(const std::filesystem::path& ckpt, const NetDims& dims = {});

// ----- per-sample evaluation rows -----

// Record indices of one named test subset, in manifest order.
// Unknown name -> std::invalid_argument; known but empty -> empty_data_error.
std::vector<std::size_t> subset_indices(const Manifest& m, const std::string& subset);

struct ScoredSample {
  std::string id;
  int truth_fake = 0;
  double score_fake = 0.0;
  int pred_fake = 0;
  std::vector<double> embedding;
};

// Runs one frozen model over the given records (jobs-way parallel; results
// sorted by id, so worker order never shows).
std::vector<ScoredSample> run_model(const Model& model, const Manifest& m,
                                    const std::vector<std::size_t>& records,
                                    const std::filesystem::path& root, int jobs = 1);

struct ComponentRow {
  std::string id;
  int truth_fake = 0;
  ComponentOutputs outputs;
};

// Runs the three frozen components (video, audio, audio-visual) per sample.
std::vector<ComponentRow> run_components(const Model& video, const Model& audio,
                                         const Model& av, const Manifest& m,
                                         const std::vector<std::size_t>& records,
                                         const std::filesystem::path& root, int jobs = 1);

// Fusion training features over the video-level training mapping
// (train split plus balance fill), one example per record.
std::vector<FusionExample> fusion_examples(Strategy s, const std::vector<ComponentRow>& rows);

// ----- reports -----

struct EvalReport {
  std::string model;  // "vn", "an", "avn-fused", "avn-concat" or "avtenet"
  std::optional<std::string> strategy;
  std::string subset;
  std::string digest;  // manifest config digest
  ConfusionCounts counts;
  ClassMetrics real;
  ClassMetrics fake;
  double accuracy = 0.0;
  std::optional<double> auc;
};

EvalReport make_report(std::string model, std::optional<std::string> strategy,
                       std::string subset, std::string digest,
                       const std::vector<int>& pred_fake, const std::vector<int>& truth_fake,
                       const std::vector<double>& scores_fake);

std::string report_json(const EvalReport& r);
// Table with columns Class | Precision | Recall | F1-Score | Accuracy and
// Real/Fake rows (accuracy shown on the Real row).
std::string report_markdown(const EvalReport& r);

EvalReport evaluate_model(const Model& model, const Manifest& m, const std::string& subset,
                          const std::filesystem::path& root, int jobs = 1);
// head may be null for mv/asf.
EvalReport evaluate_ensemble(Strategy s, const Model& video, const Model& audio,
                             const Model& av, const FusionHead* head, const Manifest& m,
                             const std::string& subset, const std::filesystem::path& root,
                             int jobs = 1);

// ----- embedding dumps (checkpoint-format files of named vectors) -----

// One tensor "<id>.<tag>" per sample, e.g. tag "E_v".
void dump_embeddings(const std::filesystem::path& path, const std::vector<ScoredSample>& rows,
                     const std::string& tag);
// Tensors <id>.E_v / <id>.E_a / <id>.E_av and, when with_ff, <id>.E_ff
// (the concatenated feature-fusion vector).
void dump_component_embeddings(const std::filesystem::path& path,
                               const std::vector<ComponentRow>& rows, bool with_ff);

}  // namespace avtenet
