#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "avtenet/tensor.hpp"

namespace avtenet {

// Fusion strategies over the three frozen components:
//   mv  - majority vote on binarized predictions
//   asf - average of the three fake scores against a threshold
//   sf  - learned linear layer on the score vector
//   ff  - learned linear layer on the concatenated embeddings
enum class Strategy { mv, asf, sf, ff };

Strategy strategy_from_string(const std::string& s);
std::string strategy_name(Strategy s);

inline constexpr double kDecisionThreshold = 0.5;

// Boundary goes to fake.
int binarize(double score_fake, double tau = kDecisionThreshold);

// 1 iff at least two of the three binary predictions are 1.
int majority_vote(int p_v, int p_a, int p_av);

// Per-sample outputs of the video, audio and audio-visual components.
struct ComponentOutputs {
  double s_v = 0.0, s_a = 0.0, s_av = 0.0;  // fake scores in [0, 1]
  std::vector<double> e_v, e_a, e_av;       // clip embeddings
};

// Learned fusion layer; w is 2 x in_dim with row order [real, fake], b is 2.
struct FusionHead {
  Strategy strategy = Strategy::sf;
  Tensor w, b;
};

FusionHead make_fusion_head(Strategy s, std::size_t in_dim, std::uint64_t seed);
// Checkpoint view: tensors named dm.<strategy>.w / dm.<strategy>.b sharing
// storage with the head.
ParameterSet fusion_head_params(const FusionHead& head);
FusionHead fusion_head_from_params(Strategy s, const ParameterSet& ps);

struct EnsembleDecision {
  Strategy strategy = Strategy::mv;
  int label = 0;             // 1 = fake
  double fused_score = 0.0;  // score the decision was made on
};

EnsembleDecision decide_mv(const ComponentOutputs& c, double tau = kDecisionThreshold);
EnsembleDecision decide_asf(const ComponentOutputs& c, double tau = kDecisionThreshold);
EnsembleDecision decide_sf(const ComponentOutputs& c, const FusionHead& head);
EnsembleDecision decide_ff(const ComponentOutputs& c, const FusionHead& head);
// Dispatcher; head may be null for mv/asf and is required for sf/ff.
EnsembleDecision decide(Strategy s, const ComponentOutputs& c, const FusionHead* head,
                        double tau = kDecisionThreshold);

// One training example for a learned head: the feature vector (scores for sf,
// concatenated embeddings for ff) and the video-level label.
struct FusionExample {
  std::vector<double> features;
  int label_fake = 0;
};

struct FusionTrainConfig {
  double lr = 2e-3;
  std::size_t batch = 16;
  std::size_t epochs = 5;
  std::uint64_t seed = 42;
};

// Adam on the cross-entropy of the head alone; components stay untouched.
// Throws empty_data_error without examples and std::invalid_argument for
// strategies without parameters.
FusionHead train_fusion_head(Strategy s, const std::vector<FusionExample>& examples,
                             const FusionTrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace avtenet
