#include "avtenet/ensemble.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "avtenet/errors.hpp"

namespace avtenet {

Strategy strategy_from_string(const std::string& s) {
  if (s == "mv") return Strategy::mv;
  if (s == "asf") return Strategy::asf;
  if (s == "sf") return Strategy::sf;
  if (s == "ff") return Strategy::ff;
  throw std::invalid_argument("unknown strategy '" + s + "' (expected mv, asf, sf, ff)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::mv: return "mv";
    case Strategy::asf: return "asf";
    case Strategy::sf: return "sf";
    case Strategy::ff: return "ff";
  }
  throw std::invalid_argument("unknown Strategy");
}

int binarize(double score_fake, double tau) { return score_fake >= tau ? 1 : 0; }

int majority_vote(int p_v, int p_a, int p_av) { return (p_v + p_a + p_av) >= 2 ? 1 : 0; }

FusionHead make_fusion_head(Strategy s, std::size_t in_dim, std::uint64_t seed) {
  if (s != Strategy::sf && s != Strategy::ff)
    throw std::invalid_argument("fusion head: strategy '" + strategy_name(s) +
                                "' has no parameters");
  if (in_dim == 0) throw std::invalid_argument("fusion head: feature dim must be positive");
  FusionHead head;
  head.strategy = s;
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + 2));
  head.w = uniform_init({2, in_dim}, -bound, bound, rng);
  head.b = Tensor({2}, 0.0, true);
  return head;
}

ParameterSet fusion_head_params(const FusionHead& head) {
  const std::string stem = "dm." + strategy_name(head.strategy) + ".";
  ParameterSet ps;
  ps.emplace(stem + "w", head.w);
  ps.emplace(stem + "b", head.b);
  return ps;
}

FusionHead fusion_head_from_params(Strategy s, const ParameterSet& ps) {
  if (s != Strategy::sf && s != Strategy::ff)
    throw std::invalid_argument("fusion head: strategy '" + strategy_name(s) +
                                "' has no parameters");
  const std::string stem = "dm." + strategy_name(s) + ".";
  auto wi = ps.find(stem + "w");
  auto bi = ps.find(stem + "b");
  if (wi == ps.end() || bi == ps.end())
    throw checkpoint_mismatch_error("fusion head: missing '" + stem + "w' or '" + stem + "b'");
  const Tensor& w = wi->second;
  const Tensor& b = bi->second;
  if (w.rank() != 2 || w.shape()[0] != 2)
    throw checkpoint_mismatch_error("fusion head: '" + stem + "w' must be 2 x in_dim, got " +
                                    shape_str(w.shape()));
  if (b.shape() != Shape{2})
    throw checkpoint_mismatch_error("fusion head: '" + stem + "b' must have shape (2), got " +
                                    shape_str(b.shape()));
  FusionHead head;
  head.strategy = s;
  head.w = w;
  head.b = b;
  return head;
}

namespace {

// Exact complement so fused_score and 1 - fused_score always sum to one.
EnsembleDecision linear_decision(Strategy s, const FusionHead& head,
                                 const std::vector<double>& x) {
  if (head.w.rank() != 2 || head.w.shape()[1] != x.size())
    throw std::invalid_argument("fusion head: expected " +
                                std::to_string(head.w.shape()[1]) + " features, got " +
                                std::to_string(x.size()));
  const auto& w = head.w.values();
  const auto& b = head.b.values();
  const std::size_t n = x.size();
  double logit_real = b[0], logit_fake = b[1];
  for (std::size_t i = 0; i < n; ++i) logit_real += w[i] * x[i];
  for (std::size_t i = 0; i < n; ++i) logit_fake += w[n + i] * x[i];
  const double m = std::max(logit_real, logit_fake);
  const double er = std::exp(logit_real - m);
  const double ef = std::exp(logit_fake - m);
  EnsembleDecision d;
  d.strategy = s;
  d.fused_score = ef / (er + ef);
  d.label = logit_fake >= logit_real ? 1 : 0;
  return d;
}

}  // namespace

EnsembleDecision decide_mv(const ComponentOutputs& c, double tau) {
  EnsembleDecision d;
  d.strategy = Strategy::mv;
  const int votes = binarize(c.s_v, tau) + binarize(c.s_a, tau) + binarize(c.s_av, tau);
  d.label = votes >= 2 ? 1 : 0;
  d.fused_score = static_cast<double>(votes) / 3.0;
  return d;
}

EnsembleDecision decide_asf(const ComponentOutputs& c, double tau) {
  EnsembleDecision d;
  d.strategy = Strategy::asf;
  d.fused_score = (c.s_v + c.s_a + c.s_av) / 3.0;
  d.label = binarize(d.fused_score, tau);
  return d;
}

EnsembleDecision decide_sf(const ComponentOutputs& c, const FusionHead& head) {
  if (head.strategy != Strategy::sf)
    throw std::invalid_argument("decide_sf: head trained for '" + strategy_name(head.strategy) +
                                "'");
  return linear_decision(Strategy::sf, head, {c.s_v, c.s_a, c.s_av});
}

EnsembleDecision decide_ff(const ComponentOutputs& c, const FusionHead& head) {
  if (head.strategy != Strategy::ff)
    throw std::invalid_argument("decide_ff: head trained for '" + strategy_name(head.strategy) +
                                "'");
  std::vector<double> x;
  x.reserve(c.e_v.size() + c.e_a.size() + c.e_av.size());
  x.insert(x.end(), c.e_v.begin(), c.e_v.end());
  x.insert(x.end(), c.e_a.begin(), c.e_a.end());
  x.insert(x.end(), c.e_av.begin(), c.e_av.end());
  return linear_decision(Strategy::ff, head, x);
}

EnsembleDecision decide(Strategy s, const ComponentOutputs& c, const FusionHead* head,
                        double tau) {
  switch (s) {
    case Strategy::mv: return decide_mv(c, tau);
    case Strategy::asf: return decide_asf(c, tau);
    case Strategy::sf:
      if (!head) throw std::invalid_argument("decide: sf requires a trained head");
      return decide_sf(c, *head);
    case Strategy::ff:
      if (!head) throw std::invalid_argument("decide: ff requires a trained head");
      return decide_ff(c, *head);
  }
  throw std::invalid_argument("unknown Strategy");
}

FusionHead train_fusion_head(Strategy s, const std::vector<FusionExample>& examples,
                             const FusionTrainConfig& cfg, std::ostream* log) {
  if (s != Strategy::sf && s != Strategy::ff)
    throw std::invalid_argument("train_fusion_head: strategy '" + strategy_name(s) +
                                "' has no parameters");
  if (examples.empty()) throw empty_data_error("train_fusion_head: no training examples");
  if (cfg.batch == 0 || cfg.epochs == 0)
    throw std::invalid_argument("train_fusion_head: batch and epochs must be positive");
  const std::size_t dim = examples[0].features.size();
  for (const FusionExample& e : examples)
    if (e.features.size() != dim)
      throw std::invalid_argument("train_fusion_head: inconsistent feature lengths");

  FusionHead head = make_fusion_head(s, dim, mix_seed(cfg.seed, 0xFu));
  ParameterSet params = fusion_head_params(head);
  AdamState adam;
  adam.lr = cfg.lr;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, epoch + 1));
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<Tensor> preds;
      std::vector<double> y_real;
      preds.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const FusionExample& ex = examples[order[k]];
        Tensor x(Shape{dim, 1}, ex.features);
        Tensor logits = reshape(add(matmul(head.w, x), reshape(head.b, {2, 1})), {2});
        preds.push_back(slice(softmax(logits, 0), 0, 0, 1));
        y_real.push_back(ex.label_fake ? 0.0 : 1.0);
      }
      Tensor loss = bce_loss(concat(0, preds), y_real);
      if (!std::isfinite(loss.item()))
        throw numeric_error("train_fusion_head: non-finite loss");
      loss_sum += loss.item() * static_cast<double>(end - start);
      zero_grads(params);
      backward(loss);
      adam_step(params, adam);
    }
    if (log)
      *log << "epoch " << (epoch + 1) << " loss "
           << loss_sum / static_cast<double>(examples.size()) << "\n";
  }
  return head;
}

}  // namespace avtenet
