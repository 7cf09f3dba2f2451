#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "avtenet/checkpoint.hpp"
#include "avtenet/errors.hpp"
#include "avtenet/harness.hpp"
#include "doctest.h"

using namespace avtenet;
namespace fs = std::filesystem;

namespace {

const NetDims kToy{8, 2, 1, 16};

// Brute-force confusion + metrics oracle, written from the definitions.
struct OracleMetrics {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double acc = 0, prec = 0, rec = 0, f1 = 0;
};

OracleMetrics oracle_eval(const std::vector<int>& pred, const std::vector<int>& truth) {
  OracleMetrics o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++o.tp;
    if (pred[i] == 0 && truth[i] == 0) ++o.tn;
    if (pred[i] == 1 && truth[i] == 0) ++o.fp;
    if (pred[i] == 0 && truth[i] == 1) ++o.fn;
  }
  double n = static_cast<double>(pred.size());
  o.acc = n > 0 ? (o.tp + o.tn) / n : 0.0;
  o.prec = (o.tp + o.fp) > 0 ? static_cast<double>(o.tp) / (o.tp + o.fp) : 0.0;
  o.rec = (o.tp + o.fn) > 0 ? static_cast<double>(o.tp) / (o.tp + o.fn) : 0.0;
  o.f1 = (o.prec + o.rec) > 0 ? 2.0 * o.prec * o.rec / (o.prec + o.rec) : 0.0;
  return o;
}

// Pairwise AUC oracle: P(fake score > real score) + 0.5 P(tie).
double oracle_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

GenConfig tiny_config() {
  GenConfig cfg;
  cfg.seed = 5;
  cfg.train_counts = {3, 3, 3, 3};
  cfg.balance_factor = 2;
  cfg.test_reals = 4;
  cfg.test_fakes_per_subset = 4;
  cfg.train_subjects = 3;
  cfg.test_subjects = 2;
  return cfg;
}

fs::path fresh_dir(const char* leaf) {
  auto p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("confusion counting hand case") {
  std::vector<int> pred{1, 1, 1, 0, 0, 0, 0, 1};
  std::vector<int> truth{1, 1, 0, 1, 0, 0, 1, 0};
  auto c = count_confusion(pred, truth);
  CHECK(c.tp == 2);
  CHECK(c.tn == 2);
  CHECK(c.fp == 2);
  CHECK(c.fn == 2);
  CHECK(c.total() == 8);
  CHECK_THROWS_AS(count_confusion({1}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(count_confusion({2}, {1}), std::invalid_argument);
}

TEST_CASE("metrics hand case tp=3 tn=2 fp=1 fn=2") {
  ConfusionCounts c;
  c.tp = 3;
  c.tn = 2;
  c.fp = 1;
  c.fn = 2;
  auto m = fake_class_metrics(c);
  CHECK(accuracy_of(c) == doctest::Approx(0.625).epsilon(1e-4));
  CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-4));
  CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-4));
  CHECK(m.f1 == doctest::Approx(0.6667).epsilon(1e-4));
}

TEST_CASE("metrics match a brute-force oracle on 1000 random sets") {
  Rng rng(71);
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t n = 1 + rng.index(40);
    std::vector<int> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng.index(2));
      truth[i] = static_cast<int>(rng.index(2));
    }
    auto c = count_confusion(pred, truth);
    auto o = oracle_eval(pred, truth);
    REQUIRE(c.tp == o.tp);
    REQUIRE(c.tn == o.tn);
    REQUIRE(c.fp == o.fp);
    REQUIRE(c.fn == o.fn);
    auto m = fake_class_metrics(c);
    REQUIRE(accuracy_of(c) == doctest::Approx(o.acc).epsilon(1e-12));
    REQUIRE(m.precision == doctest::Approx(o.prec).epsilon(1e-12));
    REQUIRE(m.recall == doctest::Approx(o.rec).epsilon(1e-12));
    REQUIRE(m.f1 == doctest::Approx(o.f1).epsilon(1e-12));
    // Real-class metrics are the fake-class metrics of the flipped labels.
    std::vector<int> pred_f(n), truth_f(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred_f[i] = 1 - pred[i];
      truth_f[i] = 1 - truth[i];
    }
    auto of = oracle_eval(pred_f, truth_f);
    auto mr = real_class_metrics(c);
    REQUIRE(mr.precision == doctest::Approx(of.prec).epsilon(1e-12));
    REQUIRE(mr.recall == doctest::Approx(of.rec).epsilon(1e-12));
    REQUIRE(mr.f1 == doctest::Approx(of.f1).epsilon(1e-12));
  }
}

TEST_CASE("auc agrees with pairwise counting and its known values") {
  // Perfect separation.
  CHECK(auc_score({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  // Fully reversed.
  CHECK(auc_score({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // All ties -> chance.
  CHECK(auc_score({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  // Hand case: pairs (0.9>0.6), (0.9>0.2), (0.4<0.6), (0.4>0.2) -> 3/4.
  CHECK(auc_score({0.9, 0.4, 0.6, 0.2}, {1, 1, 0, 0}) == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(72);
  for (int iter = 0; iter < 200; ++iter) {
    std::size_t n = 2 + rng.index(30);
    std::vector<double> scores(n);
    std::vector<int> truth(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid forces frequent ties.
      scores[i] = static_cast<double>(rng.index(5)) / 4.0;
      truth[i] = static_cast<int>(rng.index(2));
      (truth[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    REQUIRE(auc_score(scores, truth) ==
            doctest::Approx(oracle_auc(scores, truth)).epsilon(1e-12));
    // Monotone transforms leave AUC unchanged.
    std::vector<double> warped(n);
    for (std::size_t i = 0; i < n; ++i) warped[i] = 1.0 / (1.0 + std::exp(-3.0 * scores[i]));
    REQUIRE(auc_score(warped, truth) ==
            doctest::Approx(auc_score(scores, truth)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(auc_score({0.5, 0.6}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(auc_score({0.5, 0.6}, {0, 0}), std::invalid_argument);
}

TEST_CASE("subset lookup validates names and contents") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_subset");
  auto m = generate_dataset(cfg, root, 1, nullptr);
  auto idx = subset_indices(m, "mixed-ii");
  CHECK(idx.size() == 8);  // 4 reals + 4 fakes
  for (auto i : idx) {
    auto& subs = m.records[i].subsets;
    CHECK(std::find(subs.begin(), subs.end(), "mixed-ii") != subs.end());
  }
  CHECK(subset_indices(m, "full").size() == 24);
  CHECK_THROWS_AS(subset_indices(m, "bogus"), std::invalid_argument);
  Manifest no_test = m;
  no_test.records.erase(
      std::remove_if(no_test.records.begin(), no_test.records.end(),
                     [](const ManifestRecord& r) { return r.split == "test"; }),
      no_test.records.end());
  CHECK_THROWS_AS(subset_indices(no_test, "full"), empty_data_error);
  fs::remove_all(root);
}

TEST_CASE("training runs, learns, and is deterministic") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_train");
  auto m = generate_dataset(cfg, root, 1, nullptr);

  TrainConfig tc;
  tc.lr = 4e-3;
  tc.batch = 6;
  tc.epochs = 28;
  tc.seed = 9;
  std::ostringstream log;
  auto r1 = train_network(NetKind::an, kToy, m, root, tc, &log);
  REQUIRE(r1.epoch_losses.size() == 28);
  for (double l : r1.epoch_losses) CHECK(std::isfinite(l));
  // The audio net must actually learn its toy corpus.
  CHECK(r1.epoch_losses.back() < 0.5 * r1.epoch_losses.front());
  CHECK(log.str().find("epoch 1 loss") != std::string::npos);
  CHECK(log.str().find("epoch 28 loss") != std::string::npos);

  auto r2 = train_network(NetKind::an, kToy, m, root, tc, nullptr);
  REQUIRE(r2.params.size() == r1.params.size());
  for (auto& [name, t] : r1.params) {
    auto& u = r2.params.at(name);
    REQUIRE(std::memcmp(t.values().data(), u.values().data(),
                        t.numel() * sizeof(double)) == 0);
  }
  CHECK(r2.epoch_losses == r1.epoch_losses);

  // Zero epochs returns the untouched seeded initialization.
  TrainConfig zero = tc;
  zero.epochs = 0;
  auto r0 = train_network(NetKind::an, kToy, m, root, zero, nullptr);
  CHECK(r0.epoch_losses.empty());
  AudioNet fresh(kToy);
  fresh.init(zero.seed);
  for (auto& [name, t] : fresh.params()) {
    auto& u = r0.params.at(name);
    CHECK(std::memcmp(t.values().data(), u.values().data(), t.numel() * sizeof(double)) == 0);
  }

  // A manifest with no training records cannot train.
  Manifest no_train = m;
  no_train.records.erase(
      std::remove_if(no_train.records.begin(), no_train.records.end(),
                     [](const ManifestRecord& r) { return r.split != "test"; }),
      no_train.records.end());
  CHECK_THROWS_AS(train_network(NetKind::an, kToy, no_train, root, tc, nullptr),
                  empty_data_error);
  fs::remove_all(root);
}

TEST_CASE("frozen models round-trip through checkpoints and stay frozen") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_model");
  auto m = generate_dataset(cfg, root, 1, nullptr);

  TrainConfig tc;
  tc.epochs = 1;
  tc.batch = 6;
  tc.seed = 11;
  auto trained = train_network(NetKind::vn, kToy, m, root, tc, nullptr);
  auto ckpt = root / "vn.ckpt";
  save_checkpoint(ckpt, trained.params);

  auto model = load_model(ckpt, kToy);
  CHECK(model.kind() == NetKind::vn);

  auto media = load_media(root, m.records.front());
  auto out1 = model.run(media);
  auto out2 = model.run(media);
  CHECK(out1.score_fake == out2.score_fake);
  CHECK(out1.score_real == 1.0 - out1.score_fake);
  CHECK(out1.embedding.size() == kToy.dim);

  // Kind inference rejects unknown prefixes.
  ParameterSet alien;
  alien["mlp.w"] = Tensor({2, 2}, 0.0);
  save_checkpoint(root / "alien.ckpt", alien);
  CHECK_THROWS_AS(load_model(root / "alien.ckpt", kToy), checkpoint_mismatch_error);
  fs::remove_all(root);
}

TEST_CASE("evaluation rows are sorted and independent of worker count") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_rows");
  auto m = generate_dataset(cfg, root, 1, nullptr);

  AudioNet an(kToy);
  an.init(21);
  Model model(NetKind::an, kToy, an.params());
  auto idx = subset_indices(m, "audio-only");
  auto rows1 = run_model(model, m, idx, root, 1);
  auto rows2 = run_model(model, m, idx, root, 3);
  REQUIRE(rows1.size() == idx.size());
  CHECK(std::is_sorted(rows1.begin(), rows1.end(),
                       [](const ScoredSample& a, const ScoredSample& b) { return a.id < b.id; }));
  REQUIRE(rows2.size() == rows1.size());
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    CHECK(rows1[i].id == rows2[i].id);
    CHECK(rows1[i].score_fake == rows2[i].score_fake);
    CHECK(rows1[i].pred_fake == rows2[i].pred_fake);
    CHECK(rows1[i].truth_fake == rows2[i].truth_fake);
    CHECK(rows1[i].embedding == rows2[i].embedding);
  }
  // Truth labels come from the category's video-level mapping.
  for (auto& row : rows1) {
    auto it = std::find_if(m.records.begin(), m.records.end(),
                           [&](const ManifestRecord& r) { return r.id == row.id; });
    REQUIRE(it != m.records.end());
    CHECK(row.truth_fake == category_video_label(it->category));
  }
  fs::remove_all(root);
}

TEST_CASE("reports format and serialize the documented fields") {
  std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0};
  std::vector<int> truth{1, 1, 1, 0, 0, 0, 1, 1};
  std::vector<double> scores{0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1};
  auto r = make_report("an", std::nullopt, "full", "f00d", pred, truth, scores);
  CHECK(r.counts.tp == 3);
  CHECK(r.counts.fn == 2);
  CHECK(r.counts.fp == 1);
  CHECK(r.counts.tn == 2);
  CHECK(r.accuracy == doctest::Approx(0.625).epsilon(1e-12));
  REQUIRE(r.auc.has_value());

  auto js = report_json(r);
  CHECK(js.find("\"model\": \"an\"") != std::string::npos);
  CHECK(js.find("\"subset\": \"full\"") != std::string::npos);
  CHECK(js.find("\"digest\": \"f00d\"") != std::string::npos);
  CHECK(js.find("\"tp\": 3") != std::string::npos);
  CHECK(js.find("strategy") == std::string::npos);
  CHECK(js.back() == '\n');

  auto md = report_markdown(r);
  CHECK(md.find("| Class | Precision | Recall | F1-Score | Accuracy |") != std::string::npos);
  CHECK(md.find("| Real |") != std::string::npos);
  CHECK(md.find("| Fake |") != std::string::npos);
  CHECK(md.find("0.6250") != std::string::npos);
  CHECK(md.find("### an on full") != std::string::npos);

  auto re = make_report("avtenet", std::string("ff"), "mixed-ii", "f00d", pred, truth, scores);
  auto js2 = report_json(re);
  CHECK(js2.find("\"strategy\": \"ff\"") != std::string::npos);
  CHECK(report_markdown(re).find("### avtenet (ff) on mixed-ii") != std::string::npos);

  // Single-class slices omit AUC rather than inventing one.
  auto r1c = make_report("an", std::nullopt, "full", "f00d", {1, 1}, {1, 1}, {0.9, 0.8});
  CHECK_FALSE(r1c.auc.has_value());
  CHECK(report_json(r1c).find("auc") == std::string::npos);
}

TEST_CASE("component rows feed fusion features in the documented order") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_comp");
  auto m = generate_dataset(cfg, root, 1, nullptr);

  VideoNet vn(kToy);
  vn.init(31);
  AudioNet an(kToy);
  an.init(32);
  FusedAVNet fav(kToy);
  fav.init(33);
  Model mv(NetKind::vn, kToy, vn.params());
  Model ma(NetKind::an, kToy, an.params());
  Model mav(NetKind::avn_fused, kToy, fav.params());

  auto idx = subset_indices(m, "mixed-i");
  auto rows = run_components(mv, ma, mav, m, idx, root, 2);
  REQUIRE(rows.size() == idx.size());
  for (auto& row : rows) {
    CHECK(row.outputs.e_v.size() == kToy.dim);
    CHECK(row.outputs.e_a.size() == kToy.dim);
    CHECK(row.outputs.e_av.size() == kToy.dim);
    CHECK(row.outputs.s_v >= 0.0);
    CHECK(row.outputs.s_v <= 1.0);
  }

  auto sf = fusion_examples(Strategy::sf, rows);
  REQUIRE(sf.size() == rows.size());
  for (std::size_t i = 0; i < sf.size(); ++i) {
    REQUIRE(sf[i].features.size() == 3);
    CHECK(sf[i].features[0] == rows[i].outputs.s_v);
    CHECK(sf[i].features[1] == rows[i].outputs.s_a);
    CHECK(sf[i].features[2] == rows[i].outputs.s_av);
    CHECK(sf[i].label_fake == rows[i].truth_fake);
  }
  auto ff = fusion_examples(Strategy::ff, rows);
  for (std::size_t i = 0; i < ff.size(); ++i) {
    REQUIRE(ff[i].features.size() == 3 * kToy.dim);
    CHECK(std::equal(rows[i].outputs.e_v.begin(), rows[i].outputs.e_v.end(),
                     ff[i].features.begin()));
    CHECK(std::equal(rows[i].outputs.e_av.begin(), rows[i].outputs.e_av.end(),
                     ff[i].features.begin() + 2 * kToy.dim));
  }
  CHECK_THROWS_AS(fusion_examples(Strategy::mv, rows), std::invalid_argument);

  // Embedding dumps are checkpoint files keyed by sample id.
  auto dump = root / "emb.ckpt";
  dump_component_embeddings(dump, rows, true);
  auto loaded = load_checkpoint(dump);
  CHECK(loaded.size() == rows.size() * 4);
  auto& first = rows.front();
  CHECK(loaded.at(first.id + ".E_v").values() ==
        std::vector<double>(first.outputs.e_v.begin(), first.outputs.e_v.end()));
  CHECK(loaded.at(first.id + ".E_ff").values().size() == 3 * kToy.dim);
  fs::remove_all(root);
}

TEST_CASE("end-to-end evaluation through models and ensembles") {
  auto cfg = tiny_config();
  auto root = fresh_dir("avtenet_harness_e2e");
  auto m = generate_dataset(cfg, root, 1, nullptr);

  VideoNet vn(kToy);
  vn.init(41);
  AudioNet an(kToy);
  an.init(42);
  FusedAVNet fav(kToy);
  fav.init(43);
  Model mv(NetKind::vn, kToy, vn.params());
  Model ma(NetKind::an, kToy, an.params());
  Model mav(NetKind::avn_fused, kToy, fav.params());

  auto rep = evaluate_model(ma, m, "full", root, 2);
  CHECK(rep.model == "an");
  CHECK(rep.subset == "full");
  CHECK(rep.counts.total() == 24);
  CHECK(rep.digest == m.digest);

  auto mv_rep = evaluate_ensemble(Strategy::mv, mv, ma, mav, nullptr, m, "mixed-ii", root, 2);
  CHECK(mv_rep.model == "avtenet");
  REQUIRE(mv_rep.strategy.has_value());
  CHECK(*mv_rep.strategy == "mv");
  CHECK(mv_rep.counts.total() == 8);

  auto head = make_fusion_head(Strategy::sf, 3, 77);
  auto sf_rep = evaluate_ensemble(Strategy::sf, mv, ma, mav, &head, m, "mixed-ii", root, 1);
  CHECK(sf_rep.counts.total() == 8);
  CHECK_THROWS_AS(evaluate_ensemble(Strategy::sf, mv, ma, mav, nullptr, m, "mixed-ii", root, 1),
                  std::invalid_argument);
  fs::remove_all(root);
}
