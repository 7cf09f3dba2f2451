#include "avtenet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "avtenet/errors.hpp"
#include "avtenet/rng.hpp"
#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace avtenet {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Sub-stream tags under the per-sample seed.
constexpr std::uint64_t kStreamLatent = 1;
constexpr std::uint64_t kStreamAudioManip = 2;
constexpr std::uint64_t kStreamVisualManip = 3;
constexpr std::uint64_t kStreamAudioNoise = 4;
constexpr std::uint64_t kStreamVisualNoise = 5;
constexpr std::uint64_t kSubjectTag = 0x5B17;

double quantize_pcm16(double x) {
  long v = std::lround(x * 32768.0);
  v = std::clamp(v, -32768L, 32767L);
  return static_cast<double>(v) / 32768.0;
}

double quantize_pixel(double v) {
  long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  q = std::clamp(q, 0L, 255L);
  return static_cast<double>(q) / 255.0;
}

double subject_f0(std::uint64_t global_seed, int subject_id) {
  Rng rng(mix_seed(mix_seed(global_seed, kSubjectTag),
                   static_cast<std::uint64_t>(subject_id)));
  return rng.uniform(110.0, 280.0);
}

double envelope(double t, double freq, double phase) {
  return 0.5 + 0.5 * std::sin(2.0 * kPi * freq * t + phase);
}

std::string zero_pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
  return buf;
}

struct PlanEntry {
  std::uint64_t index = 0;  // global sample index -> per-sample seed
  int subject_id = 0;
  Category category = Category::RvRa;
  std::string id;
  std::string split;
  std::vector<std::string> subsets;
};

std::vector<PlanEntry> layout_plan(const GenConfig& cfg) {
  std::vector<PlanEntry> plan;
  const std::size_t b = cfg.balance_factor * cfg.train_counts[0];
  const std::size_t r = cfg.test_reals;
  const std::size_t f = cfg.test_fakes_per_subset;
  std::uint64_t index = 0;
  auto train_subject = [&](std::uint64_t i) {
    return static_cast<int>(i % cfg.train_subjects);
  };

  const Category cats[4] = {Category::RvRa, Category::RvFa, Category::FvRa, Category::FvFa};
  for (std::size_t ci = 0; ci < 4; ++ci) {
    const Category c = cats[ci];
    for (std::size_t i = 0; i < cfg.train_counts[ci]; ++i) {
      PlanEntry e;
      e.index = index;
      e.subject_id = train_subject(index);
      e.category = c;
      e.id = "train_" + category_name(c) + "_" + zero_pad(i, 4);
      e.split = "train";
      plan.push_back(std::move(e));
      ++index;
    }
  }
  for (std::size_t i = 0; i < b; ++i) {
    PlanEntry e;
    e.index = index;
    e.subject_id = train_subject(index);
    e.category = Category::RvRa;
    e.id = "bal_RvRa_" + zero_pad(i, 4);
    e.split = "balance";
    plan.push_back(std::move(e));
    ++index;
  }

  std::uint64_t test_pos = 0;
  auto test_subject = [&]() {
    return 1000 + static_cast<int>(test_pos % cfg.test_subjects);
  };
  auto push_test = [&](Category c, const std::string& id, std::vector<std::string> subsets) {
    PlanEntry e;
    e.index = index;
    e.subject_id = test_subject();
    e.category = c;
    e.id = id;
    e.split = "test";
    e.subsets = std::move(subsets);
    plan.push_back(std::move(e));
    ++index;
    ++test_pos;
  };

  // Reals are shared by every subset.
  std::vector<std::string> all_subsets = subset_names();
  for (std::size_t i = 0; i < r; ++i) {
    push_test(Category::RvRa, "test_real_" + zero_pad(i, 4), all_subsets);
  }
  for (std::size_t i = 0; i < f; ++i) {
    push_test(Category::FvRa, "test_visual-only_" + zero_pad(i, 4), {"visual-only", "full"});
  }
  for (std::size_t i = 0; i < f; ++i) {
    push_test(Category::RvFa, "test_audio-only_" + zero_pad(i, 4), {"audio-only", "full"});
  }
  for (std::size_t i = 0; i < f; ++i) {
    push_test(Category::FvFa, "test_both_" + zero_pad(i, 4), {"both", "full"});
  }
  // mixed-i: equal halves of single-modality fakes (RvFa gets any remainder).
  const std::size_t half_rvfa = f - f / 2;
  for (std::size_t i = 0; i < f; ++i) {
    Category c = i < half_rvfa ? Category::RvFa : Category::FvRa;
    push_test(c, "test_mixed-i_" + zero_pad(i, 4), {"mixed-i", "full"});
  }
  // mixed-ii: thirds across all three fake categories.
  const std::size_t n1 = f / 3 + (f % 3 > 0 ? 1 : 0);
  const std::size_t n2 = f / 3 + (f % 3 > 1 ? 1 : 0);
  for (std::size_t i = 0; i < f; ++i) {
    Category c = i < n1 ? Category::RvFa : (i < n1 + n2 ? Category::FvRa : Category::FvFa);
    push_test(c, "test_mixed-ii_" + zero_pad(i, 4), {"mixed-ii", "full"});
  }
  return plan;
}

nlohmann::json record_to_json(const ManifestRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["subject_id"] = r.subject_id;
  j["category"] = category_name(r.category);
  j["visual_label"] = r.visual_label;
  j["audio_label"] = r.audio_label;
  j["wav_path"] = r.wav_path;
  j["frames_dir"] = r.frames_dir;
  j["lip_box"] = {r.lip_box.top, r.lip_box.left, r.lip_box.height, r.lip_box.width};
  j["seed"] = r.seed;
  j["split"] = r.split;
  j["subsets"] = r.subsets;
  return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.subject_id = j.at("subject_id").get<int>();
    r.category = category_from_string(j.at("category").get<std::string>());
    r.visual_label = j.at("visual_label").get<bool>();
    r.audio_label = j.at("audio_label").get<bool>();
    r.wav_path = j.at("wav_path").get<std::string>();
    r.frames_dir = j.at("frames_dir").get<std::string>();
    auto box = j.at("lip_box");
    if (!box.is_array() || box.size() != 4) {
      throw io_error("manifest record has malformed lip_box");
    }
    r.lip_box = LipBox{box[0].get<std::size_t>(), box[1].get<std::size_t>(),
                       box[2].get<std::size_t>(), box[3].get<std::size_t>()};
    r.seed = j.at("seed").get<std::uint64_t>();
    r.split = j.at("split").get<std::string>();
    if (j.contains("subsets")) {
      r.subsets = j.at("subsets").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("manifest record is missing or mistypes a field: ") + e.what());
  }
  if (r.visual_label != category_visual_fake(r.category) ||
      r.audio_label != category_audio_fake(r.category)) {
    throw io_error("manifest record labels disagree with its category: " + r.id);
  }
  return r;
}

}  // namespace

Category category_from_string(const std::string& s) {
  if (s == "RvRa") return Category::RvRa;
  if (s == "RvFa") return Category::RvFa;
  if (s == "FvRa") return Category::FvRa;
  if (s == "FvFa") return Category::FvFa;
  throw std::invalid_argument("unknown category: " + s);
}

std::string category_name(Category c) {
  switch (c) {
    case Category::RvRa: return "RvRa";
    case Category::RvFa: return "RvFa";
    case Category::FvRa: return "FvRa";
    case Category::FvFa: return "FvFa";
  }
  throw std::invalid_argument("unknown category value");
}

bool category_visual_fake(Category c) {
  return c == Category::FvRa || c == Category::FvFa;
}

bool category_audio_fake(Category c) {
  return c == Category::RvFa || c == Category::FvFa;
}

int category_video_label(Category c) {
  return c == Category::RvRa ? 0 : 1;
}

const std::vector<std::string>& subset_names() {
  static const std::vector<std::string> names = {"visual-only", "audio-only", "both",
                                                 "mixed-i", "mixed-ii", "full"};
  return names;
}

void GenConfig::validate() const {
  const std::size_t train_total =
      train_counts[0] + train_counts[1] + train_counts[2] + train_counts[3];
  if (train_total + test_reals + test_fakes_per_subset == 0) {
    throw std::invalid_argument("dataset config would generate no samples");
  }
  if (train_subjects == 0 || test_subjects == 0) {
    throw std::invalid_argument("subject pool sizes must be positive");
  }
}

AVSample generate_sample(std::uint64_t global_seed, std::uint64_t index, int subject_id,
                         Category category) {
  AVSample out;
  out.seed = mix_seed(global_seed, index);
  out.subject_id = subject_id;
  out.category = category;
  out.lip_box = kLipBox;

  const bool audio_fake = category_audio_fake(category);
  const bool visual_fake = category_visual_fake(category);

  Rng latent(mix_seed(out.seed, kStreamLatent));
  Rng audio_manip(mix_seed(out.seed, kStreamAudioManip));
  Rng visual_manip(mix_seed(out.seed, kStreamVisualManip));
  Rng audio_noise(mix_seed(out.seed, kStreamAudioNoise));
  Rng visual_noise(mix_seed(out.seed, kStreamVisualNoise));

  const double f0 = subject_f0(global_seed, subject_id);

  // Shared latents, always drawn in this order so counterparts align.
  const double env_freq = latent.uniform(1.5, 4.0);
  const double env_phase = latent.uniform(0.0, 2.0 * kPi);
  const double ph1 = latent.uniform(0.0, 2.0 * kPi);
  const double ph2 = latent.uniform(0.0, 2.0 * kPi);
  const double ph3 = latent.uniform(0.0, 2.0 * kPi);
  std::vector<double> grain(kFrameHeight * kFrameWidth);
  for (double& g : grain) g = 0.03 * latent.uniform(-1.0, 1.0);
  const double head_cx = 16.0 + latent.uniform(-1.5, 1.5);
  const double head_cy = 13.0 + latent.uniform(-1.0, 1.0);

  double a_env_freq = env_freq, a_env_phase = env_phase, extra_phase = 0.0;
  if (audio_fake) {
    a_env_freq = audio_manip.uniform(1.5, 4.0);
    a_env_phase = audio_manip.uniform(0.0, 2.0 * kPi);
    extra_phase = audio_manip.uniform(0.0, 2.0 * kPi);
  }
  double v_env_freq = env_freq, v_env_phase = env_phase, checker_amp = 0.0;
  if (visual_fake) {
    v_env_freq = visual_manip.uniform(1.5, 4.0);
    v_env_phase = visual_manip.uniform(0.0, 2.0 * kPi);
    checker_amp = 0.04 * (0.8 + 0.4 * visual_manip.uniform01());
  }

  out.waveform.sample_rate = kSampleRate;
  out.waveform.samples.resize(kClipSamples);
  for (std::size_t n = 0; n < kClipSamples; ++n) {
    const double t = static_cast<double>(n) / kSampleRate;
    const double e = envelope(t, a_env_freq, a_env_phase);
    double x = 0.26 * e *
               (std::sin(2.0 * kPi * f0 * t + ph1) + 0.6 * std::sin(4.0 * kPi * f0 * t + ph2) +
                0.35 * std::sin(6.0 * kPi * f0 * t + ph3));
    if (audio_fake) {
      x += 0.9 * 0.26 * e * std::sin(2.0 * kPi * 6.31 * f0 * t + extra_phase);
    }
    x += 0.01 * audio_noise.normal();
    out.waveform.samples[n] = quantize_pcm16(x);
  }

  out.frames.count = kVideoFrames;
  out.frames.height = kFrameHeight;
  out.frames.width = kFrameWidth;
  out.frames.pixels.resize(kVideoFrames * kFrameHeight * kFrameWidth);
  for (std::size_t fidx = 0; fidx < kVideoFrames; ++fidx) {
    const double t = static_cast<double>(fidx) / kFps;
    const double lip = 0.25 + 0.5 * envelope(t, v_env_freq, v_env_phase);
    for (std::size_t y = 0; y < kFrameHeight; ++y) {
      for (std::size_t x = 0; x < kFrameWidth; ++x) {
        const double dx = static_cast<double>(x);
        const double dy = static_cast<double>(y);
        double v = 0.15;
        v += 0.55 * std::exp(-((dx - head_cx) * (dx - head_cx) + (dy - head_cy) * (dy - head_cy)) /
                             (2.0 * 7.0 * 7.0));
        v -= 0.25 * std::exp(-((dx - 11.0) * (dx - 11.0) + (dy - 9.0) * (dy - 9.0)) /
                             (2.0 * 1.3 * 1.3));
        v -= 0.25 * std::exp(-((dx - 21.0) * (dx - 21.0) + (dy - 9.0) * (dy - 9.0)) /
                             (2.0 * 1.3 * 1.3));
        v += lip * std::exp(-((dy - 22.0) * (dy - 22.0) / (2.0 * 2.2 * 2.2) +
                              (dx - 16.0) * (dx - 16.0) / (2.0 * 4.5 * 4.5)));
        if (visual_fake) {
          v += checker_amp * (((x + y) & 1) ? 1.0 : -1.0);
        } else {
          v += grain[y * kFrameWidth + x];
        }
        v += 0.01 * visual_noise.normal();
        out.frames.at(fidx, y, x) = quantize_pixel(v);
      }
    }
  }
  return out;
}

std::string gen_config_digest(const GenConfig& cfg) {
  std::ostringstream os;
  os << "seed=" << cfg.seed << ";train_counts=" << cfg.train_counts[0] << ","
     << cfg.train_counts[1] << "," << cfg.train_counts[2] << "," << cfg.train_counts[3]
     << ";balance_factor=" << cfg.balance_factor << ";test_reals=" << cfg.test_reals
     << ";test_fakes_per_subset=" << cfg.test_fakes_per_subset
     << ";train_subjects=" << cfg.train_subjects << ";test_subjects=" << cfg.test_subjects;
  const std::string s = os.str();
  // FNV-1a 64-bit over the canonical key=value string.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Manifest generate_dataset(const GenConfig& cfg, const std::filesystem::path& root, int jobs,
                          std::ostream* log) {
  cfg.validate();
  const std::vector<PlanEntry> plan = layout_plan(cfg);

  Manifest m;
  m.config = cfg;
  m.digest = gen_config_digest(cfg);
  m.records.reserve(plan.size());
  for (const PlanEntry& e : plan) {
    ManifestRecord r;
    r.id = e.id;
    r.subject_id = e.subject_id;
    r.category = e.category;
    r.visual_label = category_visual_fake(e.category);
    r.audio_label = category_audio_fake(e.category);
    r.wav_path = "media/" + e.id + "/audio.wav";
    r.frames_dir = "media/" + e.id;
    r.lip_box = kLipBox;
    r.seed = mix_seed(cfg.seed, e.index);
    r.split = e.split;
    r.subsets = e.subsets;
    m.records.push_back(std::move(r));
  }

  std::error_code ec;
  std::filesystem::create_directories(root / "media", ec);
  if (ec) throw io_error("cannot create dataset directory: " + (root / "media").string());
  for (const PlanEntry& e : plan) {
    std::filesystem::create_directories(root / "media" / e.id, ec);
    if (ec) throw io_error("cannot create sample directory: " + e.id);
  }

#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(plan.size()); ++i) {
    const PlanEntry& e = plan[static_cast<std::size_t>(i)];
    AVSample s = generate_sample(cfg.seed, e.index, e.subject_id, e.category);
    write_wav(root / m.records[static_cast<std::size_t>(i)].wav_path, s.waveform);
    write_frames_dir(root / m.records[static_cast<std::size_t>(i)].frames_dir, s.frames);
  }
  (void)jobs;

  save_manifest(root / "manifest.ndjson", m);
  if (log) {
    *log << "generated " << m.records.size() << " samples under " << root.string() << "\n";
  }
  return m;
}

void save_manifest(const std::filesystem::path& file, const Manifest& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw io_error("cannot write manifest: " + file.string());
  nlohmann::json head;
  head["digest"] = m.digest;
  head["seed"] = m.config.seed;
  head["train_counts"] = m.config.train_counts;
  head["balance_factor"] = m.config.balance_factor;
  head["test_reals"] = m.config.test_reals;
  head["test_fakes_per_subset"] = m.config.test_fakes_per_subset;
  head["train_subjects"] = m.config.train_subjects;
  head["test_subjects"] = m.config.test_subjects;
  out << head.dump() << "\n";
  for (const ManifestRecord& r : m.records) {
    out << record_to_json(r).dump() << "\n";
  }
  if (!out) throw io_error("failed while writing manifest: " + file.string());
}

Manifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw io_error("cannot open manifest: " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw io_error("manifest is empty: " + file.string());

  Manifest m;
  try {
    nlohmann::json head = nlohmann::json::parse(line);
    m.digest = head.at("digest").get<std::string>();
    m.config.seed = head.at("seed").get<std::uint64_t>();
    auto counts = head.at("train_counts");
    if (!counts.is_array() || counts.size() != 4) {
      throw io_error("manifest header has malformed train_counts");
    }
    for (std::size_t i = 0; i < 4; ++i) m.config.train_counts[i] = counts[i].get<std::size_t>();
    m.config.balance_factor = head.at("balance_factor").get<std::size_t>();
    m.config.test_reals = head.at("test_reals").get<std::size_t>();
    m.config.test_fakes_per_subset = head.at("test_fakes_per_subset").get<std::size_t>();
    m.config.train_subjects = head.at("train_subjects").get<std::size_t>();
    m.config.test_subjects = head.at("test_subjects").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("manifest header is malformed: ") + e.what());
  }
  if (m.digest != gen_config_digest(m.config)) {
    throw io_error("manifest digest does not match its recorded config: " + file.string());
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw io_error("manifest line " + std::to_string(line_no) + " is not valid JSON: " +
                     e.what());
    }
    m.records.push_back(record_from_json(j));
  }
  if (m.records.empty()) throw empty_data_error("manifest lists no samples: " + file.string());
  return m;
}

TrainTarget train_target_for(const std::string& model_name) {
  if (model_name == "vn") return TrainTarget::vn;
  if (model_name == "an") return TrainTarget::an;
  if (model_name == "avn-fused" || model_name == "avn-concat" || model_name == "avn") {
    return TrainTarget::avn;
  }
  throw std::invalid_argument("unknown model name: " + model_name);
}

std::vector<LabeledSample> build_training_set(const Manifest& m, TrainTarget target) {
  std::vector<LabeledSample> out;
  std::size_t fake = 0, real = 0;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const ManifestRecord& r = m.records[i];
    if (r.split != "train") continue;
    int label = 0;
    switch (target) {
      case TrainTarget::vn: label = r.visual_label ? 1 : 0; break;
      case TrainTarget::an: label = r.audio_label ? 1 : 0; break;
      case TrainTarget::avn: label = category_video_label(r.category); break;
    }
    (label ? fake : real) += 1;
    out.push_back({i, label});
  }
  if (target == TrainTarget::avn && fake > real) {
    std::size_t need = fake - real;
    for (std::size_t i = 0; i < m.records.size() && need > 0; ++i) {
      if (m.records[i].split != "balance") continue;
      out.push_back({i, 0});
      --need;
    }
  }
  return out;
}

}  // namespace avtenet
