#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "avtenet/dsp.hpp"

namespace avtenet {

// Sample categories: R/F marks the visual stream, then the audio stream.
enum class Category { RvRa, RvFa, FvRa, FvFa };

Category category_from_string(const std::string& s);
std::string category_name(Category c);
bool category_visual_fake(Category c);
bool category_audio_fake(Category c);
// Video-level truth: fake iff anything was manipulated.
int category_video_label(Category c);

inline constexpr LipBox kLipBox{14, 8, 16, 16};

struct AVSample {
  std::uint64_t seed = 0;  // per-sample stream seed
  int subject_id = 0;
  Category category = Category::RvRa;
  Waveform waveform;
  FrameStack frames;
  LipBox lip_box = kLipBox;
};

// Deterministic clip synthesis. The per-sample seed is
// mix_seed(global_seed, index); real content draws from sub-streams shared by
// all categories of the same (global_seed, index, subject), so a manipulated
// sample and its pristine counterpart agree bit-for-bit on the untouched
// modality. Media are quantized onto the PCM16 / 8-bit grids at generation
// time, so disk round-trips are exact.
//
// Audio: three-harmonic voiced tone (subject-specific f0) under a slow
// sinusoidal envelope plus measurement noise. Manipulation redraws the
// envelope and injects an inharmonic partial at 6.31 * f0.
// Video: head blob, eyes and an envelope-driven mouth over static film
// grain plus noise. Manipulation redraws the mouth envelope (desyncing it
// from the audio) and swaps the grain for a checkerboard texture.
AVSample generate_sample(std::uint64_t global_seed, std::uint64_t index, int subject_id,
                         Category category);

struct GenConfig {
  std::uint64_t seed = 42;
  // Training clips per category, ordered RvRa, RvFa, FvRa, FvFa.
  std::array<std::size_t, 4> train_counts = {500, 500, 500, 500};
  // Extra pristine training clips (factor * train_counts[RvRa]) kept in a
  // separate "balance" split to even out class counts where a label mapping
  // needs it.
  std::size_t balance_factor = 2;
  std::size_t test_reals = 60;
  std::size_t test_fakes_per_subset = 60;
  std::size_t train_subjects = 40;
  std::size_t test_subjects = 12;  // disjoint pool, ids offset by 1000

  void validate() const;
};

std::string gen_config_digest(const GenConfig& cfg);

struct ManifestRecord {
  std::string id;
  int subject_id = 0;
  Category category = Category::RvRa;
  bool visual_label = false;
  bool audio_label = false;
  std::string wav_path;    // relative to the dataset root
  std::string frames_dir;  // relative to the dataset root
  LipBox lip_box = kLipBox;
  std::uint64_t seed = 0;
  std::string split;                 // "train" | "balance" | "test"
  std::vector<std::string> subsets;  // named test subsets (test split only)
};

struct Manifest {
  GenConfig config;
  std::string digest;
  std::vector<ManifestRecord> records;
};

// Test subsets: every subset shares all test reals; fakes are
//   visual-only -> FvRa, audio-only -> RvFa, both -> FvFa,
//   mixed-i     -> half RvFa + half FvRa,
//   mixed-ii    -> thirds RvFa / FvRa / FvFa,
//   full        -> every test sample.
const std::vector<std::string>& subset_names();

// Lays out the sample plan deterministically, writes media under
// root/media/<id>/ (jobs > 1 parallelizes synthesis; output is identical)
// and the manifest to root/manifest.ndjson, then returns it.
Manifest generate_dataset(const GenConfig& cfg, const std::filesystem::path& root, int jobs,
                          std::ostream* log = nullptr);

// NDJSON, first line carries the config and its digest.
void save_manifest(const std::filesystem::path& file, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& file);

// Which label a component trains on.
enum class TrainTarget { vn, an, avn };
TrainTarget train_target_for(const std::string& model_name);

struct LabeledSample {
  std::size_t record_index = 0;
  int label_fake = 0;
};

// Training examples for one component:
//   vn  - train split, label = visual_label
//   an  - train split, label = audio_label
//   avn - train split, label = video-level; pristine "balance" records are
//         appended (label 0) until classes even out or the pool runs dry.
std::vector<LabeledSample> build_training_set(const Manifest& m, TrainTarget target);

}  // namespace avtenet
