#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "avtenet/tensor.hpp"

namespace avtenet {

// Canonical clip geometry used throughout: 0.64 s of 16 kHz mono audio
// aligned with 16 grayscale frames at 25 fps.
inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 10240;
inline constexpr std::size_t kVideoFrames = 16;
inline constexpr std::size_t kFrameHeight = 32;
inline constexpr std::size_t kFrameWidth = 32;
inline constexpr double kFps = 25.0;

struct Waveform {
  int sample_rate = kSampleRate;
  std::vector<double> samples;
};

// Row-major bins x frames.
struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;

  double at(std::size_t b, std::size_t f) const { return values[b * frames + f]; }
  double& at(std::size_t b, std::size_t f) { return values[b * frames + f]; }
};

// Row-major count x height x width, values in [0, 1].
struct FrameStack {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  double at(std::size_t f, std::size_t y, std::size_t x) const {
    return pixels[(f * height + y) * width + x];
  }
  double& at(std::size_t f, std::size_t y, std::size_t x) {
    return pixels[(f * height + y) * width + x];
  }
};

// Flattened patches, one row per token.
struct PatchSequence {
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<double> data;
};

struct LipBox {
  std::size_t top = 0, left = 0, height = 0, width = 0;
};

// In-place radix-2 FFT; n must be a power of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

// Hann-windowed magnitude STFT: (nfft/2 + 1) x frames,
// frames = floor((len - win) / hop) + 1. Frames are zero-padded to nfft.
// Errors: signal shorter than one window, win > nfft, nfft not a power of two.
Spectrogram stft_magnitude(const Waveform& w, std::size_t win, std::size_t hop, std::size_t nfft);

// Triangular mel filterbank (HTK scale, 2595*log10(1 + f/700)) over the power
// spectrum, filters spanning 0..sr/2; values are ln(max(energy, floor_eps)).
Spectrogram mel_spectrogram(const Waveform& w, std::size_t n_mels, std::size_t win,
                            std::size_t hop, std::size_t nfft, double floor_eps = 1e-10);

// Pads by replicating the last frame, truncates by keeping the first frames.
Spectrogram pad_frames(const Spectrogram& s, std::size_t target_frames);

// mel_spectrogram with n_filters bands, frame count forced to target_frames.
Spectrogram log_filterbank(const Waveform& w, std::size_t n_filters, std::size_t win,
                           std::size_t hop, std::size_t nfft, std::size_t target_frames);

// Square patches over a spectrogram treated as an image (rows = bins).
// Positions step by stride; trailing rows/columns that do not fit are dropped.
PatchSequence patchify_2d(const Spectrogram& s, std::size_t patch, std::size_t stride);

// Splits the stack into segments of segment_len frames and cuts each segment
// into t x h x w tubelets (t == segment_len), flattened row-major (t, y, x).
// All divisibility requirements are checked.
std::vector<PatchSequence> tubelet_patchify(const FrameStack& v, std::size_t segment_len,
                                            std::size_t t, std::size_t h, std::size_t w);

FrameStack crop_lip(const FrameStack& v, const LipBox& box);

// Distributes audio frames evenly over video_frames rows: row v is the
// concatenation of its audio frames' bin columns. frames must be divisible
// by video_frames; row width = (frames / video_frames) * bins.
Tensor stack_audio_frames(const Spectrogram& s, std::size_t video_frames);

// ----- media I/O -----
// WAV: PCM16 mono; samples quantized on the 1/32768 grid so write/read
// round-trips are exact. PGM: binary P5, maxval 255, grid 1/255.

Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

FrameStack read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const FrameStack& single);

// Directory of frame_000.pgm .. frame_{count-1}.pgm, identical dimensions.
FrameStack read_frames_dir(const std::filesystem::path& dir, std::size_t count);
void write_frames_dir(const std::filesystem::path& dir, const FrameStack& v);

}  // namespace avtenet
