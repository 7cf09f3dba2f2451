#pragma once

#include <array>
#include <string>
#include <vector>

#include "avtenet/dsp.hpp"
#include "avtenet/tensor.hpp"

namespace avtenet {

enum class NetKind { vn, an, avn_fused, avn_concat };

// Accepts "vn", "an", "avn-fused", "avn-concat"; throws std::invalid_argument.
NetKind net_kind_from_string(const std::string& s);
std::string net_kind_name(NetKind k);
// Checkpoint tensor-name prefix: "vn.", "an.", "avn_fused.", "avn_concat.".
std::string net_prefix(NetKind k);

// Width knobs shared by all four classifiers. Defaults are the working scale;
// tests shrink them. dim must be divisible by heads and, for the fused net,
// by 2 (its two branch widths are dim/2).
struct NetDims {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn = 128;
};

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn = 128;
  std::size_t max_tokens = 0;  // positional budget, cls included when with_cls
  bool with_cls = true;

  void validate() const;
};

// Pre-norm transformer encoder over prefix-scoped parameters:
//   x += attention(norm(x)); x += ffn(norm(x)); final norm.
// tokens: n x dim (already projected). Exceeding max_tokens throws.
struct EncoderResult {
  Tensor seq;  // n(+1) x dim
  Tensor cls;  // length dim, defined only when with_cls
};
void init_encoder(ParameterSet& ps, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
EncoderResult encoder_forward(const ParameterSet& ps, const std::string& prefix,
                              const EncoderConfig& cfg, const Tensor& tokens);

// Multi-scale temporal convolution stack: each block runs parallel odd-kernel
// branches (channels/branch = channels / #kernels), concatenates them back to
// `channels`, applies ReLU, and adds the block input.
struct MSTCNConfig {
  std::size_t blocks = 2;
  std::vector<std::size_t> kernels = {3, 5, 7};
  std::size_t channels = 66;

  void validate() const;
};
void init_mstcn(ParameterSet& ps, const std::string& prefix, const MSTCNConfig& cfg, Rng& rng);
// seq: t x channels, returns t x channels.
Tensor mstcn_forward(const Tensor& seq, const MSTCNConfig& cfg, const ParameterSet& ps,
                     const std::string& prefix);

// Logit order is [real, fake] everywhere.
struct NetOutput {
  Tensor logits;     // length 2
  Tensor embedding;  // clip-level embedding
};

struct ClassifierOutput {
  std::array<double, 2> logits;  // [real, fake]
  double score_fake;             // softmax(logits)[fake]
  double score_real;             // exactly 1 - score_fake
  std::vector<double> embedding;
};
ClassifierOutput to_classifier_output(const NetOutput& out);

// ----- the four classifiers -----
// Each holds its ParameterSet; init() draws fresh parameters from a seed,
// adopt() takes checkpoint contents and validates names and shapes against
// the architecture (checkpoint_mismatch_error on any discrepancy).
// prepare() runs the non-learned frontend so training loops can cache it.

// Video branch: 16x32x32 frames, 4-frame segments cut into 4x8x8 tubelets
// (16 tokens of dim 256 per segment); a spatial encoder summarizes each
// segment, a temporal encoder summarizes the 4 segment embeddings.
class VideoNet {
 public:
  static constexpr std::size_t kSegmentLen = 4;
  static constexpr std::size_t kTubeletT = 4, kTubeletH = 8, kTubeletW = 8;

  struct Input {
    std::vector<Tensor> segment_tokens;  // per segment: 16 x 256 leaf
  };

  explicit VideoNet(NetDims dims = {});
  void init(std::uint64_t seed);
  void adopt(ParameterSet params);
  Input prepare(const FrameStack& v) const;
  NetOutput forward(const Input& in) const;
  NetOutput forward(const FrameStack& v) const { return forward(prepare(v)); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const NetDims& dims() const { return dims_; }

 private:
  NetDims dims_;
  ParameterSet params_;
};

// Audio branch: 64-band log-mel of the canonical clip (64x62, padded to
// 64x64), 16x16 patches at stride 10 (5x5 = 25 tokens of dim 256).
class AudioNet {
 public:
  static constexpr std::size_t kMelBands = 64;
  static constexpr std::size_t kWin = 400, kHop = 160, kNfft = 512;
  static constexpr std::size_t kTargetFrames = 64;
  static constexpr std::size_t kPatch = 16, kStride = 10;
  static constexpr double kFloorEps = 1e-10;

  struct Input {
    Tensor patches;  // 25 x 256 leaf
  };

  explicit AudioNet(NetDims dims = {});
  void init(std::uint64_t seed);
  void adopt(ParameterSet params);
  Input prepare(const Waveform& w) const;
  NetOutput forward(const Input& in) const;
  NetOutput forward(const Waveform& w) const { return forward(prepare(w)); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const NetDims& dims() const { return dims_; }

 private:
  NetDims dims_;
  ParameterSet params_;
};

// Fused audio-visual net: 16x16 lip crops through a small two-block strided
// ResNet to dim/2 per frame; 26-band log filterbank stacked 4 audio frames
// per video frame through an MLP to dim/2; channel-concatenated tokens run
// through a cls-free encoder and an MS-TCN; the embedding is the temporal
// mean.
class FusedAVNet {
 public:
  static constexpr std::size_t kFilters = 26;
  static constexpr std::size_t kAudioFrames = 64;
  static constexpr std::size_t kLipSize = 16;
  static constexpr std::size_t kResChannels1 = 8, kResChannels2 = 16;

  struct Input {
    Tensor audio_rows;           // 16 x (4 * 26) leaf
    std::vector<Tensor> frames;  // 16 leaves, each 1 x 16 x 16
  };

  explicit FusedAVNet(NetDims dims = {});
  void init(std::uint64_t seed);
  void adopt(ParameterSet params);
  Input prepare(const Spectrogram& fb, const FrameStack& lips) const;
  NetOutput forward(const Input& in) const;
  NetOutput forward(const Spectrogram& fb, const FrameStack& lips) const {
    return forward(prepare(fb, lips));
  }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const NetDims& dims() const { return dims_; }
  const MSTCNConfig& mstcn() const { return mstcn_; }

 private:
  NetDims dims_;
  MSTCNConfig mstcn_;
  ParameterSet params_;
};

// Concatenation variant: independent audio and video branches with the same
// shapes as AudioNet/VideoNet; the embedding is [audio cls | video cls].
class ConcatAVNet {
 public:
  struct Input {
    AudioNet::Input audio;
    VideoNet::Input video;
  };

  explicit ConcatAVNet(NetDims dims = {});
  void init(std::uint64_t seed);
  void adopt(ParameterSet params);
  Input prepare(const Waveform& w, const FrameStack& v) const;
  NetOutput forward(const Input& in) const;
  NetOutput forward(const Waveform& w, const FrameStack& v) const { return forward(prepare(w, v)); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const NetDims& dims() const { return dims_; }

 private:
  NetDims dims_;
  ParameterSet params_;
};

}  // namespace avtenet
