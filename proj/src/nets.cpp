#include "avtenet/nets.hpp"

#include <cmath>
#include <stdexcept>

#include "avtenet/errors.hpp"

namespace avtenet {

namespace {

const Tensor& pget(const ParameterSet& ps, const std::string& name) {
  auto it = ps.find(name);
  if (it == ps.end()) throw std::invalid_argument("missing parameter '" + name + "'");
  return it->second;
}

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init(std::move(shape), -bound, bound, rng);
}

void init_linear(ParameterSet& ps, const std::string& stem, std::size_t in, std::size_t out,
                 Rng& rng) {
  ps.emplace(stem + ".w", xavier({in, out}, in, out, rng));
  ps.emplace(stem + ".b", Tensor({out}, 0.0, true));
}

void init_conv2d(ParameterSet& ps, const std::string& stem, std::size_t c_in, std::size_t c_out,
                 std::size_t k, Rng& rng) {
  ps.emplace(stem + ".w", xavier({c_out, c_in, k, k}, c_in * k * k, c_out * k * k, rng));
  ps.emplace(stem + ".b", Tensor({c_out}, 0.0, true));
}

void init_layer_norm(ParameterSet& ps, const std::string& stem, std::size_t d) {
  ps.emplace(stem + ".g", Tensor({d}, 1.0, true));
  ps.emplace(stem + ".b", Tensor({d}, 0.0, true));
}

Tensor linear(const ParameterSet& ps, const std::string& stem, const Tensor& x) {
  return add_row(matmul(x, pget(ps, stem + ".w")), pget(ps, stem + ".b"));
}

// E: length d -> logits [real, fake].
Tensor head_logits(const ParameterSet& ps, const std::string& prefix, const Tensor& e) {
  Tensor row = reshape(e, {1, e.shape()[0]});
  return reshape(linear(ps, prefix + "head", row), {2});
}

EncoderConfig encoder_cfg(const NetDims& d, std::size_t max_tokens, bool with_cls) {
  EncoderConfig cfg;
  cfg.dim = d.dim;
  cfg.heads = d.heads;
  cfg.layers = d.layers;
  cfg.ffn = d.ffn;
  cfg.max_tokens = max_tokens;
  cfg.with_cls = with_cls;
  cfg.validate();
  return cfg;
}

// Shared frontends (the concat net reuses both).
Tensor audio_patch_tokens(const Waveform& w) {
  if (w.sample_rate != kSampleRate || w.samples.size() != kClipSamples)
    throw std::invalid_argument("audio frontend: expected the canonical clip (" +
                                std::to_string(kClipSamples) + " samples at " +
                                std::to_string(kSampleRate) + " Hz), got " +
                                std::to_string(w.samples.size()) + " at " +
                                std::to_string(w.sample_rate));
  Spectrogram mel = mel_spectrogram(w, AudioNet::kMelBands, AudioNet::kWin, AudioNet::kHop,
                                    AudioNet::kNfft, AudioNet::kFloorEps);
  PatchSequence p = patchify_2d(pad_frames(mel, AudioNet::kTargetFrames), AudioNet::kPatch,
                                AudioNet::kStride);
  return Tensor({p.tokens, p.dim}, std::move(p.data));
}

std::vector<Tensor> video_segment_tokens(const FrameStack& v) {
  if (v.count != kVideoFrames || v.height != kFrameHeight || v.width != kFrameWidth)
    throw std::invalid_argument("video frontend: expected " + std::to_string(kVideoFrames) + "x" +
                                std::to_string(kFrameHeight) + "x" + std::to_string(kFrameWidth) +
                                " frames, got " + std::to_string(v.count) + "x" +
                                std::to_string(v.height) + "x" + std::to_string(v.width));
  std::vector<PatchSequence> segs = tubelet_patchify(v, VideoNet::kSegmentLen, VideoNet::kTubeletT,
                                                     VideoNet::kTubeletH, VideoNet::kTubeletW);
  std::vector<Tensor> out;
  out.reserve(segs.size());
  for (PatchSequence& p : segs) out.emplace_back(Shape{p.tokens, p.dim}, std::move(p.data));
  return out;
}

void check_adopted(const ParameterSet& incoming, const ParameterSet& expected,
                   const std::string& what) {
  for (const auto& [name, t] : expected) {
    auto it = incoming.find(name);
    if (it == incoming.end())
      throw checkpoint_mismatch_error(what + ": missing tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      throw checkpoint_mismatch_error(what + ": tensor '" + name + "' has shape " +
                                      shape_str(it->second.shape()) + ", expected " +
                                      shape_str(t.shape()));
  }
  for (const auto& [name, t] : incoming)
    if (expected.find(name) == expected.end())
      throw checkpoint_mismatch_error(what + ": unexpected tensor '" + name + "'");
}

// Spatial-then-temporal encoder pair used by the video net and the video
// branch of the concat net. Init order fixes the random draw sequence.
void init_video_branch(ParameterSet& ps, const std::string& prefix, const NetDims& dims,
                       Rng& rng) {
  const std::size_t token_dim = VideoNet::kTubeletT * VideoNet::kTubeletH * VideoNet::kTubeletW;
  init_linear(ps, prefix + "patch_proj", token_dim, dims.dim, rng);
  const std::size_t spatial_tokens =
      (VideoNet::kSegmentLen / VideoNet::kTubeletT) * (kFrameHeight / VideoNet::kTubeletH) *
      (kFrameWidth / VideoNet::kTubeletW);
  init_encoder(ps, prefix + "spatial.", encoder_cfg(dims, spatial_tokens + 1, true), rng);
  const std::size_t segments = kVideoFrames / VideoNet::kSegmentLen;
  init_encoder(ps, prefix + "temporal.", encoder_cfg(dims, segments + 1, true), rng);
}

Tensor video_branch_embedding(const ParameterSet& ps, const std::string& prefix,
                              const NetDims& dims, const std::vector<Tensor>& segment_tokens) {
  const std::size_t spatial_tokens =
      (VideoNet::kSegmentLen / VideoNet::kTubeletT) * (kFrameHeight / VideoNet::kTubeletH) *
      (kFrameWidth / VideoNet::kTubeletW);
  const std::size_t segments = kVideoFrames / VideoNet::kSegmentLen;
  if (segment_tokens.size() != segments)
    throw std::invalid_argument("video branch: expected " + std::to_string(segments) +
                                " segments, got " + std::to_string(segment_tokens.size()));
  const EncoderConfig spatial_cfg = encoder_cfg(dims, spatial_tokens + 1, true);
  const EncoderConfig temporal_cfg = encoder_cfg(dims, segments + 1, true);
  std::vector<Tensor> seg_cls;
  seg_cls.reserve(segments);
  for (const Tensor& tokens : segment_tokens) {
    Tensor x = linear(ps, prefix + "patch_proj", tokens);
    EncoderResult r = encoder_forward(ps, prefix + "spatial.", spatial_cfg, x);
    seg_cls.push_back(reshape(r.cls, {1, dims.dim}));
  }
  EncoderResult t = encoder_forward(ps, prefix + "temporal.", temporal_cfg, concat(0, seg_cls));
  return t.cls;
}

std::size_t audio_token_budget() {
  const std::size_t rows = (AudioNet::kMelBands - AudioNet::kPatch) / AudioNet::kStride + 1;
  const std::size_t cols = (AudioNet::kTargetFrames - AudioNet::kPatch) / AudioNet::kStride + 1;
  return rows * cols + 1;
}

void init_audio_branch(ParameterSet& ps, const std::string& prefix, const NetDims& dims,
                       Rng& rng) {
  init_linear(ps, prefix + "patch_proj", AudioNet::kPatch * AudioNet::kPatch, dims.dim, rng);
  init_encoder(ps, prefix + "encoder.", encoder_cfg(dims, audio_token_budget(), true), rng);
}

Tensor audio_branch_embedding(const ParameterSet& ps, const std::string& prefix,
                              const NetDims& dims, const Tensor& patches) {
  Tensor x = linear(ps, prefix + "patch_proj", patches);
  EncoderResult r =
      encoder_forward(ps, prefix + "encoder.", encoder_cfg(dims, audio_token_budget(), true), x);
  return r.cls;
}

Tensor resblock(const ParameterSet& ps, const std::string& pre, const Tensor& x,
                std::size_t stride) {
  Tensor h = relu(add_channel_bias(conv2d(x, pget(ps, pre + "conv1.w"), stride, 1),
                                   pget(ps, pre + "conv1.b")));
  h = add_channel_bias(conv2d(h, pget(ps, pre + "conv2.w"), 1, 1), pget(ps, pre + "conv2.b"));
  Tensor sc = add_channel_bias(conv2d(x, pget(ps, pre + "proj.w"), stride, 0),
                               pget(ps, pre + "proj.b"));
  return relu(add(h, sc));
}

}  // namespace

NetKind net_kind_from_string(const std::string& s) {
  if (s == "vn") return NetKind::vn;
  if (s == "an") return NetKind::an;
  if (s == "avn-fused") return NetKind::avn_fused;
  if (s == "avn-concat") return NetKind::avn_concat;
  throw std::invalid_argument("unknown model '" + s + "' (expected vn, an, avn-fused, avn-concat)");
}

std::string net_kind_name(NetKind k) {
  switch (k) {
    case NetKind::vn: return "vn";
    case NetKind::an: return "an";
    case NetKind::avn_fused: return "avn-fused";
    case NetKind::avn_concat: return "avn-concat";
  }
  throw std::invalid_argument("unknown NetKind");
}

std::string net_prefix(NetKind k) {
  switch (k) {
    case NetKind::vn: return "vn.";
    case NetKind::an: return "an.";
    case NetKind::avn_fused: return "avn_fused.";
    case NetKind::avn_concat: return "avn_concat.";
  }
  throw std::invalid_argument("unknown NetKind");
}

void EncoderConfig::validate() const {
  if (dim == 0 || heads == 0 || ffn == 0)
    throw std::invalid_argument("encoder: dim, heads and ffn must be positive");
  if (dim % heads != 0)
    throw std::invalid_argument("encoder: dim " + std::to_string(dim) + " not divisible by " +
                                std::to_string(heads) + " heads");
  if (layers == 0) throw std::invalid_argument("encoder: at least one layer required");
  if (max_tokens == 0) throw std::invalid_argument("encoder: positional budget must be positive");
}

void init_encoder(ParameterSet& ps, const std::string& prefix, const EncoderConfig& cfg,
                  Rng& rng) {
  cfg.validate();
  if (cfg.with_cls) ps.emplace(prefix + "cls", normal_init({1, cfg.dim}, 0.0, 0.02, rng));
  ps.emplace(prefix + "posemb", Tensor({cfg.max_tokens, cfg.dim}, 0.0, true));
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string lp = prefix + "enc." + std::to_string(i) + ".";
    init_layer_norm(ps, lp + "ln1", cfg.dim);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      ps.emplace(lp + "attn." + w, xavier({cfg.dim, cfg.dim}, cfg.dim, cfg.dim, rng));
    for (const char* b : {"bq", "bk", "bv", "bo"})
      ps.emplace(lp + "attn." + b, Tensor({cfg.dim}, 0.0, true));
    init_layer_norm(ps, lp + "ln2", cfg.dim);
    init_linear(ps, lp + "ffn.fc1", cfg.dim, cfg.ffn, rng);
    init_linear(ps, lp + "ffn.fc2", cfg.ffn, cfg.dim, rng);
  }
  init_layer_norm(ps, prefix + "enc.final_ln", cfg.dim);
}

EncoderResult encoder_forward(const ParameterSet& ps, const std::string& prefix,
                              const EncoderConfig& cfg, const Tensor& tokens) {
  cfg.validate();
  if (tokens.rank() != 2 || tokens.shape()[1] != cfg.dim)
    throw std::invalid_argument("encoder: tokens must be n x " + std::to_string(cfg.dim) +
                                ", got " + shape_str(tokens.shape()));
  Tensor x = tokens;
  if (cfg.with_cls) x = concat(0, {pget(ps, prefix + "cls"), x});
  const std::size_t n = x.shape()[0];
  if (n > cfg.max_tokens)
    throw std::invalid_argument("encoder: " + std::to_string(n) +
                                " tokens exceed positional budget " +
                                std::to_string(cfg.max_tokens));
  const Tensor& posemb = pget(ps, prefix + "posemb");
  x = add(x, n == cfg.max_tokens ? posemb : slice(posemb, 0, 0, n));

  for (std::size_t i = 0; i < cfg.layers; ++i) {
    const std::string lp = prefix + "enc." + std::to_string(i) + ".";
    Tensor h = layer_norm(x, pget(ps, lp + "ln1.g"), pget(ps, lp + "ln1.b"));
    AttentionWeights w{pget(ps, lp + "attn.wq"), pget(ps, lp + "attn.bq"),
                       pget(ps, lp + "attn.wk"), pget(ps, lp + "attn.bk"),
                       pget(ps, lp + "attn.wv"), pget(ps, lp + "attn.bv"),
                       pget(ps, lp + "attn.wo"), pget(ps, lp + "attn.bo")};
    x = add(x, multi_head_attention(h, h, h, cfg.heads, w));
    Tensor h2 = layer_norm(x, pget(ps, lp + "ln2.g"), pget(ps, lp + "ln2.b"));
    x = add(x, linear(ps, lp + "ffn.fc2", gelu(linear(ps, lp + "ffn.fc1", h2))));
  }
  x = layer_norm(x, pget(ps, prefix + "enc.final_ln.g"), pget(ps, prefix + "enc.final_ln.b"));

  EncoderResult out;
  out.seq = x;
  if (cfg.with_cls) out.cls = reshape(slice(x, 0, 0, 1), {cfg.dim});
  return out;
}

void MSTCNConfig::validate() const {
  if (blocks == 0) throw std::invalid_argument("mstcn: at least one block required");
  if (kernels.empty()) throw std::invalid_argument("mstcn: at least one branch required");
  for (std::size_t k : kernels)
    if (k == 0 || k % 2 == 0)
      throw std::invalid_argument("mstcn: kernel sizes must be odd, got " + std::to_string(k));
  if (channels == 0 || channels % kernels.size() != 0)
    throw std::invalid_argument("mstcn: channels " + std::to_string(channels) +
                                " not divisible by " + std::to_string(kernels.size()) +
                                " branches");
}

void init_mstcn(ParameterSet& ps, const std::string& prefix, const MSTCNConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t cb = cfg.channels / cfg.kernels.size();
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    for (std::size_t j = 0; j < cfg.kernels.size(); ++j) {
      const std::size_t k = cfg.kernels[j];
      const std::string stem =
          prefix + "block" + std::to_string(b) + ".branch" + std::to_string(j) + ".";
      ps.emplace(stem + "w",
                 xavier({cb, cfg.channels, k}, cfg.channels * k, cb * k, rng));
      ps.emplace(stem + "b", Tensor({cb}, 0.0, true));
    }
  }
}

Tensor mstcn_forward(const Tensor& seq, const MSTCNConfig& cfg, const ParameterSet& ps,
                     const std::string& prefix) {
  cfg.validate();
  if (seq.rank() != 2 || seq.shape()[1] != cfg.channels)
    throw std::invalid_argument("mstcn: sequence must be t x " + std::to_string(cfg.channels) +
                                ", got " + shape_str(seq.shape()));
  Tensor x = transpose(seq);  // channels x t
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    std::vector<Tensor> branches;
    branches.reserve(cfg.kernels.size());
    for (std::size_t j = 0; j < cfg.kernels.size(); ++j) {
      const std::string stem =
          prefix + "block" + std::to_string(b) + ".branch" + std::to_string(j) + ".";
      branches.push_back(add_channel_bias(
          conv1d(x, pget(ps, stem + "w"), 1, (cfg.kernels[j] - 1) / 2), pget(ps, stem + "b")));
    }
    x = add(x, relu(concat(0, branches)));
  }
  return transpose(x);
}

ClassifierOutput to_classifier_output(const NetOutput& out) {
  const auto& lv = out.logits.values();
  if (lv.size() != 2) throw std::invalid_argument("classifier output: logits must have length 2");
  ClassifierOutput c;
  c.logits = {lv[0], lv[1]};
  const double m = std::max(lv[0], lv[1]);
  const double er = std::exp(lv[0] - m);
  const double ef = std::exp(lv[1] - m);
  c.score_fake = ef / (er + ef);
  c.score_real = 1.0 - c.score_fake;
  c.embedding = out.embedding.values();
  return c;
}

// ----- VideoNet -----

VideoNet::VideoNet(NetDims dims) : dims_(dims) {}

void VideoNet::init(std::uint64_t seed) {
  params_.clear();
  Rng rng(seed);
  init_video_branch(params_, "vn.", dims_, rng);
  init_linear(params_, "vn.head", dims_.dim, 2, rng);
}

void VideoNet::adopt(ParameterSet params) {
  VideoNet tmpl(dims_);
  tmpl.init(0);
  check_adopted(params, tmpl.params_, "vn checkpoint");
  params_ = std::move(params);
}

VideoNet::Input VideoNet::prepare(const FrameStack& v) const {
  return Input{video_segment_tokens(v)};
}

NetOutput VideoNet::forward(const Input& in) const {
  Tensor e = video_branch_embedding(params_, "vn.", dims_, in.segment_tokens);
  return NetOutput{head_logits(params_, "vn.", e), e};
}

// ----- AudioNet -----

AudioNet::AudioNet(NetDims dims) : dims_(dims) {}

void AudioNet::init(std::uint64_t seed) {
  params_.clear();
  Rng rng(seed);
  init_audio_branch(params_, "an.", dims_, rng);
  init_linear(params_, "an.head", dims_.dim, 2, rng);
}

void AudioNet::adopt(ParameterSet params) {
  AudioNet tmpl(dims_);
  tmpl.init(0);
  check_adopted(params, tmpl.params_, "an checkpoint");
  params_ = std::move(params);
}

AudioNet::Input AudioNet::prepare(const Waveform& w) const {
  return Input{audio_patch_tokens(w)};
}

NetOutput AudioNet::forward(const Input& in) const {
  Tensor e = audio_branch_embedding(params_, "an.", dims_, in.patches);
  return NetOutput{head_logits(params_, "an.", e), e};
}

// ----- FusedAVNet -----

FusedAVNet::FusedAVNet(NetDims dims) : dims_(dims) {
  if (dims_.dim % 2 != 0)
    throw std::invalid_argument("fused net: dim must be even (two equal branch widths)");
}

void FusedAVNet::init(std::uint64_t seed) {
  params_.clear();
  Rng rng(seed);
  const std::size_t bw = dims_.dim / 2;
  init_conv2d(params_, "avn_fused.visual.block1.conv1", 1, kResChannels1, 3, rng);
  init_conv2d(params_, "avn_fused.visual.block1.conv2", kResChannels1, kResChannels1, 3, rng);
  init_conv2d(params_, "avn_fused.visual.block1.proj", 1, kResChannels1, 1, rng);
  init_conv2d(params_, "avn_fused.visual.block2.conv1", kResChannels1, kResChannels2, 3, rng);
  init_conv2d(params_, "avn_fused.visual.block2.conv2", kResChannels2, kResChannels2, 3, rng);
  init_conv2d(params_, "avn_fused.visual.block2.proj", kResChannels1, kResChannels2, 1, rng);
  const std::size_t flat = kResChannels2 * (kLipSize / 4) * (kLipSize / 4);
  init_linear(params_, "avn_fused.visual.frame_proj", flat, bw, rng);
  const std::size_t stack_width = (kAudioFrames / kVideoFrames) * kFilters;
  init_linear(params_, "avn_fused.audio.fc1", stack_width, dims_.dim, rng);
  init_linear(params_, "avn_fused.audio.fc2", dims_.dim, bw, rng);
  init_encoder(params_, "avn_fused.", encoder_cfg(dims_, kVideoFrames, false), rng);
  init_linear(params_, "avn_fused.mstcn.in_proj", dims_.dim, mstcn_.channels, rng);
  init_mstcn(params_, "avn_fused.mstcn.", mstcn_, rng);
  init_linear(params_, "avn_fused.mstcn.out_proj", mstcn_.channels, dims_.dim, rng);
  init_linear(params_, "avn_fused.head", dims_.dim, 2, rng);
}

void FusedAVNet::adopt(ParameterSet params) {
  FusedAVNet tmpl(dims_);
  tmpl.init(0);
  check_adopted(params, tmpl.params_, "avn-fused checkpoint");
  params_ = std::move(params);
}

FusedAVNet::Input FusedAVNet::prepare(const Spectrogram& fb, const FrameStack& lips) const {
  if (fb.bins != kFilters || fb.frames != kAudioFrames)
    throw std::invalid_argument("fused net: filterbank must be " + std::to_string(kFilters) + "x" +
                                std::to_string(kAudioFrames) + ", got " + std::to_string(fb.bins) +
                                "x" + std::to_string(fb.frames));
  if (lips.count != kVideoFrames || lips.height != kLipSize || lips.width != kLipSize)
    throw std::invalid_argument("fused net: lip crops must be " + std::to_string(kVideoFrames) +
                                "x" + std::to_string(kLipSize) + "x" + std::to_string(kLipSize) +
                                ", got " + std::to_string(lips.count) + "x" +
                                std::to_string(lips.height) + "x" + std::to_string(lips.width));
  Input in;
  in.audio_rows = stack_audio_frames(fb, kVideoFrames);
  in.frames.reserve(kVideoFrames);
  for (std::size_t f = 0; f < kVideoFrames; ++f) {
    std::vector<double> px(lips.pixels.begin() + static_cast<std::ptrdiff_t>(f * kLipSize * kLipSize),
                           lips.pixels.begin() +
                               static_cast<std::ptrdiff_t>((f + 1) * kLipSize * kLipSize));
    in.frames.emplace_back(Shape{1, kLipSize, kLipSize}, std::move(px));
  }
  return in;
}

NetOutput FusedAVNet::forward(const Input& in) const {
  if (in.frames.size() != kVideoFrames)
    throw std::invalid_argument("fused net: expected " + std::to_string(kVideoFrames) + " frames");
  Tensor audio = linear(params_, "avn_fused.audio.fc2",
                        gelu(linear(params_, "avn_fused.audio.fc1", in.audio_rows)));

  std::vector<Tensor> flats;
  flats.reserve(kVideoFrames);
  for (const Tensor& frame : in.frames) {
    Tensor r = resblock(params_, "avn_fused.visual.block1.", frame, 2);
    r = resblock(params_, "avn_fused.visual.block2.", r, 2);
    flats.push_back(reshape(r, {1, r.numel()}));
  }
  Tensor visual = linear(params_, "avn_fused.visual.frame_proj", concat(0, flats));

  Tensor tokens = concat(1, {visual, audio});
  EncoderResult enc =
      encoder_forward(params_, "avn_fused.", encoder_cfg(dims_, kVideoFrames, false), tokens);
  Tensor t = linear(params_, "avn_fused.mstcn.in_proj", enc.seq);
  t = mstcn_forward(t, mstcn_, params_, "avn_fused.mstcn.");
  t = linear(params_, "avn_fused.mstcn.out_proj", t);
  Tensor e = mean_rows(t);
  return NetOutput{head_logits(params_, "avn_fused.", e), e};
}

// ----- ConcatAVNet -----

ConcatAVNet::ConcatAVNet(NetDims dims) : dims_(dims) {}

void ConcatAVNet::init(std::uint64_t seed) {
  params_.clear();
  Rng rng(seed);
  init_audio_branch(params_, "avn_concat.audio.", dims_, rng);
  init_video_branch(params_, "avn_concat.video.", dims_, rng);
  init_linear(params_, "avn_concat.head", 2 * dims_.dim, 2, rng);
}

void ConcatAVNet::adopt(ParameterSet params) {
  ConcatAVNet tmpl(dims_);
  tmpl.init(0);
  check_adopted(params, tmpl.params_, "avn-concat checkpoint");
  params_ = std::move(params);
}

ConcatAVNet::Input ConcatAVNet::prepare(const Waveform& w, const FrameStack& v) const {
  return Input{AudioNet::Input{audio_patch_tokens(w)}, VideoNet::Input{video_segment_tokens(v)}};
}

NetOutput ConcatAVNet::forward(const Input& in) const {
  Tensor ea = audio_branch_embedding(params_, "avn_concat.audio.", dims_, in.audio.patches);
  Tensor ev = video_branch_embedding(params_, "avn_concat.video.", dims_, in.video.segment_tokens);
  Tensor e = concat(0, {ea, ev});
  return NetOutput{head_logits(params_, "avn_concat.", e), e};
}

}  // namespace avtenet
