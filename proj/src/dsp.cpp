#include "avtenet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "avtenet/errors.hpp"

namespace avtenet {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (im.size() != n) throw std::invalid_argument("fft: re/im size mismatch");
  if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::size_t a = i + j, b = i + j + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

Spectrogram stft_magnitude(const Waveform& w, std::size_t win, std::size_t hop, std::size_t nfft) {
  if (win == 0 || hop == 0) throw std::invalid_argument("stft: win and hop must be positive");
  if (win > nfft) throw std::invalid_argument("stft: window longer than nfft");
  if (!is_pow2(nfft)) throw std::invalid_argument("stft: nfft must be a power of two");
  if (w.samples.size() < win)
    throw std::invalid_argument("stft: signal shorter than one window (" +
                                std::to_string(w.samples.size()) + " < " + std::to_string(win) +
                                ")");
  const std::size_t frames = (w.samples.size() - win) / hop + 1;
  const std::size_t bins = nfft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(win));

  Spectrogram out;
  out.bins = bins;
  out.frames = frames;
  out.values.assign(bins * frames, 0.0);

  std::vector<double> re(nfft), im(nfft);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const std::size_t off = f * hop;
    for (std::size_t i = 0; i < win; ++i) re[i] = w.samples[off + i] * window[i];
    fft_radix2(re, im);
    for (std::size_t b = 0; b < bins; ++b)
      out.at(b, f) = std::sqrt(re[b] * re[b] + im[b] * im[b]);
  }
  return out;
}

Spectrogram mel_spectrogram(const Waveform& w, std::size_t n_mels, std::size_t win,
                            std::size_t hop, std::size_t nfft, double floor_eps) {
  if (n_mels == 0) throw std::invalid_argument("mel: need at least one band");
  const Spectrogram mag = stft_magnitude(w, win, hop, nfft);
  const std::size_t bins = mag.bins;
  const double nyquist = static_cast<double>(w.sample_rate) / 2.0;

  // n_mels + 2 edge points equally spaced on the mel axis.
  std::vector<double> edges_hz(n_mels + 2);
  const double mel_hi = hz_to_mel(nyquist);
  for (std::size_t i = 0; i < edges_hz.size(); ++i)
    edges_hz[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  Spectrogram out;
  out.bins = n_mels;
  out.frames = mag.frames;
  out.values.assign(n_mels * mag.frames, 0.0);

  const double bin_hz = static_cast<double>(w.sample_rate) / static_cast<double>(nfft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges_hz[m], mid = edges_hz[m + 1], hi = edges_hz[m + 2];
    for (std::size_t b = 0; b < bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double weight = 0.0;
      if (f > lo && f < hi)
        weight = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (weight <= 0.0) continue;
      for (std::size_t fr = 0; fr < mag.frames; ++fr) {
        const double p = mag.at(b, fr);
        out.at(m, fr) += weight * p * p;
      }
    }
  }
  for (double& v : out.values) v = std::log(std::max(v, floor_eps));
  return out;
}

Spectrogram pad_frames(const Spectrogram& s, std::size_t target_frames) {
  if (target_frames == 0) throw std::invalid_argument("pad_frames: target must be positive");
  if (s.frames == 0) throw std::invalid_argument("pad_frames: empty spectrogram");
  if (s.frames == target_frames) return s;
  Spectrogram out;
  out.bins = s.bins;
  out.frames = target_frames;
  out.values.assign(s.bins * target_frames, 0.0);
  for (std::size_t b = 0; b < s.bins; ++b)
    for (std::size_t f = 0; f < target_frames; ++f)
      out.at(b, f) = s.at(b, std::min(f, s.frames - 1));
  return out;
}

Spectrogram log_filterbank(const Waveform& w, std::size_t n_filters, std::size_t win,
                           std::size_t hop, std::size_t nfft, std::size_t target_frames) {
  return pad_frames(mel_spectrogram(w, n_filters, win, hop, nfft), target_frames);
}

PatchSequence patchify_2d(const Spectrogram& s, std::size_t patch, std::size_t stride) {
  if (patch == 0 || stride == 0) throw std::invalid_argument("patchify: patch/stride must be positive");
  if (s.bins < patch || s.frames < patch)
    throw std::invalid_argument("patchify: input " + std::to_string(s.bins) + "x" +
                                std::to_string(s.frames) + " smaller than patch");
  PatchSequence out;
  out.grid_rows = (s.bins - patch) / stride + 1;
  out.grid_cols = (s.frames - patch) / stride + 1;
  out.tokens = out.grid_rows * out.grid_cols;
  out.dim = patch * patch;
  out.data.resize(out.tokens * out.dim);
  std::size_t tok = 0;
  for (std::size_t gy = 0; gy < out.grid_rows; ++gy) {
    for (std::size_t gx = 0; gx < out.grid_cols; ++gx, ++tok) {
      double* dst = out.data.data() + tok * out.dim;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          dst[y * patch + x] = s.at(gy * stride + y, gx * stride + x);
    }
  }
  return out;
}

std::vector<PatchSequence> tubelet_patchify(const FrameStack& v, std::size_t segment_len,
                                            std::size_t t, std::size_t h, std::size_t w) {
  if (segment_len == 0 || t == 0 || h == 0 || w == 0)
    throw std::invalid_argument("tubelet: sizes must be positive");
  if (v.count % segment_len != 0)
    throw std::invalid_argument("tubelet: " + std::to_string(v.count) +
                                " frames not divisible into segments of " +
                                std::to_string(segment_len));
  if (segment_len % t != 0 || v.height % h != 0 || v.width % w != 0)
    throw std::invalid_argument("tubelet: tubelet size does not tile the segment");

  const std::size_t segments = v.count / segment_len;
  const std::size_t gt = segment_len / t, gy = v.height / h, gx = v.width / w;
  std::vector<PatchSequence> out(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    PatchSequence& ps = out[s];
    ps.grid_rows = gy;
    ps.grid_cols = gx;
    ps.tokens = gt * gy * gx;
    ps.dim = t * h * w;
    ps.data.resize(ps.tokens * ps.dim);
    std::size_t tok = 0;
    for (std::size_t it = 0; it < gt; ++it) {
      for (std::size_t iy = 0; iy < gy; ++iy) {
        for (std::size_t ix = 0; ix < gx; ++ix, ++tok) {
          double* dst = ps.data.data() + tok * ps.dim;
          for (std::size_t dt = 0; dt < t; ++dt)
            for (std::size_t dy = 0; dy < h; ++dy)
              for (std::size_t dx = 0; dx < w; ++dx)
                dst[(dt * h + dy) * w + dx] =
                    v.at(s * segment_len + it * t + dt, iy * h + dy, ix * w + dx);
        }
      }
    }
  }
  return out;
}

FrameStack crop_lip(const FrameStack& v, const LipBox& box) {
  if (box.height == 0 || box.width == 0) throw std::invalid_argument("crop_lip: empty box");
  if (box.top + box.height > v.height || box.left + box.width > v.width)
    throw std::invalid_argument("crop_lip: box exceeds frame bounds");
  FrameStack out;
  out.count = v.count;
  out.height = box.height;
  out.width = box.width;
  out.pixels.resize(out.count * out.height * out.width);
  for (std::size_t f = 0; f < v.count; ++f)
    for (std::size_t y = 0; y < box.height; ++y)
      for (std::size_t x = 0; x < box.width; ++x)
        out.at(f, y, x) = v.at(f, box.top + y, box.left + x);
  return out;
}

Tensor stack_audio_frames(const Spectrogram& s, std::size_t video_frames) {
  if (video_frames == 0) throw std::invalid_argument("stack_audio_frames: need at least one frame");
  if (s.frames % video_frames != 0)
    throw std::invalid_argument("stack_audio_frames: " + std::to_string(s.frames) +
                                " audio frames not divisible by " + std::to_string(video_frames) +
                                " video frames");
  const std::size_t per = s.frames / video_frames;
  const std::size_t width = per * s.bins;
  std::vector<double> data(video_frames * width);
  for (std::size_t v = 0; v < video_frames; ++v)
    for (std::size_t a = 0; a < per; ++a)
      for (std::size_t b = 0; b < s.bins; ++b)
        data[v * width + a * s.bins + b] = s.at(b, v * per + a);
  return Tensor({video_frames, width}, std::move(data));
}

// ----- media I/O -----

namespace {

void put_u16le(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t get_u16le(std::istream& is, const char* what) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw io_error(std::string("wav: truncated ") + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32le(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw io_error(std::string("wav: truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("wav: cannot open '" + path.string() + "'");
  char tag[4];
  if (!is.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0)
    throw io_error("wav: '" + path.string() + "' is not RIFF");
  get_u32le(is, "riff size");
  if (!is.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0)
    throw io_error("wav: '" + path.string() + "' is not WAVE");

  Waveform w;
  bool have_fmt = false, have_data = false;
  while (is.read(tag, 4)) {
    const std::uint32_t chunk_size = get_u32le(is, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t format = get_u16le(is, "fmt");
      const std::uint16_t channels = get_u16le(is, "fmt");
      const std::uint32_t rate = get_u32le(is, "fmt");
      get_u32le(is, "fmt");
      get_u16le(is, "fmt");
      const std::uint16_t bits = get_u16le(is, "fmt");
      if (format != 1 || channels != 1 || bits != 16)
        throw io_error("wav: '" + path.string() + "' is not PCM16 mono");
      w.sample_rate = static_cast<int>(rate);
      if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw io_error("wav: data chunk before fmt in '" + path.string() + "'");
      const std::size_t n = chunk_size / 2;
      w.samples.resize(n);
      std::vector<unsigned char> raw(chunk_size);
      if (!is.read(reinterpret_cast<char*>(raw.data()), chunk_size))
        throw io_error("wav: truncated data in '" + path.string() + "'");
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s = static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      have_data = true;
    } else {
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_data) throw io_error("wav: no data chunk in '" + path.string() + "'");
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("wav: cannot open '" + path.string() + "' for writing");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  put_u32le(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32le(os, 16);
  put_u16le(os, 1);
  put_u16le(os, 1);
  put_u32le(os, static_cast<std::uint32_t>(w.sample_rate));
  put_u32le(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16le(os, 2);
  put_u16le(os, 16);
  os.write("data", 4);
  put_u32le(os, data_bytes);
  for (double x : w.samples) {
    long q = std::lround(x * 32768.0);
    q = std::min(32767L, std::max(-32768L, q));
    put_u16le(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!os) throw io_error("wav: write failed for '" + path.string() + "'");
}

namespace {

int pgm_token(std::istream& is, const std::filesystem::path& path) {
  // Skips whitespace and '#' comments, returns the next integer token.
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw io_error("pgm: malformed header in '" + path.string() + "'");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = is.get();
  }
  return v;
}

}  // namespace

FrameStack read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("pgm: cannot open '" + path.string() + "'");
  char p, five;
  is.get(p);
  is.get(five);
  if (!is || p != 'P' || five != '5') throw io_error("pgm: '" + path.string() + "' is not binary P5");
  const int w = pgm_token(is, path);
  const int h = pgm_token(is, path);
  const int maxval = pgm_token(is, path);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw io_error("pgm: unsupported geometry or maxval in '" + path.string() + "'");
  FrameStack out;
  out.count = 1;
  out.height = static_cast<std::size_t>(h);
  out.width = static_cast<std::size_t>(w);
  std::vector<unsigned char> raw(out.height * out.width);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw io_error("pgm: truncated pixels in '" + path.string() + "'");
  out.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.pixels[i] = static_cast<double>(raw[i]) / 255.0;
  return out;
}

void write_pgm(const std::filesystem::path& path, const FrameStack& single) {
  if (single.count != 1) throw std::invalid_argument("pgm: expected exactly one frame");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("pgm: cannot open '" + path.string() + "' for writing");
  os << "P5\n" << single.width << " " << single.height << "\n255\n";
  for (double v : single.pixels) {
    long q = std::lround(v * 255.0);
    q = std::min(255L, std::max(0L, q));
    os.put(static_cast<char>(static_cast<unsigned char>(q)));
  }
  if (!os) throw io_error("pgm: write failed for '" + path.string() + "'");
}

namespace {

std::string frame_name(std::size_t i) {
  std::ostringstream os;
  os << "frame_" << (i < 100 ? (i < 10 ? "00" : "0") : "") << i << ".pgm";
  return os.str();
}

}  // namespace

FrameStack read_frames_dir(const std::filesystem::path& dir, std::size_t count) {
  if (count == 0) throw std::invalid_argument("frames: count must be positive");
  FrameStack out;
  for (std::size_t i = 0; i < count; ++i) {
    FrameStack one = read_pgm(dir / frame_name(i));
    if (i == 0) {
      out.count = count;
      out.height = one.height;
      out.width = one.width;
      out.pixels.resize(count * one.height * one.width);
    } else if (one.height != out.height || one.width != out.width) {
      throw io_error("frames: inconsistent dimensions in '" + dir.string() + "'");
    }
    std::copy(one.pixels.begin(), one.pixels.end(),
              out.pixels.begin() + static_cast<std::ptrdiff_t>(i * out.height * out.width));
  }
  return out;
}

void write_frames_dir(const std::filesystem::path& dir, const FrameStack& v) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < v.count; ++i) {
    FrameStack one;
    one.count = 1;
    one.height = v.height;
    one.width = v.width;
    one.pixels.assign(v.pixels.begin() + static_cast<std::ptrdiff_t>(i * v.height * v.width),
                      v.pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * v.height * v.width));
    write_pgm(dir / frame_name(i), one);
  }
}

}  // namespace avtenet
