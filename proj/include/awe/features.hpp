// awe/features.hpp

// Copyright 2026  The awe-qbe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Waveform input, log Mel filterbank extraction, and the frame-matrix type
// shared by every other module.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "awe/common.hpp"

namespace awe {

struct Waveform {
  std::vector<float> samples;
  double sample_rate = 16000.0;
};

// T x D matrix of frame features, row-major (one row per frame).
struct FeatureSequence {
  std::size_t num_frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  double frame_shift = 0.010;
  double frame_length = 0.025;

  FeatureSequence() = default;
  FeatureSequence(std::size_t frames, std::size_t d, float fill = 0.0f)
      : num_frames(frames), dim(d), data(frames * d, fill) {}

  float& operator()(std::size_t t, std::size_t k) { return data[t * dim + k]; }
  float operator()(std::size_t t, std::size_t k) const { return data[t * dim + k]; }
  std::span<float> row(std::size_t t) { return {data.data() + t * dim, dim}; }
  std::span<const float> row(std::size_t t) const { return {data.data() + t * dim, dim}; }
  bool empty() const { return num_frames == 0; }

  // Rows [begin, end).
  FeatureSequence slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > num_frames)
      throw ValidationError(str_cat("slice [", begin, ",", end, ") out of range for ", num_frames,
                                    " frames"));
    FeatureSequence out(end - begin, dim);
    out.frame_shift = frame_shift;
    out.frame_length = frame_length;
    std::copy(data.begin() + static_cast<std::ptrdiff_t>(begin * dim),
              data.begin() + static_cast<std::ptrdiff_t>(end * dim), out.data.begin());
    return out;
  }

  bool operator==(const FeatureSequence&) const = default;
};

// ---------------------------------------------------------------------------
// AWEF feature blob: 16-byte header {"AWEF", version, rows, cols} followed by
// rows*cols little-endian float32, row-major.

inline constexpr std::uint32_t kAwefVersion = 1;

inline std::string encode_awef(const FeatureSequence& seq) {
  ByteWriter w;
  w.raw("AWEF");
  w.u32(kAwefVersion);
  w.u32(static_cast<std::uint32_t>(seq.num_frames));
  w.u32(static_cast<std::uint32_t>(seq.dim));
  for (float v : seq.data) w.f32(v);
  return w.bytes();
}

// `name` identifies the blob in error messages.
inline FeatureSequence decode_awef(std::string_view bytes, const std::string& name) {
  if (bytes.size() < 16)
    throw IntegrityError(str_cat("feature blob '", name, "' truncated: ", bytes.size(),
                                 " bytes, header needs 16"));
  if (bytes.substr(0, 4) != "AWEF")
    throw IntegrityError(str_cat("feature blob '", name, "' has bad magic"));
  ByteReader r(bytes.substr(4), name);
  const auto version = r.u32();
  if (version != kAwefVersion)
    throw IntegrityError(str_cat("feature blob '", name, "' has unsupported version ", version));
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  const std::size_t expected = rows * cols * 4;
  if (r.remaining() != expected)
    throw IntegrityError(str_cat("feature blob '", name, "' truncated or oversized: payload ",
                                 r.remaining(), " bytes, header implies ", expected));
  FeatureSequence seq(rows, cols);
  for (auto& v : seq.data) v = r.f32();
  return seq;
}

inline void write_awef(const std::filesystem::path& path, const FeatureSequence& seq) {
  write_file(path, encode_awef(seq));
}

inline FeatureSequence read_awef(const std::filesystem::path& path) {
  return decode_awef(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// WAV I/O (RIFF/WAVE, PCM 16-bit, mono only).

inline Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0)
    throw FormatError(str_cat(where, ": not a RIFF/WAVE file (header)"));

  ByteReader r(std::string_view(bytes).substr(12), where);
  bool have_fmt = false;
  std::uint32_t format = 0, channels = 0, rate = 0, bits = 0;
  while (r.remaining() >= 8) {
    const auto id = std::string(r.raw(4));
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16 || r.remaining() < size)
        throw FormatError(str_cat(where, ": fmt chunk size=", size, " malformed"));
      auto body = r.raw(size);
      ByteReader f(body, where);
      const auto fmt_and_channels = f.u32();
      format = fmt_and_channels & 0xffffu;
      channels = fmt_and_channels >> 16;
      rate = f.u32();
      f.u32();  // byte rate
      bits = f.u32() >> 16;
      have_fmt = true;
      if (format != 1) throw FormatError(str_cat(where, ": format=", format, " unsupported (PCM only)"));
      if (channels != 1) throw FormatError(str_cat("channels=", channels, " unsupported (", where, ")"));
      if (bits != 16) throw FormatError(str_cat(where, ": bits_per_sample=", bits, " unsupported"));
      if (rate == 0) throw FormatError(str_cat(where, ": sample_rate=0"));
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(str_cat(where, ": data chunk before fmt chunk"));
      if (r.remaining() < size)
        throw FormatError(str_cat(where, ": data chunk size=", size, " exceeds remaining ",
                                  r.remaining(), " bytes"));
      if (size % 2 != 0) throw FormatError(str_cat(where, ": data chunk size=", size, " is odd"));
      auto body = r.raw(size);
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto lo = static_cast<unsigned char>(body[2 * i]);
        const auto hi = static_cast<unsigned char>(body[2 * i + 1]);
        const auto s = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        w.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      if (w.samples.empty()) throw FormatError(str_cat(where, ": data chunk is empty"));
      return w;
    } else {
      r.raw(std::min<std::size_t>(size + (size & 1u), r.remaining()));
    }
  }
  throw FormatError(str_cat(where, have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  ByteWriter out;
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const auto rate = static_cast<std::uint32_t>(w.sample_rate);
  out.raw("RIFF");
  out.u32(36 + 2 * n);
  out.raw("WAVE");
  out.raw("fmt ");
  out.u32(16);
  out.u32(1u | (1u << 16));  // PCM, mono
  out.u32(rate);
  out.u32(rate * 2);
  out.u32(2u | (16u << 16));  // block align, bits
  out.raw("data");
  out.u32(2 * n);
  std::string pcm(2 * n, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    const float clipped = std::clamp(w.samples[i], -1.0f, 32767.0f / 32768.0f);
    const auto s = static_cast<std::int16_t>(std::lround(clipped * 32768.0f));
    const auto u = static_cast<std::uint16_t>(s);
    pcm[2 * i] = static_cast<char>(u & 0xff);
    pcm[2 * i + 1] = static_cast<char>(u >> 8);
  }
  out.raw(pcm);
  write_file(path, out.bytes());
}

// ---------------------------------------------------------------------------
// Log Mel filterbank.

enum class WindowType { kHamming, kHann };

struct FbankConfig {
  double frame_length = 0.025;  // seconds
  double frame_shift = 0.010;   // seconds
  std::size_t n_mels = 64;
  double fmin = 20.0;
  std::optional<double> fmax;  // unset: sample_rate / 2
  double log_floor = 1e-10;
  double preemphasis = 0.97;
  WindowType window = WindowType::kHamming;
};

inline double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FramingInfo {
  std::size_t win_samples;
  std::size_t hop_samples;
  std::size_t fft_size;
  double fmax;
};

inline FramingInfo validate_fbank(const FbankConfig& cfg, double sample_rate) {
  if (!(sample_rate > 0)) throw ValidationError("sample_rate must be > 0");
  if (!(cfg.frame_length > 0)) throw ValidationError("frame_length must be > 0");
  if (!(cfg.frame_shift > 0)) throw ValidationError("frame_shift must be > 0");
  if (cfg.n_mels < 1) throw ValidationError("n_mels must be >= 1");
  if (!(cfg.log_floor > 0)) throw ValidationError("log_floor must be > 0");
  if (cfg.preemphasis < 0 || cfg.preemphasis > 1) throw ValidationError("preemphasis must be in [0,1]");
  const double fmax = cfg.fmax.value_or(sample_rate / 2);
  if (cfg.fmin < 0 || !(fmax > cfg.fmin))
    throw ValidationError(str_cat("need 0 <= fmin < fmax, got fmin=", cfg.fmin, " fmax=", fmax));
  if (sample_rate < 2 * fmax)
    throw ValidationError(str_cat("fmax=", fmax, " exceeds Nyquist for sample_rate=", sample_rate));
  FramingInfo info;
  info.win_samples = static_cast<std::size_t>(std::lround(cfg.frame_length * sample_rate));
  info.hop_samples = static_cast<std::size_t>(std::lround(cfg.frame_shift * sample_rate));
  if (info.win_samples < 1 || info.hop_samples < 1)
    throw ValidationError("frame_length/frame_shift round to zero samples");
  info.fft_size = std::max<std::size_t>(2, next_pow2(info.win_samples));
  info.fmax = fmax;
  return info;
}

// Triangular filters over FFT bins 0..fft_size/2, triangles defined on the mel
// scale. Returns n_mels rows of (fft_size/2 + 1) weights.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t n_mels, std::size_t fft_size,
                                                       double sample_rate, double fmin,
                                                       double fmax) {
  const std::size_t num_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  const double step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);
  std::vector<std::vector<double>> bank(n_mels, std::vector<double>(num_bins, 0.0));
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = mel_lo + step * static_cast<double>(m);
    const double center = left + step;
    const double right = center + step;
    for (std::size_t k = 0; k < num_bins; ++k) {
      const double mel = hz_to_mel(sample_rate * static_cast<double>(k) / static_cast<double>(fft_size));
      if (mel > left && mel <= center)
        bank[m][k] = (mel - left) / (center - left);
      else if (mel > center && mel < right)
        bank[m][k] = (right - mel) / (right - center);
    }
  }
  return bank;
}

inline double mel_center_hz(std::size_t index, const FbankConfig& cfg, double sample_rate) {
  const double fmax = cfg.fmax.value_or(sample_rate / 2);
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double step = (hz_to_mel(fmax) - mel_lo) / static_cast<double>(cfg.n_mels + 1);
  return mel_to_hz(mel_lo + step * static_cast<double>(index + 1));
}

namespace detail {
// FFTW planning is not thread-safe; execution with new-array execute is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline FeatureSequence fbank(const Waveform& w, const FbankConfig& cfg = {}) {
  const FramingInfo info = validate_fbank(cfg, w.sample_rate);
  const std::size_t n = w.samples.size();
  if (n < info.win_samples)
    throw TooShortError(str_cat("waveform has ", n, " samples, a single frame needs ",
                                info.win_samples));
  const std::size_t num_frames = 1 + (n - info.win_samples) / info.hop_samples;
  const std::size_t win = info.win_samples;
  const std::size_t nfft = info.fft_size;
  const std::size_t num_bins = nfft / 2 + 1;

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i) {
    const double phase = win > 1 ? 2.0 * std::numbers::pi * static_cast<double>(i) /
                                       static_cast<double>(win - 1)
                                 : 0.0;
    window[i] = cfg.window == WindowType::kHamming ? 0.54 - 0.46 * std::cos(phase)
                                                   : 0.5 - 0.5 * std::cos(phase);
  }
  const auto bank = mel_filterbank(cfg.n_mels, nfft, w.sample_rate, cfg.fmin, info.fmax);

  std::vector<double> frame(nfft, 0.0);
  std::vector<std::complex<double>> spectrum(num_bins);
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), frame.data(),
                                reinterpret_cast<fftw_complex*>(spectrum.data()), FFTW_ESTIMATE);
  }

  FeatureSequence out(num_frames, cfg.n_mels);
  out.frame_shift = cfg.frame_shift;
  out.frame_length = cfg.frame_length;
  std::vector<double> power(num_bins);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const float* x = w.samples.data() + t * info.hop_samples;
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = 0; i < win; ++i) {
      const double prev = i > 0 ? x[i - 1] : x[0];
      frame[i] = (static_cast<double>(x[i]) - cfg.preemphasis * prev) * window[i];
    }
    fftw_execute_dft_r2c(plan, frame.data(), reinterpret_cast<fftw_complex*>(spectrum.data()));
    for (std::size_t k = 0; k < num_bins; ++k) power[k] = std::norm(spectrum[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < num_bins; ++k) e += bank[m][k] * power[k];
      out(t, m) = static_cast<float>(std::log(std::max(e, cfg.log_floor)));
    }
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

// Trailing zero-pad when short, centered clip when long.
inline FeatureSequence pad_or_clip(const FeatureSequence& seq, std::size_t target_frames) {
  if (target_frames < 1) throw ValidationError("pad_or_clip: target_frames must be >= 1");
  if (seq.num_frames == target_frames) return seq;
  if (seq.num_frames < target_frames) {
    FeatureSequence out(target_frames, seq.dim);
    out.frame_shift = seq.frame_shift;
    out.frame_length = seq.frame_length;
    std::copy(seq.data.begin(), seq.data.end(), out.data.begin());
    return out;
  }
  const std::size_t start = (seq.num_frames - target_frames) / 2;
  return seq.slice(start, start + target_frames);
}

}  // namespace awe
