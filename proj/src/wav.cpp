// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "frcrn/wav.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace frcrn {

static_assert(std::endian::native == std::endian::little,
              "wav i/o assumes a little-endian host");

void AudioBuffer::check_finite() const {
  for (double s : samples)
    if (!std::isfinite(s)) throw DataError("audio contains non-finite samples");
}

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint32_t fourcc(const char* s) {
  uint32_t v;
  std::memcpy(&v, s, 4);
  return v;
}

template <typename T>
T read_le(std::ifstream& f, const std::string& path) {
  T v;
  if (!f.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw DataError("truncated wav file: " + path);
  return v;
}

template <typename T>
void write_le(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioBuffer read_wav(const std::string& path, std::string* warning) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open wav file: " + path);

  if (read_le<uint32_t>(f, path) != fourcc("RIFF"))
    throw DataError("not a RIFF file: " + path);
  read_le<uint32_t>(f, path);  // riff size, unreliable in the wild
  if (read_le<uint32_t>(f, path) != fourcc("WAVE"))
    throw DataError("not a WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::vector<char> payload;

  while (true) {
    uint32_t id, len;
    if (!f.read(reinterpret_cast<char*>(&id), 4)) break;
    if (!f.read(reinterpret_cast<char*>(&len), 4))
      throw DataError("truncated chunk header: " + path);
    if (id == fourcc("fmt ")) {
      if (len < 16) throw DataError("malformed fmt chunk: " + path);
      format = read_le<uint16_t>(f, path);
      channels = read_le<uint16_t>(f, path);
      sample_rate = read_le<uint32_t>(f, path);
      read_le<uint32_t>(f, path);  // byte rate
      read_le<uint16_t>(f, path);  // block align
      bits = read_le<uint16_t>(f, path);
      uint32_t consumed = 16;
      if (format == kFormatExtensible && len >= 16 + 2 + 22) {
        uint16_t ext = read_le<uint16_t>(f, path);
        consumed += 2;
        if (ext >= 22) {
          read_le<uint16_t>(f, path);  // valid bits
          read_le<uint32_t>(f, path);  // channel mask
          format = read_le<uint16_t>(f, path);  // subformat GUID leads with it
          f.seekg(14, std::ios::cur);
          consumed += 22;
        }
      }
      if (len > consumed) f.seekg(len - consumed, std::ios::cur);
      have_fmt = true;
    } else if (id == fourcc("data")) {
      payload.resize(len);
      if (!f.read(payload.data(), len))
        throw DataError("truncated data chunk: " + path);
    } else {
      f.seekg(len + (len & 1), std::ios::cur);
    }
    if (len & 1 && id == fourcc("data")) f.seekg(1, std::ios::cur);
  }

  if (!have_fmt) throw DataError("missing fmt chunk: " + path);
  if (payload.empty()) throw DataError("missing data chunk: " + path);
  if (channels == 0) throw DataError("zero channels: " + path);

  size_t bytes_per_sample;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw DataError("unsupported wav encoding (format " +
                    std::to_string(format) + ", " + std::to_string(bits) +
                    " bits): " + path);
  }

  size_t frame_bytes = bytes_per_sample * channels;
  size_t frames = payload.size() / frame_bytes;
  if (channels > 1 && warning != nullptr)
    *warning = "wav has " + std::to_string(channels) +
               " channels; using the first channel only";

  AudioBuffer out;
  out.sample_rate = static_cast<int>(sample_rate);
  out.samples.resize(frames);
  const char* p = payload.data();
  if (bytes_per_sample == 2) {
    for (size_t i = 0; i < frames; ++i) {
      int16_t v;
      std::memcpy(&v, p + i * frame_bytes, 2);
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else {
    for (size_t i = 0; i < frames; ++i) {
      float v;
      std::memcpy(&v, p + i * frame_bytes, 4);
      out.samples[i] = static_cast<double>(v);
    }
  }
  out.check_finite();
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  audio.check_finite();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot create wav file: " + path);

  const uint16_t channels = 1;
  const bool is_float = encoding == WavEncoding::kFloat32;
  const uint16_t bits = is_float ? 32 : 16;
  const uint32_t data_len =
      static_cast<uint32_t>(audio.samples.size() * (bits / 8));
  const uint32_t fact_len = is_float ? 12 : 0;
  const uint32_t riff_len = 4 + 24 + fact_len + 8 + data_len;

  write_le(f, fourcc("RIFF"));
  write_le(f, riff_len);
  write_le(f, fourcc("WAVE"));

  write_le(f, fourcc("fmt "));
  write_le<uint32_t>(f, 16);
  write_le<uint16_t>(f, is_float ? kFormatFloat : kFormatPcm);
  write_le(f, channels);
  write_le<uint32_t>(f, static_cast<uint32_t>(audio.sample_rate));
  write_le<uint32_t>(f,
                     static_cast<uint32_t>(audio.sample_rate * (bits / 8)));
  write_le<uint16_t>(f, bits / 8);
  write_le(f, bits);

  if (is_float) {
    write_le(f, fourcc("fact"));
    write_le<uint32_t>(f, 4);
    write_le<uint32_t>(f, static_cast<uint32_t>(audio.samples.size()));
  }

  write_le(f, fourcc("data"));
  write_le(f, data_len);
  if (is_float) {
    for (double s : audio.samples) {
      float v = static_cast<float>(s);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  } else {
    for (double s : audio.samples) {
      double scaled = std::round(s * 32767.0);
      int16_t v = static_cast<int16_t>(
          std::min(32767.0, std::max(-32768.0, scaled)));
      write_le(f, v);
    }
  }
  if (!f) throw DataError("wav write failed: " + path);
}

}  // namespace frcrn
