// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "frcrn/common.h"

namespace frcrn {

// Mono sample sequence, nominal amplitude range [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void check_finite() const;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads RIFF/WAVE, PCM 16-bit or IEEE float 32-bit. Multi-channel files are
// reduced to the first channel; when that happens and `warning` is non-null
// a note is stored there.
AudioBuffer read_wav(const std::string& path, std::string* warning = nullptr);

// Float32 write inverts read bit-faithfully.
void write_wav(const std::string& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace frcrn
