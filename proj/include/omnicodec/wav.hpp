#pragma once

#include "omnicodec/types.hpp"

#include <string>

namespace omnicodec {

// PCM WAV subset: 16-bit int or 32-bit float, mono or stereo (averaged to
// mono on read). write emits 16-bit PCM, round half away from zero, clipped.
pcm_buffer wav_read(const std::string & path);
void wav_write(const std::string & path, const pcm_buffer & pcm);

} // namespace omnicodec
