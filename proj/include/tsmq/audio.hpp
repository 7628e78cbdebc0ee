#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tsmq {

/// Mono audio held as doubles on a nominal [-1, 1] full scale.
struct AudioSignal {
    std::vector<double> samples;
    int sample_rate = 0;

    std::size_t size() const { return samples.size(); }
    double duration_seconds() const
    {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

/// Reads a PCM RIFF/WAVE file (8/16/24/32-bit integer or 32-bit float) and
/// sums all channels into one, each channel mapped to [-1, 1] full scale
/// before summation.
AudioSignal load_audio(const std::string& path);

/// Removes DC (arithmetic mean), then normalizes to unit peak.
/// Throws DataError("silent signal") when nothing is left after DC removal.
AudioSignal prepare(const AudioSignal& signal);

/// Cuts each prepared signal to its active region: the span from the first
/// to the last window of four consecutive samples whose absolute sum
/// exceeds 0.0061. The two signals are truncated independently.
std::pair<AudioSignal, AudioSignal> truncate_active(const AudioSignal& ref,
                                                    const AudioSignal& test);

/// Active-region bounds [first, last] (inclusive) for one signal; used by
/// truncate_active and exposed for diagnostics.
std::pair<std::size_t, std::size_t> active_bounds(const AudioSignal& signal);

double rms(const std::vector<double>& samples);

} // namespace tsmq
