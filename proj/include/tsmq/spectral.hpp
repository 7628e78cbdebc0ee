#pragma once

#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tsmq {

/// Complex STFT with frame/hop metadata. Row u is frame u, column k is
/// frequency bin k (one-sided, 0..N/2).
struct Spectrogram {
    std::vector<std::complex<double>> bins; // row-major [frame][bin]
    std::size_t frames = 0;
    std::size_t bin_count = 0;
    std::size_t frame_size = 0;
    std::size_t hop = 0;
    int sample_rate = 0;

    std::complex<double>& at(std::size_t u, std::size_t k) { return bins[u * bin_count + k]; }
    std::complex<double> at(std::size_t u, std::size_t k) const { return bins[u * bin_count + k]; }

    Matrix magnitude() const;
    Matrix phase() const;
    Matrix power() const;

    double bin_frequency(std::size_t k) const
    {
        return static_cast<double>(k) * sample_rate / static_cast<double>(frame_size);
    }
};

/// How the reference/test pair is brought to a common frame count before
/// spectrum comparison or the ear model.
enum class AlignmentMode {
    anchor_ref,        // time-instance framing, frame grid anchored to the reference
    anchor_test,       // time-instance framing, frame grid anchored to the test
    interp_to_longest, // interpolate the shorter magnitude spectrogram up
    interp_to_shortest,
    interp_to_ref,
    interp_to_test,    // default; best performer
};

AlignmentMode alignment_from_string(const std::string& name);
std::string alignment_to_string(AlignmentMode mode);
bool is_anchor_mode(AlignmentMode mode);

/// Playback-speed ratio beta. beta < 1 means the test signal was slowed
/// down (is longer than the reference).
struct TimeScaleRatio {
    double beta = 1.0;
};

std::vector<double> hann_window(std::size_t n);

/// Hann-windowed one-sided STFT. Frames start every `hop` samples; the
/// last partial frame is zero-padded. Requires frame_size to be a power of
/// two and the signal to span at least one frame.
Spectrogram stft(const AudioSignal& signal, std::size_t frame_size, std::size_t hop);

/// Known ratio wins; otherwise the ratio of truncated lengths.
TimeScaleRatio estimate_beta(const AudioSignal& ref, const AudioSignal& test,
                             std::optional<double> known = std::nullopt);

/// Frame start indices for time-instance framing: the anchored signal is
/// framed uniformly and the other signal's frame u starts at the
/// beta-scaled instant. Only frames fully inside both signals survive.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
time_instance_starts(std::size_t ref_len, std::size_t test_len, bool anchor_is_test,
                     TimeScaleRatio beta, std::size_t frame_size, std::size_t hop);

/// Spectrogram pair framed at identical time-instances (anchor = ref|test).
std::pair<Spectrogram, Spectrogram>
time_instance_frames(const AudioSignal& ref, const AudioSignal& test, bool anchor_is_test,
                     TimeScaleRatio beta, std::size_t frame_size, std::size_t hop);

/// Per-column (bin) linear interpolation of a magnitude matrix onto
/// target_rows positions uniformly spanning [0, rows-1]. Identity when
/// target_rows == rows.
Matrix interpolate_rows(const Matrix& mag, std::size_t target_rows);

/// Magnitude view of `spec` interpolated along the frame axis.
Matrix interpolate_spectrogram(const Spectrogram& spec, std::size_t target_frames);

/// Equal-frame-count magnitude pair under the selected mode. Interp modes
/// interpolate exactly one side (or neither when counts already match).
/// Anchor modes expect spectrograms produced by time_instance_frames and
/// trim to the common count.
std::pair<Matrix, Matrix> align(const Spectrogram& ref_spec, const Spectrogram& test_spec,
                                AlignmentMode mode, TimeScaleRatio beta);

/// Interp-mode alignment on plain magnitude matrices (shared with the ear
/// model path, which uses its own analysis window).
std::pair<Matrix, Matrix> align_magnitudes(const Matrix& ref_mag, const Matrix& test_mag,
                                           AlignmentMode mode);

} // namespace tsmq
