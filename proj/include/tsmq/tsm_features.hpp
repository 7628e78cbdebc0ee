#pragma once

#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"
#include "tsmq/spectral.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace tsmq {

/// STFT parameters for the TSM-artefact features. Exposed as configuration;
/// the trained-model file records the values in force.
struct TsmConfig {
    std::size_t frame_size = 2048;
    std::size_t hop = 512;
    // harmonic/percussive separation
    std::size_t hpss_frame_size = 1024;
    std::size_t hpss_hop = 256;
    std::size_t hpss_time_median = 17;
    std::size_t hpss_freq_median = 17;
};

/// The nine TSM-specific features plus SER, D_M and the +10 dB test
/// bandwidth. bandwidth_test_new is absent when the sample rate leaves no
/// spectrum above the 21 kHz noise-floor region.
struct TsmFeatureSet {
    double ser = 0.0;
    double dm = 0.0;
    double mphnw = 0.0, mphmw = 0.0, sphnw = 0.0, sphmw = 0.0;
    double ssmad = 0.0, ssmd = 0.0;
    double peak_delta = 0.0;
    double tr_rat = 1.0;
    double hps_tr_rat = 1.0;
    std::optional<double> bandwidth_test_new;
    bool tr_rat_degenerate = false; // no selected peaks on one side
};

/// Frame-to-frame log-energy rise of the frequency-weighted power spectrum;
/// values[i] covers the step from frame i to frame i+1.
struct OnsetEnvelope {
    std::vector<double> values;
    std::vector<std::size_t> peak_indices;
    std::vector<std::size_t> selected_peaks;
};

struct PhasinessFeatures {
    double mphnw = 0.0;
    double mphmw = 0.0;
    double sphnw = 0.0;
    double sphmw = 0.0;
};

struct SpectralSimilarity {
    double ssmad = 0.0;
    double ssmd = 0.0;
};

/// Signal-to-error ratio in dB between pre-aligned magnitude matrices,
/// capped at 80 (the cap also covers the zero-error case).
double ser(const Matrix& ref_mag, const Matrix& test_mag);

/// Normalized squared magnitude difference (the classic phasiness scalar).
double dm(const Matrix& ref_mag, const Matrix& test_mag);

/// Remaps phases into (0, 2pi], then forces strict growth along frames by
/// adding the smallest sufficient non-negative multiple of 2pi per bin.
Matrix unwrap_phase_monotonic(const Matrix& phase);

/// Weighted unwrapped-phase-progression distance between reference and
/// test. The longer unwrapped matrix is interpolated down to the shorter
/// one and scaled by beta before differencing.
PhasinessFeatures phasiness(const Spectrogram& ref_spec, const Spectrogram& test_spec,
                            TimeScaleRatio beta);

/// Cubic-trend difference of per-frame normalized magnitude spectra over
/// reference-anchored frame pairs. Intercept-free evaluation removes any
/// overall level offset.
SpectralSimilarity spectral_similarity(const AudioSignal& ref, const AudioSignal& test,
                                       TimeScaleRatio beta, const TsmConfig& config = {});

OnsetEnvelope onset_envelope(const AudioSignal& signal, std::size_t frame_size,
                             std::size_t hop);
OnsetEnvelope onset_envelope(const Spectrogram& spec);

/// Marks indices that strictly exceed their four surrounding values.
OnsetEnvelope pick_peaks(OnsetEnvelope env);

/// Peaks whose level exceeds the envelope mean by more than one standard
/// deviation (the one-sigma rule used by the transient ratio).
OnsetEnvelope select_strong_peaks(OnsetEnvelope env);

/// Difference in detected peaks per second of reference material.
double peak_delta(const OnsetEnvelope& ref_env, const OnsetEnvelope& test_env,
                  int sample_rate, std::size_t ref_len);

/// Ratio of mean onset level at each signal's own strong peaks. Falls back
/// to 1 and sets *degenerate when a side has no strong peaks.
double transient_ratio(const OnsetEnvelope& ref_env, const OnsetEnvelope& test_env,
                       bool* degenerate = nullptr);

struct HpssResult {
    AudioSignal harmonic;
    AudioSignal percussive;
};

/// Median-filter harmonic/percussive split with binary masking and
/// overlap-add resynthesis. Masks are complementary by construction.
HpssResult hpss_separate(const AudioSignal& signal, const TsmConfig& config = {});

AudioSignal hps_percussive(const AudioSignal& signal, const TsmConfig& config = {});

/// RMS ratio of the separated percussive components, reference over test.
double hps_transient_ratio(const AudioSignal& ref, const AudioSignal& test,
                           const TsmConfig& config = {});

/// Mean bandwidth in Hz over frames whose bandwidth exceeds 8 kHz, using a
/// +10 dB threshold over the above-21 kHz noise floor. nullopt when the
/// sample rate has no such region; 0 when no frame qualifies.
std::optional<double> bandwidth_test_new(const Spectrogram& test_spec);

/// All TSM features for a prepared, truncated pair. ser/dm consume the
/// supplied pre-aligned magnitudes; the rest run on the raw spectrograms
/// and signals.
TsmFeatureSet compute_tsm_features(const AudioSignal& ref, const AudioSignal& test,
                                   const Spectrogram& ref_spec, const Spectrogram& test_spec,
                                   const Matrix& aligned_ref_mag, const Matrix& aligned_test_mag,
                                   TimeScaleRatio beta, const TsmConfig& config = {});

} // namespace tsmq
