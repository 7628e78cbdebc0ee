#pragma once

#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"
#include "tsmq/spectral.hpp"

#include <cstddef>
#include <vector>

namespace tsmq {

/// FFT ear-model configuration. Constants tabulated at 48 kHz in the
/// reference literature are recomputed from their frequency-domain
/// formulas at the configured rate, with full scale at +-1.
struct EarModelConfig {
    int sample_rate = 44100;
    std::size_t frame_size = 2048;
    std::size_t hop = 1024;
    double playback_level_db = 92.0; // SPL assigned to a full-scale sine
};

/// Critical-band layout: quarter-Bark bands spanning 80 Hz .. 18 kHz.
struct CriticalBands {
    std::vector<double> lower_hz;
    std::vector<double> center_hz;
    std::vector<double> upper_hz;
    std::vector<double> center_bark;
    std::size_t count() const { return center_hz.size(); }
};

/// Per-frame band patterns driven by one signal's calibrated spectra.
struct EarPatterns {
    Matrix excitation;           // frames x bands, after time-domain spreading
    Matrix unsmeared_excitation; // frames x bands, before time-domain spreading
    Matrix modulation;           // frames x bands
    Matrix average_loudness;     // frames x bands, smoothed E^0.3
    std::vector<double> total_loudness; // per frame, sones
};

class FftEarModel {
public:
    explicit FftEarModel(const EarModelConfig& config = {});

    const EarModelConfig& config() const { return config_; }
    const CriticalBands& bands() const { return bands_; }
    const std::vector<double>& internal_noise() const { return internal_noise_; }
    double frames_per_second() const;

    /// Calibrated magnitude spectra on the model's uniform frame grid.
    Matrix magnitude_frames(const AudioSignal& signal) const;
    /// Same, at explicit frame starts (time-instance alignment).
    Matrix magnitude_frames_at(const AudioSignal& signal,
                               const std::vector<std::size_t>& starts) const;

    /// Runs grouped excitation, spreading, time smearing, modulation and
    /// loudness over a sequence of calibrated magnitude frames.
    EarPatterns process(const Matrix& magnitudes) const;

    /// Outer/middle-ear power weighting for one spectrum row.
    std::vector<double> weight_power(const double* power_row) const;
    /// Quarter-Bark grouping of a weighted power spectrum.
    std::vector<double> group_into_bands(const std::vector<double>& weighted_power,
                                         bool apply_floor = true) const;
    /// Total loudness of one excitation row (data-boundary detector).
    double total_loudness(const double* excitation_row) const;

private:
    std::vector<double> spread(const std::vector<double>& pitch_patterns) const;
    std::vector<double> spread_unnormalized(const std::vector<double>& energies) const;

    EarModelConfig config_;
    std::vector<double> window_;        // Hann including calibration gain
    std::vector<double> ear_weight_;    // power-domain outer/middle ear weight
    CriticalBands bands_;
    std::vector<double> internal_noise_;
    std::vector<double> spread_norm_;   // per-band normalization of spreading
    std::vector<double> upper_slope_const_;
    double lower_slope_gain_ = 0.0;
    std::vector<double> time_spread_coeff_;
    std::vector<double> adapt_coeff_;   // also used for modulation smoothing
    std::vector<double> loud_threshold_index_;
    std::vector<double> loud_excitation_at_threshold_;

    friend struct EarModelTestAccess;
    friend std::pair<Matrix, Matrix> adapt_patterns(const FftEarModel&, const Matrix&,
                                                    const Matrix&);
};

/// The eleven basic model output variables.
struct MovSet {
    double win_mod_diff1 = 0.0;
    double avg_mod_diff1 = 0.0;
    double avg_mod_diff2 = 0.0;
    double rms_noise_loud = 0.0;
    double bandwidth_ref = 0.0;  // Hz
    double bandwidth_test = 0.0; // Hz
    double total_nmr = 0.0;      // dB
    double rel_dist_frames = 0.0;
    double mfpd = 0.0;
    double adb = 0.0;
    double ehs = 0.0;
};

/// Convenience wrapper: pattern set for one signal on its own frame grid.
EarPatterns compute_ear_patterns(const FftEarModel& model, const AudioSignal& signal);

/// Level- and pattern-adapted excitation pair (reference, test); removes
/// static gain and linear spectral differences before noise loudness.
std::pair<Matrix, Matrix> adapt_patterns(const FftEarModel& model, const Matrix& ref_excitation,
                                         const Matrix& test_excitation);

/// All eleven MOVs from pattern pairs plus the aligned calibrated
/// magnitude pair the patterns were computed from.
MovSet compute_movs(const FftEarModel& model, const EarPatterns& ref_patterns,
                    const EarPatterns& test_patterns, const Matrix& ref_magnitudes,
                    const Matrix& test_magnitudes);

} // namespace tsmq
