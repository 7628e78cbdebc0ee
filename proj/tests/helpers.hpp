#pragma once

#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tsmq::testing {

// mt19937-backed uniform/normal helpers so expected values are stable
// across standard libraries.
class TestRng {
public:
    explicit TestRng(std::uint64_t seed) : gen_(seed) {}
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    double normal()
    {
        // Box-Muller
        const double u1 = std::max(unit(), 1e-300);
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

/// 16-bit PCM writer; interleaved channels, values clipped to full scale.
void write_wav16(const std::string& path, const std::vector<std::vector<double>>& channels,
                 int sample_rate);
/// 32-bit float writer.
void write_wav_float(const std::string& path, const std::vector<double>& samples,
                     int sample_rate);

AudioSignal make_tone(double freq_hz, double seconds, int sample_rate, double amplitude = 1.0);
AudioSignal make_noise(double seconds, int sample_rate, std::uint64_t seed,
                       double amplitude = 1.0);
/// Regular click train over a noise floor, `clicks_per_second` impulses.
/// A zero floor keeps the onset envelope free of spurious peaks.
AudioSignal make_click_train(double seconds, int sample_rate, double clicks_per_second,
                             std::uint64_t seed, double floor_amplitude = 0.005);

/// Plain synchronized overlap-add time stretcher (test fixture only):
/// output duration is roughly input / beta.
AudioSignal naive_time_stretch(const AudioSignal& input, double beta);

/// Quadratic-time reference DFT (one-sided) for STFT oracles.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame);

} // namespace tsmq::testing
