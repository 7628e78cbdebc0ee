#include "tsmq/peaq.hpp"
#include "tsmq/fft.hpp"

#include <algorithm>
#include <cmath>

namespace tsmq {

namespace {

constexpr double kBandResolutionBark = 0.25;
constexpr double kBandLowHz = 80.0;
constexpr double kBandHighHz = 18000.0;
constexpr double kEnergyFloor = 1e-12;
constexpr double kSpreadExponent = 0.4;
constexpr double kCalibrationToneHz = 1019.5;

double hz_to_bark(double f) { return 7.0 * std::asinh(f / 650.0); }
double bark_to_hz(double z) { return 650.0 * std::sinh(z / 7.0); }

// Outer and middle ear transfer in dB at frequency f.
double ear_weight_db(double f_hz)
{
    const double f = f_hz / 1000.0;
    return -0.6 * 3.64 * std::pow(f, -0.8) +
           6.5 * std::exp(-0.6 * (f - 3.3) * (f - 3.3)) - 1e-3 * std::pow(f, 3.6);
}

// Peak factor of the Hann spectral response for a tone between DFT bins;
// used to calibrate the full-scale sine to the playback level.
double hann_peak_factor(double freq_hz, int sample_rate, std::size_t n)
{
    const double fc_bins = freq_hz / sample_rate * static_cast<double>(n);
    const double k = std::floor(fc_bins);
    const double dist_bins = std::min(fc_bins - k, k + 1.0 - fc_bins);
    const double w = static_cast<double>(n - 1);
    const double x = dist_bins * w / static_cast<double>(n);
    if (x == 0.0)
        return 1.0;
    return std::sin(M_PI * x) / (M_PI * x * (1.0 - x * x));
}

double smear_coefficient(double fc, double tau_min, double tau_100, double frame_rate)
{
    const double tau = tau_min + (100.0 / fc) * (tau_100 - tau_min);
    return std::exp(-1.0 / (frame_rate * tau));
}

} // namespace

FftEarModel::FftEarModel(const EarModelConfig& config) : config_(config)
{
    const std::size_t n = config_.frame_size;
    const int fs = config_.sample_rate;
    if (fs <= 0 || n == 0 || config_.hop == 0)
        throw DataError("invalid ear model configuration");

    // Window carries the full calibration: a full-scale sine at the
    // calibration frequency lands on playback_level_db of spectral peak
    // power (amax = 1).
    const double gp = hann_peak_factor(kCalibrationToneHz, fs, n);
    const double gl = std::pow(10.0, config_.playback_level_db / 20.0) /
                      (gp * 0.25 * static_cast<double>(n - 1) * std::sqrt(8.0 / 3.0));
    window_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        window_[i] = gl * 0.5 * std::sqrt(8.0 / 3.0) *
                     (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(n - 1)));

    const std::size_t bin_count = n / 2 + 1;
    ear_weight_.resize(bin_count);
    ear_weight_[0] = 0.0; // DC carries no auditory weight
    for (std::size_t k = 1; k < bin_count; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        ear_weight_[k] = std::pow(10.0, ear_weight_db(f) / 10.0);
    }

    // Quarter-Bark critical bands.
    const double z_low = hz_to_bark(kBandLowHz);
    const double z_high = hz_to_bark(kBandHighHz);
    const std::size_t band_count =
        static_cast<std::size_t>(std::ceil((z_high - z_low) / kBandResolutionBark));
    for (std::size_t i = 0; i < band_count; ++i) {
        const double zl = z_low + static_cast<double>(i) * kBandResolutionBark;
        const double zu = std::min(zl + kBandResolutionBark, z_high);
        bands_.lower_hz.push_back(bark_to_hz(zl));
        bands_.upper_hz.push_back(bark_to_hz(zu));
        bands_.center_hz.push_back(bark_to_hz(0.5 * (zl + zu)));
        bands_.center_bark.push_back(0.5 * (zl + zu));
    }

    internal_noise_.resize(band_count);
    upper_slope_const_.resize(band_count);
    time_spread_coeff_.resize(band_count);
    adapt_coeff_.resize(band_count);
    loud_threshold_index_.resize(band_count);
    loud_excitation_at_threshold_.resize(band_count);
    const double frame_rate = frames_per_second();
    for (std::size_t i = 0; i < band_count; ++i) {
        const double fc = bands_.center_hz[i];
        internal_noise_[i] = std::pow(10.0, 0.4 * 0.364 * std::pow(fc / 1000.0, -0.8));
        upper_slope_const_[i] =
            std::pow(10.0, (-2.4 - 23.0 / fc) * kBandResolutionBark);
        time_spread_coeff_[i] = smear_coefficient(fc, 0.008, 0.030, frame_rate);
        adapt_coeff_[i] = smear_coefficient(fc, 0.008, 0.050, frame_rate);
        loud_threshold_index_[i] =
            std::pow(10.0, 0.1 * (-2.0 - 2.05 * std::atan(fc / 4000.0) -
                                  0.75 * std::atan((fc / 1600.0) * (fc / 1600.0))));
        loud_excitation_at_threshold_[i] =
            std::pow(10.0, 0.1 * 3.64 * std::pow(fc / 1000.0, -0.8));
    }
    lower_slope_gain_ = std::pow(10.0, -2.7 * kBandResolutionBark);

    // Normalization: spreading an all-ones pattern must return ones.
    spread_norm_.assign(band_count, 1.0);
    spread_norm_ = spread_unnormalized(std::vector<double>(band_count, 1.0));
}

double FftEarModel::frames_per_second() const
{
    return static_cast<double>(config_.sample_rate) / static_cast<double>(config_.hop);
}

Matrix FftEarModel::magnitude_frames(const AudioSignal& signal) const
{
    if (signal.samples.size() < config_.frame_size)
        throw DataError("signal shorter than one ear-model frame");
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s < signal.samples.size(); s += config_.hop)
        starts.push_back(s);
    return magnitude_frames_at(signal, starts);
}

Matrix FftEarModel::magnitude_frames_at(const AudioSignal& signal,
                                        const std::vector<std::size_t>& starts) const
{
    const std::size_t n = config_.frame_size;
    Matrix out(starts.size(), n / 2 + 1);
    std::vector<double> frame(n);
    for (std::size_t u = 0; u < starts.size(); ++u) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = starts[u] + i;
            frame[i] = idx < signal.samples.size() ? signal.samples[idx] * window_[i] : 0.0;
        }
        const auto bins = rfft(frame);
        double* dst = out.row(u);
        for (std::size_t k = 0; k < bins.size(); ++k)
            dst[k] = std::abs(bins[k]);
    }
    return out;
}

std::vector<double> FftEarModel::weight_power(const double* power_row) const
{
    std::vector<double> out(ear_weight_.size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = power_row[k] * ear_weight_[k];
    return out;
}

std::vector<double> FftEarModel::group_into_bands(const std::vector<double>& weighted_power,
                                                  bool apply_floor) const
{
    const double bin_hz = static_cast<double>(config_.sample_rate) /
                          static_cast<double>(config_.frame_size);
    std::vector<double> bands(bands_.count(), 0.0);
    for (std::size_t i = 0; i < bands_.count(); ++i) {
        const double fl = bands_.lower_hz[i];
        const double fu = bands_.upper_hz[i];
        const std::size_t k_lo =
            static_cast<std::size_t>(std::max(0.0, std::floor(fl / bin_hz - 0.5)));
        const std::size_t k_hi = std::min(
            weighted_power.size() - 1,
            static_cast<std::size_t>(std::max(0.0, std::ceil(fu / bin_hz + 0.5))));
        double acc = 0.0;
        for (std::size_t k = k_lo; k <= k_hi; ++k) {
            // fraction of the bin's width that falls inside the band
            const double bin_lo = (static_cast<double>(k) - 0.5) * bin_hz;
            const double bin_hi = (static_cast<double>(k) + 0.5) * bin_hz;
            const double overlap = std::min(fu, bin_hi) - std::max(fl, bin_lo);
            if (overlap > 0.0)
                acc += weighted_power[k] * (overlap / bin_hz);
        }
        bands[i] = apply_floor ? std::max(acc, kEnergyFloor) : acc;
    }
    return bands;
}

std::vector<double> FftEarModel::spread_unnormalized(const std::vector<double>& energies) const
{
    const std::size_t nc = energies.size();
    std::vector<double> own_energy_e(nc), upper_gain_e(nc), acc(nc);
    const double lower_gain_e = std::pow(lower_slope_gain_, kSpreadExponent);

    for (std::size_t m = 0; m < nc; ++m) {
        const double energy = energies[m];
        // level-dependent upper slope, energy domain
        const double upper_gain =
            upper_slope_const_[m] *
            std::pow(10.0, 0.2 * kBandResolutionBark * std::log10(std::max(energy, kEnergyFloor)));
        const double gil =
            (1.0 - std::pow(lower_slope_gain_, static_cast<double>(m + 1))) /
            (1.0 - lower_slope_gain_);
        const double giu = upper_gain == 1.0
                               ? static_cast<double>(nc - m)
                               : (1.0 - std::pow(upper_gain, static_cast<double>(nc - m))) /
                                     (1.0 - upper_gain);
        const double normalized = energy / (gil + giu - 1.0);
        own_energy_e[m] = std::pow(normalized, kSpreadExponent);
        upper_gain_e[m] = std::pow(upper_gain, kSpreadExponent);
    }

    // contributions from maskers above (steep lower slope)
    acc[nc - 1] = own_energy_e[nc - 1];
    for (std::size_t m = nc - 1; m-- > 0;)
        acc[m] = lower_gain_e * acc[m + 1] + own_energy_e[m];
    // contributions from maskers below (level-dependent upper slope)
    for (std::size_t m = 0; m + 1 < nc; ++m) {
        double r = own_energy_e[m];
        for (std::size_t i = m + 1; i < nc; ++i) {
            r *= upper_gain_e[m];
            acc[i] += r;
        }
    }

    std::vector<double> out(nc);
    for (std::size_t i = 0; i < nc; ++i)
        out[i] = std::pow(acc[i], 1.0 / kSpreadExponent);
    return out;
}

std::vector<double> FftEarModel::spread(const std::vector<double>& pitch_patterns) const
{
    std::vector<double> out = spread_unnormalized(pitch_patterns);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] /= spread_norm_[i];
    return out;
}

double FftEarModel::total_loudness(const double* excitation_row) const
{
    constexpr double kLoudnessScale = 1.07664;
    constexpr double kReferenceExcitation = 1e4;
    constexpr double kExponent = 0.23;
    const std::size_t nc = bands_.count();
    double total = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
        const double s = loud_threshold_index_[i];
        const double et = loud_excitation_at_threshold_[i];
        const double specific =
            kLoudnessScale * std::pow(et / (s * kReferenceExcitation), kExponent) *
            (std::pow(1.0 - s + s * excitation_row[i] / et, kExponent) - 1.0);
        total += std::max(specific, 0.0);
    }
    return total * 24.0 / static_cast<double>(nc);
}

EarPatterns FftEarModel::process(const Matrix& magnitudes) const
{
    const std::size_t frames = magnitudes.rows;
    const std::size_t nc = bands_.count();
    if (frames == 0)
        throw DataError("ear model: no frames");
    if (magnitudes.cols != config_.frame_size / 2 + 1)
        throw DataError("ear model: bin count mismatch");

    EarPatterns pat;
    pat.excitation = Matrix(frames, nc);
    pat.unsmeared_excitation = Matrix(frames, nc);
    pat.modulation = Matrix(frames, nc);
    pat.average_loudness = Matrix(frames, nc);
    pat.total_loudness.resize(frames);

    const double frame_rate = frames_per_second();
    std::vector<double> power(magnitudes.cols);
    std::vector<double> smeared(nc, 0.0);
    std::vector<double> prev_unsmeared(nc, 0.0);
    std::vector<double> deriv_avg(nc, 0.0);
    std::vector<double> loud_avg(nc, 0.0);

    for (std::size_t t = 0; t < frames; ++t) {
        const double* mag = magnitudes.row(t);
        for (std::size_t k = 0; k < power.size(); ++k)
            power[k] = mag[k] * mag[k];

        const std::vector<double> weighted = weight_power(power.data());
        std::vector<double> pitch = group_into_bands(weighted);
        for (std::size_t i = 0; i < nc; ++i)
            pitch[i] += internal_noise_[i];
        const std::vector<double> unsmeared = spread(pitch);

        for (std::size_t i = 0; i < nc; ++i) {
            const double a = time_spread_coeff_[i];
            smeared[i] = a * smeared[i] + (1.0 - a) * unsmeared[i];
            const double excitation = std::max(smeared[i], unsmeared[i]);
            pat.excitation.at(t, i) = excitation;
            pat.unsmeared_excitation.at(t, i) = unsmeared[i];

            // modulation: smoothed derivative of compressed loudness
            const double am = adapt_coeff_[i];
            const double compressed = std::pow(unsmeared[i], 0.3);
            const double prev_compressed = std::pow(prev_unsmeared[i], 0.3);
            deriv_avg[i] = am * deriv_avg[i] +
                           (1.0 - am) * frame_rate * std::fabs(compressed - prev_compressed);
            loud_avg[i] = am * loud_avg[i] + (1.0 - am) * compressed;
            pat.modulation.at(t, i) = deriv_avg[i] / (1.0 + loud_avg[i] / 0.3);
            pat.average_loudness.at(t, i) = loud_avg[i];
        }
        prev_unsmeared = unsmeared;
        pat.total_loudness[t] = total_loudness(pat.excitation.row(t));
    }
    return pat;
}

EarPatterns compute_ear_patterns(const FftEarModel& model, const AudioSignal& signal)
{
    if (signal.sample_rate != model.config().sample_rate)
        throw DataError("ear model configured for a different sample rate");
    return model.process(model.magnitude_frames(signal));
}

} // namespace tsmq
