#include "tsmq/tsm_features.hpp"
#include "tsmq/fft.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsmq {

namespace {

constexpr double kSerCap = 80.0;
constexpr double kLogFloor = 1e-12;
constexpr double kTwoPi = 2.0 * M_PI;

double mean_of(const std::vector<double>& v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (N-1), matching the usual numeric-environment
// default for std().
double stddev_of(const std::vector<double>& v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v)
        acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

} // namespace

double ser(const Matrix& ref_mag, const Matrix& test_mag)
{
    if (!ref_mag.same_shape(test_mag))
        throw DataError("ser: magnitude matrices must be pre-aligned");

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref_mag.data.size(); ++i) {
        const double t = test_mag.data[i];
        const double d = ref_mag.data[i] - t;
        num += t * t;
        den += d * d;
    }
    if (den == 0.0)
        return kSerCap;
    const double value = 10.0 * std::log10(std::max(num / den, 1e-30));
    return std::min(value, kSerCap);
}

double dm(const Matrix& ref_mag, const Matrix& test_mag)
{
    if (!ref_mag.same_shape(test_mag))
        throw DataError("dm: magnitude matrices must be pre-aligned");

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ref_mag.data.size(); ++i) {
        const double d = test_mag.data[i] - ref_mag.data[i];
        num += d * d;
        den += ref_mag.data[i] * ref_mag.data[i];
    }
    if (den == 0.0)
        throw DataError("silent reference spectrum");
    return num / den;
}

Matrix unwrap_phase_monotonic(const Matrix& phase)
{
    Matrix out(phase.rows, phase.cols);
    for (std::size_t k = 0; k < phase.cols; ++k) {
        double prev = 0.0;
        for (std::size_t u = 0; u < phase.rows; ++u) {
            double v = phase.at(u, k);
            if (v <= 0.0)
                v += kTwoPi; // remap into (0, 2pi]
            if (u > 0) {
                // smallest non-negative multiple of 2pi making v strictly
                // greater than the previous frame
                double p = std::floor((prev - v) / kTwoPi) + 1.0;
                if (p < 0.0)
                    p = 0.0;
                v += p * kTwoPi;
                if (v <= prev) // guard against floor rounding at exact multiples
                    v += kTwoPi;
            }
            out.at(u, k) = v;
            prev = v;
        }
    }
    return out;
}

PhasinessFeatures phasiness(const Spectrogram& ref_spec, const Spectrogram& test_spec,
                            TimeScaleRatio beta)
{
    if (ref_spec.frames < 2 || test_spec.frames < 2)
        throw DataError("phasiness needs at least two frames per signal");
    if (ref_spec.bin_count != test_spec.bin_count)
        throw DataError("phasiness: bin count mismatch");

    const Matrix ref_unwrapped = unwrap_phase_monotonic(ref_spec.phase());
    const Matrix test_unwrapped = unwrap_phase_monotonic(test_spec.phase());

    const bool test_is_longer = test_spec.frames >= ref_spec.frames;
    const std::size_t n_frames = std::min(ref_spec.frames, test_spec.frames);
    const std::size_t n_bins = ref_spec.bin_count;

    // The longer matrix comes down to the shorter's frame count and carries
    // the beta scaling; the retained signal supplies the magnitude weights.
    Matrix diff(n_frames, n_bins);
    Matrix weight;
    if (test_is_longer) {
        const Matrix interp = interpolate_rows(test_unwrapped, n_frames);
        for (std::size_t i = 0; i < diff.data.size(); ++i)
            diff.data[i] = ref_unwrapped.data[i] - beta.beta * interp.data[i];
        weight = ref_spec.magnitude();
    } else {
        const Matrix interp = interpolate_rows(ref_unwrapped, n_frames);
        for (std::size_t i = 0; i < diff.data.size(); ++i)
            diff.data[i] = beta.beta * interp.data[i] - test_unwrapped.data[i];
        weight = test_spec.magnitude();
    }
    const double max_mag = *std::max_element(weight.data.begin(), weight.data.end());
    const double mag_norm = max_mag > 0.0 ? 1.0 / max_mag : 0.0;

    std::vector<double> frame_means_nw(n_frames), frame_means_mw(n_frames);
    double total_nw = 0.0, total_mw = 0.0;
    for (std::size_t u = 0; u < n_frames; ++u) {
        double acc_nw = 0.0, acc_mw = 0.0;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double a = std::fabs(diff.at(u, k));
            acc_nw += a;
            acc_mw += a * weight.at(u, k) * mag_norm;
        }
        frame_means_nw[u] = acc_nw / static_cast<double>(n_bins);
        frame_means_mw[u] = acc_mw / static_cast<double>(n_bins);
        total_nw += acc_nw;
        total_mw += acc_mw;
    }

    PhasinessFeatures out;
    const double n_total = static_cast<double>(n_frames * n_bins);
    out.mphnw = total_nw / n_total;
    out.mphmw = total_mw / n_total;
    out.sphnw = stddev_of(frame_means_nw);
    out.sphmw = stddev_of(frame_means_mw);
    return out;
}

namespace {

// Least-squares cubic coefficients (c0..c3) over abscissa t in [0,1].
// QR keeps this on a different numerical route than the normal-equations
// oracle used by the tests.
std::array<double, 4> fit_cubic(const std::vector<double>& y)
{
    const std::size_t n = y.size();
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        a(i, 0) = 1.0;
        a(i, 1) = t;
        a(i, 2) = t * t;
        a(i, 3) = t * t * t;
        b(i) = y[i];
    }
    Eigen::Vector4d c = a.colPivHouseholderQr().solve(b);
    return {c(0), c(1), c(2), c(3)};
}

} // namespace

SpectralSimilarity spectral_similarity(const AudioSignal& ref, const AudioSignal& test,
                                       TimeScaleRatio beta, const TsmConfig& config)
{
    auto [ref_spec, test_spec] = time_instance_frames(
        ref, test, /*anchor_is_test=*/false, beta, config.frame_size, config.hop);

    const Matrix ref_mag = ref_spec.magnitude();
    const Matrix test_mag = test_spec.magnitude();
    const std::size_t n_frames = std::min(ref_mag.rows, test_mag.rows);
    const std::size_t n_bins = ref_mag.cols;
    const std::size_t n_eval = config.frame_size / 2;

    std::vector<double> ref_norm(n_bins), test_norm(n_bins);
    double mad_sum = 0.0, md_sum = 0.0;
    std::size_t used = 0;

    for (std::size_t u = 0; u < n_frames; ++u) {
        const double* r = ref_mag.row(u);
        const double* t = test_mag.row(u);
        const double rmax = *std::max_element(r, r + n_bins);
        const double tmax = *std::max_element(t, t + n_bins);
        if (rmax == 0.0 || tmax == 0.0)
            continue; // silent frame

        for (std::size_t k = 0; k < n_bins; ++k) {
            ref_norm[k] = r[k] / rmax;
            test_norm[k] = t[k] / tmax;
        }
        const auto cr = fit_cubic(ref_norm);
        const auto ct = fit_cubic(test_norm);

        // intercept-free curves differ only through c1..c3
        double mad = 0.0, md = 0.0;
        for (std::size_t j = 0; j < n_eval; ++j) {
            const double x = static_cast<double>(j) / static_cast<double>(n_eval - 1);
            const double yr = x * (cr[1] + x * (cr[2] + x * cr[3]));
            const double yt = x * (ct[1] + x * (ct[2] + x * ct[3]));
            mad += std::fabs(yr - yt);
            md += yr - yt;
        }
        mad_sum += mad / static_cast<double>(n_eval);
        md_sum += md / static_cast<double>(n_eval);
        ++used;
    }

    if (used == 0)
        throw DataError("spectral_similarity: all frames silent");
    return {mad_sum / static_cast<double>(used), md_sum / static_cast<double>(used)};
}

OnsetEnvelope onset_envelope(const Spectrogram& spec)
{
    if (spec.frames < 3)
        throw DataError("onset envelope needs at least three frames");

    std::vector<double> energy(spec.frames);
    for (std::size_t u = 0; u < spec.frames; ++u) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < spec.bin_count; ++k) // k = 0 .. N/2-1
            acc += static_cast<double>(k) * std::norm(spec.at(u, k));
        energy[u] = std::max(acc, kLogFloor);
    }

    OnsetEnvelope env;
    env.values.resize(spec.frames - 1);
    for (std::size_t u = 1; u < spec.frames; ++u)
        env.values[u - 1] = std::log10(energy[u]) - std::log10(energy[u - 1]);
    return env;
}

OnsetEnvelope onset_envelope(const AudioSignal& signal, std::size_t frame_size,
                             std::size_t hop)
{
    // zero-padded tail frames would register as artificial offsets; the
    // envelope uses full frames only
    Spectrogram spec = stft(signal, frame_size, hop);
    const std::size_t full = (signal.samples.size() - frame_size) / hop + 1;
    if (full < spec.frames) {
        spec.frames = full;
        spec.bins.resize(full * spec.bin_count);
    }
    return onset_envelope(spec);
}

OnsetEnvelope pick_peaks(OnsetEnvelope env)
{
    env.peak_indices.clear();
    const auto& v = env.values;
    if (v.size() < 5)
        throw DataError("peak picking needs an envelope of at least five values");
    for (std::size_t u = 2; u + 2 < v.size(); ++u) {
        if (v[u] > v[u - 2] && v[u] > v[u - 1] && v[u] > v[u + 1] && v[u] > v[u + 2])
            env.peak_indices.push_back(u);
    }
    return env;
}

OnsetEnvelope select_strong_peaks(OnsetEnvelope env)
{
    env.selected_peaks.clear();
    const double threshold = mean_of(env.values) + stddev_of(env.values);
    for (std::size_t p : env.peak_indices)
        if (env.values[p] > threshold)
            env.selected_peaks.push_back(p);
    return env;
}

double peak_delta(const OnsetEnvelope& ref_env, const OnsetEnvelope& test_env,
                  int sample_rate, std::size_t ref_len)
{
    const double n_ref = static_cast<double>(ref_env.peak_indices.size());
    const double n_test = static_cast<double>(test_env.peak_indices.size());
    return static_cast<double>(sample_rate) / static_cast<double>(ref_len) * (n_test - n_ref);
}

double transient_ratio(const OnsetEnvelope& ref_env, const OnsetEnvelope& test_env,
                       bool* degenerate)
{
    const OnsetEnvelope ref_sel = select_strong_peaks(ref_env);
    const OnsetEnvelope test_sel = select_strong_peaks(test_env);
    if (degenerate)
        *degenerate = false;
    if (ref_sel.selected_peaks.empty() || test_sel.selected_peaks.empty()) {
        if (degenerate)
            *degenerate = true;
        return 1.0;
    }

    auto level_mean = [](const OnsetEnvelope& e) {
        double acc = 0.0;
        for (std::size_t p : e.selected_peaks)
            acc += e.values[p];
        return acc / static_cast<double>(e.selected_peaks.size());
    };
    return level_mean(ref_sel) / level_mean(test_sel);
}

namespace {

double median_of(std::vector<double>& buf)
{
    const std::size_t mid = buf.size() / 2;
    std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
    return buf[mid];
}

// Median along the time axis per bin (harmonic estimate) or along the
// frequency axis per frame (percussive estimate); edges are zero padded.
Matrix median_filter(const Matrix& mag, std::size_t length, bool along_time)
{
    Matrix out(mag.rows, mag.cols);
    const std::size_t half = length / 2;
    std::vector<double> buf(length);
    if (along_time) {
        for (std::size_t k = 0; k < mag.cols; ++k) {
            for (std::size_t u = 0; u < mag.rows; ++u) {
                for (std::size_t j = 0; j < length; ++j) {
                    const long idx = static_cast<long>(u + j) - static_cast<long>(half);
                    buf[j] = (idx >= 0 && idx < static_cast<long>(mag.rows))
                                 ? mag.at(static_cast<std::size_t>(idx), k)
                                 : 0.0;
                }
                out.at(u, k) = median_of(buf);
            }
        }
    } else {
        for (std::size_t u = 0; u < mag.rows; ++u) {
            for (std::size_t k = 0; k < mag.cols; ++k) {
                for (std::size_t j = 0; j < length; ++j) {
                    const long idx = static_cast<long>(k + j) - static_cast<long>(half);
                    buf[j] = (idx >= 0 && idx < static_cast<long>(mag.cols))
                                 ? mag.at(u, static_cast<std::size_t>(idx))
                                 : 0.0;
                }
                out.at(u, k) = median_of(buf);
            }
        }
    }
    return out;
}

AudioSignal istft_overlap_add(const std::vector<std::complex<double>>& bins,
                              std::size_t frames, std::size_t bin_count,
                              std::size_t frame_size, std::size_t hop,
                              std::size_t out_len, int sample_rate)
{
    const std::vector<double> window = hann_window(frame_size);
    std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);
    std::vector<std::complex<double>> frame_bins(bin_count);

    for (std::size_t u = 0; u < frames; ++u) {
        std::copy(bins.begin() + u * bin_count, bins.begin() + (u + 1) * bin_count,
                  frame_bins.begin());
        const std::vector<double> frame = irfft(frame_bins, frame_size);
        const std::size_t start = u * hop;
        for (std::size_t i = 0; i < frame_size && start + i < out_len; ++i) {
            acc[start + i] += window[i] * frame[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    // keep boundary samples with marginal window coverage from blowing up
    const double norm_floor =
        0.01 * *std::max_element(norm.begin(), norm.end());
    for (std::size_t i = 0; i < out_len; ++i)
        acc[i] = norm[i] > norm_floor ? acc[i] / norm[i] : 0.0;

    AudioSignal out;
    out.sample_rate = sample_rate;
    out.samples = std::move(acc);
    return out;
}

} // namespace

HpssResult hpss_separate(const AudioSignal& signal, const TsmConfig& config)
{
    const Spectrogram spec = stft(signal, config.hpss_frame_size, config.hpss_hop);
    const Matrix mag = spec.magnitude();
    const Matrix harm_est = median_filter(mag, config.hpss_time_median, /*along_time=*/true);
    const Matrix perc_est = median_filter(mag, config.hpss_freq_median, /*along_time=*/false);

    std::vector<std::complex<double>> harm_bins(spec.bins.size());
    std::vector<std::complex<double>> perc_bins(spec.bins.size());
    for (std::size_t i = 0; i < spec.bins.size(); ++i) {
        // complementary binary masks; ties go to the harmonic side
        if (perc_est.data[i] > harm_est.data[i]) {
            perc_bins[i] = spec.bins[i];
        } else {
            harm_bins[i] = spec.bins[i];
        }
    }

    HpssResult out;
    out.harmonic = istft_overlap_add(harm_bins, spec.frames, spec.bin_count,
                                     config.hpss_frame_size, config.hpss_hop,
                                     signal.samples.size(), signal.sample_rate);
    out.percussive = istft_overlap_add(perc_bins, spec.frames, spec.bin_count,
                                       config.hpss_frame_size, config.hpss_hop,
                                       signal.samples.size(), signal.sample_rate);
    return out;
}

AudioSignal hps_percussive(const AudioSignal& signal, const TsmConfig& config)
{
    return hpss_separate(signal, config).percussive;
}

double hps_transient_ratio(const AudioSignal& ref, const AudioSignal& test,
                           const TsmConfig& config)
{
    const double ref_rms = rms(hps_percussive(ref, config).samples);
    const double test_rms = rms(hps_percussive(test, config).samples);
    if (test_rms == 0.0)
        throw DataError("no percussive energy in test signal");
    return ref_rms / test_rms;
}

std::optional<double> bandwidth_test_new(const Spectrogram& test_spec)
{
    constexpr double kNoiseFloorHz = 21000.0;
    constexpr double kInclusionHz = 8000.0;
    constexpr double kThresholdFactor = 10.0; // +10 dB in power

    const double bin_hz = static_cast<double>(test_spec.sample_rate) /
                          static_cast<double>(test_spec.frame_size);
    std::size_t floor_start = test_spec.bin_count;
    for (std::size_t k = 0; k < test_spec.bin_count; ++k) {
        if (test_spec.bin_frequency(k) >= kNoiseFloorHz) {
            floor_start = k;
            break;
        }
    }
    if (floor_start >= test_spec.bin_count)
        return std::nullopt; // no spectrum above 21 kHz at this sample rate

    double bw_sum = 0.0;
    std::size_t qualifying = 0;
    for (std::size_t u = 0; u < test_spec.frames; ++u) {
        double noise_floor = 0.0;
        for (std::size_t k = floor_start; k < test_spec.bin_count; ++k)
            noise_floor = std::max(noise_floor, std::norm(test_spec.at(u, k)));

        double bw = 0.0;
        for (std::size_t k = floor_start; k-- > 0;) {
            if (std::norm(test_spec.at(u, k)) > kThresholdFactor * noise_floor) {
                bw = static_cast<double>(k) * bin_hz; // frequency of the last live bin
                break;
            }
        }
        if (bw > kInclusionHz) {
            bw_sum += bw;
            ++qualifying;
        }
    }
    return qualifying > 0 ? bw_sum / static_cast<double>(qualifying) : 0.0;
}

TsmFeatureSet compute_tsm_features(const AudioSignal& ref, const AudioSignal& test,
                                   const Spectrogram& ref_spec, const Spectrogram& test_spec,
                                   const Matrix& aligned_ref_mag, const Matrix& aligned_test_mag,
                                   TimeScaleRatio beta, const TsmConfig& config)
{
    TsmFeatureSet out;
    out.ser = ser(aligned_ref_mag, aligned_test_mag);
    out.dm = dm(aligned_ref_mag, aligned_test_mag);

    const PhasinessFeatures ph = phasiness(ref_spec, test_spec, beta);
    out.mphnw = ph.mphnw;
    out.mphmw = ph.mphmw;
    out.sphnw = ph.sphnw;
    out.sphmw = ph.sphmw;

    const SpectralSimilarity ss = spectral_similarity(ref, test, beta, config);
    out.ssmad = ss.ssmad;
    out.ssmd = ss.ssmd;

    const OnsetEnvelope ref_env =
        pick_peaks(onset_envelope(ref, config.frame_size, config.hop));
    const OnsetEnvelope test_env =
        pick_peaks(onset_envelope(test, config.frame_size, config.hop));
    out.peak_delta = peak_delta(ref_env, test_env, ref.sample_rate, ref.samples.size());
    out.tr_rat = transient_ratio(ref_env, test_env, &out.tr_rat_degenerate);
    out.hps_tr_rat = hps_transient_ratio(ref, test, config);

    out.bandwidth_test_new = bandwidth_test_new(test_spec);
    return out;
}

} // namespace tsmq
