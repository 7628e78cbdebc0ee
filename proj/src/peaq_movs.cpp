#include "tsmq/peaq.hpp"
#include "tsmq/fft.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace tsmq {

namespace {

constexpr double kOnePointFiveDbPower = 1.41253754462275; // 10^0.15
constexpr double kEnergyFloor = 1e-12;

// Steepness of the psychometric function at level l (dB).
double detection_steepness(double l)
{
    if (l <= 0.0)
        return 1e30;
    return 5.95072 * std::pow(6.39468 / l, 1.71332) + 9.01033e-11 * std::pow(l, 4.0) +
           5.05622e-6 * std::pow(l, 3.0) - 0.00102438 * l * l + 0.0550197 * l - 0.198719;
}

struct BandwidthPair {
    double ref_hz = 0.0;
    double test_hz = 0.0;
};

// Per-frame bandwidths: the noise floor is the strongest test bin above
// 21 kHz; search downward for the first bin exceeding it by +10 dB (ref)
// or +5 dB (test). Reported in Hz.
BandwidthPair frame_bandwidths(const double* ref_power, const double* test_power,
                               std::size_t bin_count, double bin_hz)
{
    constexpr double kFloorRegionHz = 21000.0;
    constexpr double kRefFactor = 10.0;          // +10 dB
    const double kTestFactor = std::pow(10.0, 0.5); // +5 dB

    std::size_t floor_start = bin_count;
    for (std::size_t k = 0; k < bin_count; ++k) {
        if (static_cast<double>(k) * bin_hz >= kFloorRegionHz) {
            floor_start = k;
            break;
        }
    }
    BandwidthPair out;
    if (floor_start >= bin_count)
        return out; // sample rate too low for the procedure

    double noise_floor = 0.0;
    for (std::size_t k = floor_start; k < bin_count; ++k)
        noise_floor = std::max(noise_floor, test_power[k]);

    for (std::size_t k = floor_start; k-- > 0;) {
        if (ref_power[k] > kRefFactor * noise_floor) {
            out.ref_hz = static_cast<double>(k) * bin_hz;
            break;
        }
    }
    for (std::size_t k = floor_start; k-- > 0;) {
        if (test_power[k] > kTestFactor * noise_floor) {
            out.test_hz = static_cast<double>(k) * bin_hz;
            break;
        }
    }
    return out;
}

// Harmonic structure of the error: peak of the power spectrum of the
// windowed, mean-removed, normalized autocorrelation of the log-spectrum
// difference. Returns false when the frame carries no usable error signal.
bool frame_ehs(const double* ref_power, const double* test_power, std::size_t bin_count,
               std::size_t lag_count, double* out)
{
    const std::size_t m = lag_count; // correlation window length
    std::vector<double> d(lag_count + m);
    for (std::size_t k = 0; k < d.size() && k < bin_count; ++k)
        d[k] = std::log(test_power[k] + kEnergyFloor) - std::log(ref_power[k] + kEnergyFloor);

    double energy0 = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        energy0 += d[k] * d[k];
    if (energy0 <= 0.0)
        return false;

    std::vector<double> corr(lag_count);
    for (std::size_t lag = 0; lag < lag_count; ++lag) {
        double num = 0.0, energy_lag = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            num += d[k] * d[k + lag];
            energy_lag += d[k + lag] * d[k + lag];
        }
        corr[lag] = energy_lag > 0.0 ? num / std::sqrt(energy0 * energy_lag) : 0.0;
    }

    double mean = 0.0;
    for (double v : corr)
        mean += v;
    mean /= static_cast<double>(lag_count);

    std::vector<double> windowed(lag_count);
    for (std::size_t i = 0; i < lag_count; ++i) {
        const double w =
            0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(lag_count - 1)));
        windowed[i] = w * (corr[i] - mean) / static_cast<double>(lag_count);
    }
    const auto spectrum = rfft(windowed);

    double peak = 0.0;
    for (std::size_t k = 1; k < spectrum.size(); ++k)
        peak = std::max(peak, std::norm(spectrum[k]));
    *out = 1000.0 * peak;
    return true;
}

std::size_t largest_pow2_at_most(std::size_t n)
{
    std::size_t p = 1;
    while (p * 2 <= n)
        p *= 2;
    return p;
}

} // namespace

std::pair<Matrix, Matrix> adapt_patterns(const FftEarModel& model, const Matrix& ref_excitation,
                                         const Matrix& test_excitation)
{
    if (!ref_excitation.same_shape(test_excitation))
        throw DataError("adaptation: pattern shape mismatch");

    const std::size_t frames = ref_excitation.rows;
    const std::size_t nc = ref_excitation.cols;
    const auto& a = model.adapt_coeff_;

    Matrix ref_out(frames, nc), test_out(frames, nc);
    std::vector<double> ref_smooth(nc, 0.0), test_smooth(nc, 0.0);
    std::vector<double> corr_num(nc, 0.0), corr_den(nc, 0.0);
    std::vector<double> ref_pattcorr(nc, 1.0), test_pattcorr(nc, 1.0);
    std::vector<double> ref_factor(nc), test_factor(nc);
    constexpr int kWinBelow = 3, kWinAbove = 4;

    for (std::size_t t = 0; t < frames; ++t) {
        const double* er = ref_excitation.row(t);
        const double* et = test_excitation.row(t);

        // level adaptation: scale the louder signal down to the other
        double num = 0.0, den_test = 0.0;
        for (std::size_t i = 0; i < nc; ++i) {
            ref_smooth[i] = a[i] * ref_smooth[i] + (1.0 - a[i]) * er[i];
            test_smooth[i] = a[i] * test_smooth[i] + (1.0 - a[i]) * et[i];
            num += std::sqrt(ref_smooth[i] * test_smooth[i]);
            den_test += test_smooth[i];
        }
        const double level = den_test > 0.0 ? (num / den_test) * (num / den_test) : 1.0;

        std::vector<double> ref_lev(nc), test_lev(nc);
        for (std::size_t i = 0; i < nc; ++i) {
            if (level > 1.0) {
                ref_lev[i] = er[i] / level;
                test_lev[i] = et[i];
            } else {
                ref_lev[i] = er[i];
                test_lev[i] = et[i] * level;
            }
        }

        // pattern adaptation: per-band gain correction from smoothed
        // test/ref correlation, averaged over a small band window
        for (std::size_t i = 0; i < nc; ++i) {
            corr_num[i] = a[i] * corr_num[i] + test_lev[i] * ref_lev[i];
            corr_den[i] = a[i] * corr_den[i] + ref_lev[i] * ref_lev[i];
            const double r = corr_den[i] > 0.0 ? corr_num[i] / corr_den[i] : 1.0;
            if (r >= 1.0) {
                ref_factor[i] = r;
                test_factor[i] = 1.0;
            } else {
                ref_factor[i] = 1.0;
                test_factor[i] = r > 0.0 ? 1.0 / r : 1.0;
            }
        }
        for (std::size_t i = 0; i < nc; ++i) {
            const std::size_t lo = i >= static_cast<std::size_t>(kWinBelow) ? i - kWinBelow : 0;
            const std::size_t hi = std::min(nc - 1, i + kWinAbove);
            double sr = 0.0, st = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                sr += ref_factor[j];
                st += test_factor[j];
            }
            const double count = static_cast<double>(hi - lo + 1);
            ref_pattcorr[i] = a[i] * ref_pattcorr[i] + (1.0 - a[i]) * sr / count;
            test_pattcorr[i] = a[i] * test_pattcorr[i] + (1.0 - a[i]) * st / count;
            ref_out.at(t, i) = ref_lev[i] * ref_pattcorr[i];
            test_out.at(t, i) = test_lev[i] * test_pattcorr[i];
        }
    }
    return {std::move(ref_out), std::move(test_out)};
}

MovSet compute_movs(const FftEarModel& model, const EarPatterns& ref_patterns,
                    const EarPatterns& test_patterns, const Matrix& ref_magnitudes,
                    const Matrix& test_magnitudes)
{
    const std::size_t frames = ref_patterns.excitation.rows;
    const std::size_t nc = ref_patterns.excitation.cols;
    if (test_patterns.excitation.rows != frames)
        throw DataError("compute_movs: frame count mismatch between patterns");
    if (ref_magnitudes.rows != frames || test_magnitudes.rows != frames)
        throw DataError("compute_movs: spectra not aligned with patterns");

    const auto& cfg = model.config();
    const double bin_hz = static_cast<double>(cfg.sample_rate) /
                          static_cast<double>(cfg.frame_size);
    const std::size_t bin_count = ref_magnitudes.cols;
    const auto& internal_noise = model.internal_noise();
    const auto& bands = model.bands();

    // startup delay of roughly half a second for the smoothed patterns
    const std::size_t startup_delay = static_cast<std::size_t>(
        std::ceil(0.5 * static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.hop)));

    // data boundary for noise loudness: both signals audible
    std::size_t loudness_reached = frames;
    for (std::size_t t = 0; t < frames; ++t) {
        if (ref_patterns.total_loudness[t] > 0.1 && test_patterns.total_loudness[t] > 0.1) {
            loudness_reached = t;
            break;
        }
    }
    const std::size_t noise_loud_start =
        std::max(startup_delay, loudness_reached == frames ? frames : loudness_reached + 3);

    const auto [ref_adapted, test_adapted] =
        adapt_patterns(model, ref_patterns.excitation, test_patterns.excitation);

    // mask offsets per band: 3 dB up to 12 Bark, then 0.25 dB per Bark
    std::vector<double> mask_divisor(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        const double z = bands.center_bark[i];
        const double offset_db = z <= 12.0 ? 3.0 : 0.25 * z;
        mask_divisor[i] = std::pow(10.0, offset_db / 10.0);
    }

    const std::size_t ehs_lags = std::min(
        largest_pow2_at_most(static_cast<std::size_t>(
            std::max(1.0, 9000.0 / static_cast<double>(cfg.sample_rate) *
                              static_cast<double>(cfg.frame_size)))),
        largest_pow2_at_most(bin_count / 2));

    MovSet mov;
    double md1_weighted = 0.0, md2_weighted = 0.0, md_weight = 0.0;
    double win_md_acc = 0.0;
    std::size_t win_md_count = 0;
    std::deque<double> win_md_sqrt;
    double nl_sq_acc = 0.0;
    std::size_t nl_count = 0;
    double bw_ref_acc = 0.0, bw_test_acc = 0.0;
    std::size_t bw_ref_count = 0, bw_test_count = 0;
    double nmr_acc = 0.0;
    std::size_t disturbed_frames = 0;
    double filtered_prob = 0.0, max_filtered_prob = 0.0;
    double adb_steps = 0.0;
    std::size_t adb_frames = 0;
    double ehs_acc = 0.0;
    std::size_t ehs_count = 0;

    std::vector<double> ref_power(bin_count), test_power(bin_count), noise_power(bin_count);

    for (std::size_t t = 0; t < frames; ++t) {
        const double* rm = ref_magnitudes.row(t);
        const double* tm = test_magnitudes.row(t);
        for (std::size_t k = 0; k < bin_count; ++k) {
            ref_power[k] = rm[k] * rm[k];
            test_power[k] = tm[k] * tm[k];
            const double diff = rm[k] - tm[k];
            noise_power[k] = diff * diff;
        }

        // modulation difference
        if (t >= startup_delay) {
            double md1 = 0.0, md2 = 0.0, weight = 0.0;
            for (std::size_t i = 0; i < nc; ++i) {
                const double mr = ref_patterns.modulation.at(t, i);
                const double mt = test_patterns.modulation.at(t, i);
                const double diff = std::fabs(mr - mt);
                md1 += diff / (1.0 + mr);
                md2 += (mt >= mr ? 1.0 : 0.1) * diff / (0.01 + mr);
                const double loud = ref_patterns.average_loudness.at(t, i);
                weight += loud / (loud + 100.0 * std::pow(internal_noise[i], 0.3));
            }
            md1 *= 100.0 / static_cast<double>(nc);
            md2 *= 100.0 / static_cast<double>(nc);
            md1_weighted += weight * md1;
            md2_weighted += weight * md2;
            md_weight += weight;

            win_md_sqrt.push_back(std::sqrt(md1));
            if (win_md_sqrt.size() > 4)
                win_md_sqrt.pop_front();
            if (win_md_sqrt.size() == 4) {
                double s = 0.0;
                for (double v : win_md_sqrt)
                    s += v;
                s /= 4.0;
                win_md_acc += s * s * s * s;
                ++win_md_count;
            }
        }

        // noise loudness on adapted patterns
        if (t >= noise_loud_start) {
            double nl = 0.0;
            for (std::size_t i = 0; i < nc; ++i) {
                const double s_ref = 0.15 * ref_patterns.modulation.at(t, i) + 0.5;
                const double s_test = 0.15 * test_patterns.modulation.at(t, i) + 0.5;
                const double e_thres = internal_noise[i];
                const double ep_ref = ref_adapted.at(t, i);
                const double ep_test = test_adapted.at(t, i);
                const double beta =
                    ep_ref > 0.0 ? std::exp(-1.5 * (ep_test - ep_ref) / ep_ref) : 1.0;
                nl += std::pow(e_thres / s_test, 0.23) *
                      (std::pow(1.0 + std::max(s_test * ep_test - s_ref * ep_ref, 0.0) /
                                          (e_thres + s_ref * ep_ref * beta),
                                0.23) -
                       1.0);
            }
            nl *= 24.0 / static_cast<double>(nc);
            nl_sq_acc += nl * nl;
            ++nl_count;
        }

        // bandwidths
        const BandwidthPair bw = frame_bandwidths(ref_power.data(), test_power.data(),
                                                  bin_count, bin_hz);
        if (bw.ref_hz > 8000.0) {
            bw_ref_acc += bw.ref_hz;
            ++bw_ref_count;
        }
        if (bw.test_hz > 8000.0) {
            bw_test_acc += bw.test_hz;
            ++bw_test_count;
        }

        // noise-to-mask ratio against the reference mask
        const std::vector<double> noise_bands =
            model.group_into_bands(model.weight_power(noise_power.data()), false);
        double nmr_frame = 0.0, nmr_max = 0.0;
        for (std::size_t i = 0; i < nc; ++i) {
            const double mask = ref_patterns.excitation.at(t, i) / mask_divisor[i];
            const double ratio = mask > 0.0 ? noise_bands[i] / mask : 0.0;
            nmr_frame += ratio;
            nmr_max = std::max(nmr_max, ratio);
        }
        nmr_acc += nmr_frame / static_cast<double>(nc);
        if (nmr_max > kOnePointFiveDbPower)
            ++disturbed_frames;

        // detection probability (single channel)
        double not_detected = 1.0;
        double steps = 0.0;
        for (std::size_t i = 0; i < nc; ++i) {
            const double e_ref_db =
                10.0 * std::log10(std::max(ref_patterns.excitation.at(t, i), kEnergyFloor));
            const double e_test_db =
                10.0 * std::log10(std::max(test_patterns.excitation.at(t, i), kEnergyFloor));
            const double diff_db = e_ref_db - e_test_db;
            const double level = e_ref_db > e_test_db ? 0.3 * e_ref_db + 0.7 * e_test_db
                                                      : e_test_db;
            const double steepness = detection_steepness(level);
            const double b = e_ref_db > e_test_db ? 4.0 : 6.0;
            const double pc = 1.0 - std::pow(10.0, -std::pow(std::fabs(diff_db) / steepness, b));
            not_detected *= 1.0 - pc;
            steps += std::fabs(std::trunc(diff_db)) / steepness;
        }
        const double prob_frame = 1.0 - not_detected;
        filtered_prob = 0.9 * filtered_prob + 0.1 * prob_frame;
        max_filtered_prob = std::max(max_filtered_prob * 0.99, filtered_prob);
        if (prob_frame > 0.5) {
            ++adb_frames;
            adb_steps += steps;
        }

        // error harmonic structure
        double ehs_frame = 0.0;
        if (frame_ehs(ref_power.data(), test_power.data(), bin_count, ehs_lags, &ehs_frame)) {
            ehs_acc += ehs_frame;
            ++ehs_count;
        }
    }

    mov.avg_mod_diff1 = md_weight > 0.0 ? md1_weighted / md_weight : 0.0;
    mov.avg_mod_diff2 = md_weight > 0.0 ? md2_weighted / md_weight : 0.0;
    mov.win_mod_diff1 = win_md_count > 0
                            ? std::sqrt(win_md_acc / static_cast<double>(win_md_count))
                            : 0.0;
    mov.rms_noise_loud = nl_count > 0 ? std::sqrt(nl_sq_acc / static_cast<double>(nl_count))
                                      : 0.0;
    mov.bandwidth_ref =
        bw_ref_count > 0 ? bw_ref_acc / static_cast<double>(bw_ref_count) : 0.0;
    mov.bandwidth_test =
        bw_test_count > 0 ? bw_test_acc / static_cast<double>(bw_test_count) : 0.0;
    // floored at -120 dB so identical pairs stay finite
    mov.total_nmr = 10.0 * std::log10(std::max(nmr_acc / static_cast<double>(frames), 1e-12));
    mov.rel_dist_frames =
        static_cast<double>(disturbed_frames) / static_cast<double>(frames);
    mov.mfpd = max_filtered_prob;
    mov.adb = adb_frames == 0 ? 0.0
                              : (adb_steps > 0.0
                                     ? std::log10(adb_steps / static_cast<double>(adb_frames))
                                     : -0.5);
    mov.ehs = ehs_count > 0 ? ehs_acc / static_cast<double>(ehs_count) : 0.0;
    return mov;
}

} // namespace tsmq
