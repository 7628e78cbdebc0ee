#include "tsmq/spectral.hpp"
#include "tsmq/fft.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsmq {

Matrix Spectrogram::magnitude() const
{
    Matrix m(frames, bin_count);
    for (std::size_t i = 0; i < bins.size(); ++i)
        m.data[i] = std::abs(bins[i]);
    return m;
}

Matrix Spectrogram::phase() const
{
    Matrix m(frames, bin_count);
    for (std::size_t i = 0; i < bins.size(); ++i)
        m.data[i] = std::arg(bins[i]);
    return m;
}

Matrix Spectrogram::power() const
{
    Matrix m(frames, bin_count);
    for (std::size_t i = 0; i < bins.size(); ++i)
        m.data[i] = std::norm(bins[i]);
    return m;
}

AlignmentMode alignment_from_string(const std::string& name)
{
    if (name == "anchor_ref") return AlignmentMode::anchor_ref;
    if (name == "anchor_test") return AlignmentMode::anchor_test;
    if (name == "interp_longest") return AlignmentMode::interp_to_longest;
    if (name == "interp_shortest") return AlignmentMode::interp_to_shortest;
    if (name == "interp_ref") return AlignmentMode::interp_to_ref;
    if (name == "interp_test") return AlignmentMode::interp_to_test;
    throw DataError("unknown alignment mode: " + name);
}

std::string alignment_to_string(AlignmentMode mode)
{
    switch (mode) {
    case AlignmentMode::anchor_ref: return "anchor_ref";
    case AlignmentMode::anchor_test: return "anchor_test";
    case AlignmentMode::interp_to_longest: return "interp_longest";
    case AlignmentMode::interp_to_shortest: return "interp_shortest";
    case AlignmentMode::interp_to_ref: return "interp_ref";
    case AlignmentMode::interp_to_test: return "interp_test";
    }
    return "interp_test";
}

bool is_anchor_mode(AlignmentMode mode)
{
    return mode == AlignmentMode::anchor_ref || mode == AlignmentMode::anchor_test;
}

std::vector<double> hann_window(std::size_t n)
{
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(n - 1)));
    return w;
}

namespace {

bool is_power_of_two(std::size_t n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

// Windowed one-sided spectra at explicit frame starts. Frames running past
// the end of the signal are zero-padded.
Spectrogram stft_at_starts(const AudioSignal& signal, const std::vector<std::size_t>& starts,
                           std::size_t frame_size, std::size_t hop,
                           const std::vector<double>& window)
{
    Spectrogram spec;
    spec.frame_size = frame_size;
    spec.hop = hop;
    spec.sample_rate = signal.sample_rate;
    spec.bin_count = frame_size / 2 + 1;
    spec.frames = starts.size();
    spec.bins.resize(spec.frames * spec.bin_count);

    std::vector<double> frame(frame_size);
    for (std::size_t u = 0; u < starts.size(); ++u) {
        const std::size_t s = starts[u];
        for (std::size_t i = 0; i < frame_size; ++i) {
            const std::size_t idx = s + i;
            frame[i] = idx < signal.samples.size() ? signal.samples[idx] * window[i] : 0.0;
        }
        auto bins = rfft(frame);
        std::copy(bins.begin(), bins.end(), spec.bins.begin() + u * spec.bin_count);
    }
    return spec;
}

} // namespace

Spectrogram stft(const AudioSignal& signal, std::size_t frame_size, std::size_t hop)
{
    if (!is_power_of_two(frame_size))
        throw std::invalid_argument("stft: frame size must be a power of two");
    if (hop == 0 || hop > frame_size)
        throw std::invalid_argument("stft: hop must be in [1, frame_size]");
    if (signal.samples.size() < frame_size)
        throw DataError("signal shorter than one frame");

    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s < signal.samples.size(); s += hop)
        starts.push_back(s);
    return stft_at_starts(signal, starts, frame_size, hop, hann_window(frame_size));
}

TimeScaleRatio estimate_beta(const AudioSignal& ref, const AudioSignal& test,
                             std::optional<double> known)
{
    if (known) {
        if (*known <= 0.0)
            throw DataError("beta must be positive");
        return {*known};
    }
    if (ref.samples.empty() || test.samples.empty())
        throw DataError("cannot estimate beta from empty signals");
    return {static_cast<double>(ref.samples.size()) / static_cast<double>(test.samples.size())};
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
time_instance_starts(std::size_t ref_len, std::size_t test_len, bool anchor_is_test,
                     TimeScaleRatio beta, std::size_t frame_size, std::size_t hop)
{
    if (beta.beta <= 0.0)
        throw DataError("beta must be positive");

    std::vector<std::size_t> ref_starts, test_starts;
    for (std::size_t u = 0;; ++u) {
        double ref_pos, test_pos;
        if (anchor_is_test) {
            test_pos = static_cast<double>(u * hop);
            ref_pos = std::round(static_cast<double>(u) * beta.beta * static_cast<double>(hop));
        } else {
            ref_pos = static_cast<double>(u * hop);
            test_pos = std::round(static_cast<double>(u) * static_cast<double>(hop) / beta.beta);
        }
        if (ref_pos + static_cast<double>(frame_size) > static_cast<double>(ref_len) ||
            test_pos + static_cast<double>(frame_size) > static_cast<double>(test_len))
            break;
        ref_starts.push_back(static_cast<std::size_t>(ref_pos));
        test_starts.push_back(static_cast<std::size_t>(test_pos));
    }
    if (ref_starts.empty())
        throw DataError("no frames after time-instance clipping");
    return {ref_starts, test_starts};
}

std::pair<Spectrogram, Spectrogram>
time_instance_frames(const AudioSignal& ref, const AudioSignal& test, bool anchor_is_test,
                     TimeScaleRatio beta, std::size_t frame_size, std::size_t hop)
{
    auto [ref_starts, test_starts] = time_instance_starts(
        ref.samples.size(), test.samples.size(), anchor_is_test, beta, frame_size, hop);
    auto window = hann_window(frame_size);
    return {stft_at_starts(ref, ref_starts, frame_size, hop, window),
            stft_at_starts(test, test_starts, frame_size, hop, window)};
}

Matrix interpolate_rows(const Matrix& mag, std::size_t target_rows)
{
    if (mag.rows < 2 || target_rows < 2)
        throw DataError("interpolation needs at least two frames on both sides");
    if (target_rows == mag.rows)
        return mag;

    Matrix out(target_rows, mag.cols);
    const double step = static_cast<double>(mag.rows - 1) / static_cast<double>(target_rows - 1);
    for (std::size_t j = 0; j < target_rows; ++j) {
        const double pos = static_cast<double>(j) * step;
        std::size_t lo = static_cast<std::size_t>(pos);
        if (lo >= mag.rows - 1)
            lo = mag.rows - 2;
        const double frac = pos - static_cast<double>(lo);
        const double* a = mag.row(lo);
        const double* b = mag.row(lo + 1);
        double* dst = out.row(j);
        for (std::size_t k = 0; k < mag.cols; ++k)
            dst[k] = a[k] + frac * (b[k] - a[k]);
    }
    return out;
}

Matrix interpolate_spectrogram(const Spectrogram& spec, std::size_t target_frames)
{
    return interpolate_rows(spec.magnitude(), target_frames);
}

std::pair<Matrix, Matrix> align_magnitudes(const Matrix& ref_mag, const Matrix& test_mag,
                                           AlignmentMode mode)
{
    if (ref_mag.cols != test_mag.cols)
        throw DataError("alignment requires identical bin counts");
    if (ref_mag.rows == test_mag.rows)
        return {ref_mag, test_mag};

    std::size_t target;
    switch (mode) {
    case AlignmentMode::interp_to_longest:
        target = std::max(ref_mag.rows, test_mag.rows);
        break;
    case AlignmentMode::interp_to_shortest:
        target = std::min(ref_mag.rows, test_mag.rows);
        break;
    case AlignmentMode::interp_to_ref:
        target = ref_mag.rows;
        break;
    case AlignmentMode::interp_to_test:
        target = test_mag.rows;
        break;
    default:
        throw std::invalid_argument("align_magnitudes: anchor modes take framed input");
    }

    Matrix ref_out = ref_mag.rows == target ? ref_mag : interpolate_rows(ref_mag, target);
    Matrix test_out = test_mag.rows == target ? test_mag : interpolate_rows(test_mag, target);
    return {std::move(ref_out), std::move(test_out)};
}

std::pair<Matrix, Matrix> align(const Spectrogram& ref_spec, const Spectrogram& test_spec,
                                AlignmentMode mode, TimeScaleRatio)
{
    if (is_anchor_mode(mode)) {
        // Framing already happened at identical time-instances; just trim to
        // the common count.
        const std::size_t n = std::min(ref_spec.frames, test_spec.frames);
        if (n == 0)
            throw DataError("empty spectrogram pair");
        Matrix ref_mag = ref_spec.magnitude();
        Matrix test_mag = test_spec.magnitude();
        ref_mag.rows = n;
        ref_mag.data.resize(n * ref_mag.cols);
        test_mag.rows = n;
        test_mag.data.resize(n * test_mag.cols);
        return {std::move(ref_mag), std::move(test_mag)};
    }
    return align_magnitudes(ref_spec.magnitude(), test_spec.magnitude(), mode);
}

} // namespace tsmq
