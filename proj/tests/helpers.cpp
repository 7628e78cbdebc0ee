#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tsmq::testing {

namespace {

void put_u32(std::ofstream& f, std::uint32_t v)
{
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    f.write(b, 4);
}

void put_u16(std::ofstream& f, std::uint16_t v)
{
    char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
    f.write(b, 2);
}

void write_header(std::ofstream& f, std::uint16_t format, std::uint16_t channels,
                  std::uint32_t sample_rate, std::uint16_t bits, std::uint32_t data_bytes)
{
    f.write("RIFF", 4);
    put_u32(f, 36 + data_bytes);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(f, 16);
    put_u16(f, format);
    put_u16(f, channels);
    put_u32(f, sample_rate);
    put_u32(f, sample_rate * channels * bits / 8);
    put_u16(f, static_cast<std::uint16_t>(channels * bits / 8));
    put_u16(f, bits);
    f.write("data", 4);
    put_u32(f, data_bytes);
}

} // namespace

void write_wav16(const std::string& path, const std::vector<std::vector<double>>& channels,
                 int sample_rate)
{
    std::ofstream f(path, std::ios::binary);
    const std::size_t frames = channels.empty() ? 0 : channels[0].size();
    const std::uint32_t data_bytes =
        static_cast<std::uint32_t>(frames * channels.size() * 2);
    write_header(f, 1, static_cast<std::uint16_t>(channels.size()),
                 static_cast<std::uint32_t>(sample_rate), 16, data_bytes);
    for (std::size_t i = 0; i < frames; ++i) {
        for (const auto& ch : channels) {
            const double clipped = std::clamp(ch[i], -1.0, 1.0);
            const int value = static_cast<int>(std::lrint(clipped * 32767.0));
            put_u16(f, static_cast<std::uint16_t>(static_cast<std::int16_t>(value)));
        }
    }
}

void write_wav_float(const std::string& path, const std::vector<double>& samples,
                     int sample_rate)
{
    std::ofstream f(path, std::ios::binary);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
    write_header(f, 3, 1, static_cast<std::uint32_t>(sample_rate), 32, data_bytes);
    for (double v : samples) {
        const float fv = static_cast<float>(v);
        std::uint32_t bits;
        static_assert(sizeof(bits) == sizeof(fv));
        std::memcpy(&bits, &fv, 4);
        put_u32(f, bits);
    }
}

AudioSignal make_tone(double freq_hz, double seconds, int sample_rate, double amplitude)
{
    AudioSignal s;
    s.sample_rate = sample_rate;
    const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] = amplitude * std::sin(2.0 * M_PI * freq_hz * i / sample_rate);
    return s;
}

AudioSignal make_noise(double seconds, int sample_rate, std::uint64_t seed, double amplitude)
{
    TestRng rng(seed);
    AudioSignal s;
    s.sample_rate = sample_rate;
    const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] = amplitude * rng.uniform(-1.0, 1.0);
    return s;
}

AudioSignal make_click_train(double seconds, int sample_rate, double clicks_per_second,
                             std::uint64_t seed, double floor_amplitude)
{
    TestRng rng(seed);
    AudioSignal s;
    s.sample_rate = sample_rate;
    const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples[i] = floor_amplitude * rng.uniform(-1.0, 1.0);
    const std::size_t spacing =
        static_cast<std::size_t>(static_cast<double>(sample_rate) / clicks_per_second);
    for (std::size_t i = spacing / 2; i < n; i += spacing) {
        for (std::size_t j = 0; j < 32 && i + j < n; ++j)
            s.samples[i + j] += (j % 2 == 0 ? 1.0 : -1.0) * std::exp(-0.25 * static_cast<double>(j));
    }
    return s;
}

AudioSignal naive_time_stretch(const AudioSignal& input, double beta)
{
    // windowed overlap-add with analysis hop scaled by beta
    const std::size_t frame = 1024;
    const std::size_t synth_hop = frame / 4;
    const double analysis_hop = static_cast<double>(synth_hop) * beta;

    std::vector<double> window(frame);
    for (std::size_t i = 0; i < frame; ++i)
        window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / static_cast<double>(frame - 1)));

    const std::size_t out_len =
        static_cast<std::size_t>(static_cast<double>(input.samples.size()) / beta);
    std::vector<double> acc(out_len + frame, 0.0), norm(out_len + frame, 0.0);

    for (std::size_t u = 0;; ++u) {
        const std::size_t in_start =
            static_cast<std::size_t>(std::round(static_cast<double>(u) * analysis_hop));
        const std::size_t out_start = u * synth_hop;
        if (in_start + frame > input.samples.size() || out_start + frame > acc.size())
            break;
        for (std::size_t i = 0; i < frame; ++i) {
            acc[out_start + i] += window[i] * input.samples[in_start + i];
            norm[out_start + i] += window[i] * window[i];
        }
    }

    AudioSignal out;
    out.sample_rate = input.sample_rate;
    out.samples.resize(out_len);
    const double norm_floor = 0.01 * *std::max_element(norm.begin(), norm.end());
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = norm[i] > norm_floor ? acc[i] / norm[i] : 0.0;
    return out;
}

std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame)
{
    const std::size_t n = frame.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -2.0 * M_PI * static_cast<double>(k) *
                                 static_cast<double>(i) / static_cast<double>(n);
            acc += frame[i] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

} // namespace tsmq::testing
