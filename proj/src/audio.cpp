#include "tsmq/audio.hpp"
#include "tsmq/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace tsmq {

namespace {

constexpr double kActiveThreshold = 0.0061;

uint32_t read_u32(const unsigned char* p)
{
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p)
{
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

struct WavFormat {
    uint16_t format_tag = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits_per_sample = 0;
};

double decode_sample(const unsigned char* p, const WavFormat& fmt)
{
    switch (fmt.bits_per_sample) {
    case 8: // unsigned
        return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: {
        int16_t v = static_cast<int16_t>(p[0] | (p[1] << 8));
        return v / 32768.0;
    }
    case 24: {
        int32_t v = static_cast<int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (v & 0x800000)
            v |= ~0xFFFFFF; // sign extend
        return v / 8388608.0;
    }
    case 32:
        if (fmt.format_tag == 3) { // IEEE float
            float f;
            std::memcpy(&f, p, 4);
            return static_cast<double>(f);
        } else {
            int32_t v;
            std::memcpy(&v, p, 4);
            return v / 2147483648.0;
        }
    default:
        throw DataError("unsupported WAV bit depth: " + std::to_string(fmt.bits_per_sample));
    }
}

} // namespace

AudioSignal load_audio(const std::string& path)
{
    std::ifstream file(path, std::ios::binary);
    if (!file)
        throw DataError("cannot open audio file: " + path);

    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError("not a RIFF/WAVE file: " + path);

    WavFormat fmt;
    bool have_fmt = false;
    const unsigned char* data_ptr = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        uint32_t chunk_size = read_u32(chunk + 4);
        const unsigned char* body = chunk + 8;
        if (pos + 8 + chunk_size > bytes.size())
            chunk_size = static_cast<uint32_t>(bytes.size() - pos - 8);

        if (std::memcmp(chunk, "fmt ", 4) == 0 && chunk_size >= 16) {
            fmt.format_tag = read_u16(body);
            fmt.channels = read_u16(body + 2);
            fmt.sample_rate = read_u32(body + 4);
            fmt.bits_per_sample = read_u16(body + 14);
            if (fmt.format_tag == 0xFFFE && chunk_size >= 26)
                fmt.format_tag = read_u16(body + 24); // first bytes of SubFormat GUID
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data_ptr = body;
            data_size = chunk_size;
        }
        pos += 8 + chunk_size + (chunk_size & 1); // chunks are word aligned
    }

    if (!have_fmt || data_ptr == nullptr)
        throw DataError("missing fmt or data chunk: " + path);
    if (fmt.format_tag != 1 && fmt.format_tag != 3)
        throw DataError("unsupported WAV encoding (only PCM and float): " + path);
    if (fmt.format_tag == 3 && fmt.bits_per_sample != 32)
        throw DataError("unsupported float WAV bit depth: " + path);
    if (fmt.channels == 0 || fmt.sample_rate == 0)
        throw DataError("malformed fmt chunk: " + path);

    const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    const std::size_t n_frames = frame_bytes > 0 ? data_size / frame_bytes : 0;
    if (n_frames == 0)
        throw DataError("zero-length audio: " + path);

    AudioSignal out;
    out.sample_rate = static_cast<int>(fmt.sample_rate);
    out.samples.resize(n_frames, 0.0);
    for (std::size_t i = 0; i < n_frames; ++i) {
        const unsigned char* frame = data_ptr + i * frame_bytes;
        double acc = 0.0;
        for (unsigned c = 0; c < fmt.channels; ++c)
            acc += decode_sample(frame + c * bytes_per_sample, fmt);
        out.samples[i] = acc;
    }
    return out;
}

AudioSignal prepare(const AudioSignal& signal)
{
    if (signal.samples.empty())
        throw DataError("silent signal");

    double mean = 0.0;
    for (double v : signal.samples)
        mean += v;
    mean /= static_cast<double>(signal.samples.size());

    AudioSignal out;
    out.sample_rate = signal.sample_rate;
    out.samples.resize(signal.samples.size());

    double input_peak = 0.0;
    for (double v : signal.samples)
        input_peak = std::max(input_peak, std::fabs(v));

    double peak = 0.0;
    for (std::size_t i = 0; i < signal.samples.size(); ++i) {
        out.samples[i] = signal.samples[i] - mean;
        peak = std::max(peak, std::fabs(out.samples[i]));
    }
    // constant signals leave only rounding residue behind
    if (peak <= input_peak * 1e-12)
        throw DataError("silent signal");

    for (double& v : out.samples)
        v /= peak;
    return out;
}

std::pair<std::size_t, std::size_t> active_bounds(const AudioSignal& signal)
{
    const auto& x = signal.samples;
    if (x.size() < 4)
        throw DataError("no active region");

    double window = std::fabs(x[0]) + std::fabs(x[1]) + std::fabs(x[2]) + std::fabs(x[3]);
    std::size_t first = x.size(), last = 0;
    std::size_t i = 0;
    while (true) {
        if (window > kActiveThreshold) {
            first = std::min(first, i);
            last = i + 3;
        }
        if (i + 4 >= x.size())
            break;
        window += std::fabs(x[i + 4]) - std::fabs(x[i]);
        ++i;
    }
    if (first > last)
        throw DataError("no active region");
    return {first, last};
}

std::pair<AudioSignal, AudioSignal> truncate_active(const AudioSignal& ref,
                                                    const AudioSignal& test)
{
    if (ref.sample_rate != test.sample_rate)
        throw DataError("sample-rate mismatch between reference and test");

    auto cut = [](const AudioSignal& s) {
        auto [first, last] = active_bounds(s);
        AudioSignal out;
        out.sample_rate = s.sample_rate;
        out.samples.assign(s.samples.begin() + first, s.samples.begin() + last + 1);
        return out;
    };
    return {cut(ref), cut(test)};
}

double rms(const std::vector<double>& samples)
{
    if (samples.empty())
        return 0.0;
    double acc = 0.0;
    for (double v : samples)
        acc += v * v;
    return std::sqrt(acc / static_cast<double>(samples.size()));
}

} // namespace tsmq
