#include "panama/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace panama::sig {

namespace {

void normalize_peak(std::vector<double>& x, double peak) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    if (m > 0.0)
        for (double& v : x) v *= peak / m;
}

void mix_at(std::vector<double>& dst, const std::vector<double>& src, std::size_t at, double gain) {
    for (std::size_t i = 0; i < src.size() && at + i < dst.size(); ++i) dst[at + i] += gain * src[i];
}

double midi_hz(double note) { return 440.0 * std::pow(2.0, (note - 69.0) / 12.0); }

std::size_t samples_for(double seconds, int sample_rate) {
    if (!(seconds > 0.0) || sample_rate <= 0) throw std::invalid_argument("signal length and sample rate must be positive");
    return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

}  // namespace

std::vector<double> pluck(double freq_hz, std::size_t length, double decay, int sample_rate, std::mt19937_64& rng) {
    const auto period = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(sample_rate / freq_hz)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> line(period);
    for (double& v : line) v = u(rng);
    std::vector<double> out(length);
    std::size_t pos = 0;
    for (std::size_t n = 0; n < length; ++n) {
        const std::size_t next = (pos + 1) % period;
        out[n] = line[pos];
        line[pos] = decay * 0.5 * (line[pos] + line[next]);
        pos = next;
    }
    return out;
}

std::vector<double> log_sweep(double f0, double f1, std::size_t length, int sample_rate, double amplitude) {
    std::vector<double> out(length);
    const double dur = static_cast<double>(length) / sample_rate;
    const double k = std::log(f1 / f0);
    for (std::size_t n = 0; n < length; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        const double phase = 2.0 * std::numbers::pi * f0 * dur / k * (std::exp(t / dur * k) - 1.0);
        out[n] = amplitude * std::sin(phase);
    }
    // Short fades avoid clicks at either end.
    const std::size_t fade = std::min<std::size_t>(length / 2, static_cast<std::size_t>(0.01 * sample_rate));
    for (std::size_t n = 0; n < fade; ++n) {
        const double w = static_cast<double>(n) / static_cast<double>(fade);
        out[n] *= w;
        out[length - 1 - n] *= w;
    }
    return out;
}

dsp::AudioSignal input_signal(double seconds, int sample_rate, std::uint64_t seed) {
    const std::size_t total = samples_for(seconds, sample_rate);
    std::mt19937_64 rng(seed);
    dsp::AudioSignal x{std::vector<double>(total, 0.0), sample_rate};
    const std::size_t noise_end = total * 3 / 10, sweep_end = total * 6 / 10;

    std::normal_distribution<double> noise(0.0, 1.0);
    const double levels[] = {0.02, 0.08, 0.2, 0.4};
    const std::size_t burst = std::max<std::size_t>(1, static_cast<std::size_t>(0.15 * sample_rate));
    const std::size_t gap = burst / 3;
    for (std::size_t start = 0, i = 0; start < noise_end; start += burst + gap, ++i)
        for (std::size_t n = start; n < std::min(start + burst, noise_end); ++n)
            x.samples[n] = std::clamp(levels[i % 4] * noise(rng), -1.0, 1.0);

    mix_at(x.samples, log_sweep(40.0, 0.45 * sample_rate, sweep_end - noise_end, sample_rate, 0.5), noise_end, 1.0);

    std::vector<double> plucks(total - sweep_end, 0.0);
    std::uniform_real_distribution<double> note(40.0, 76.0), vel(0.15, 0.9), step(0.12, 0.4);
    for (double t = 0.0; t < static_cast<double>(plucks.size()) / sample_rate; t += step(rng)) {
        const auto at = static_cast<std::size_t>(t * sample_rate);
        const std::size_t len = std::min<std::size_t>(plucks.size() - at, static_cast<std::size_t>(1.2 * sample_rate));
        mix_at(plucks, pluck(midi_hz(std::round(note(rng))), len, 0.996, sample_rate, rng), at, vel(rng));
    }
    normalize_peak(plucks, 0.8);
    mix_at(x.samples, plucks, sweep_end, 1.0);
    return x;
}

dsp::AudioSignal test_clip(double seconds, int sample_rate, std::uint64_t seed) {
    const std::size_t total = samples_for(seconds, sample_rate);
    std::mt19937_64 rng(seed);
    dsp::AudioSignal x{std::vector<double>(total, 0.0), sample_rate};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // A random minor-pentatonic walk around a random root.
    const int scale[] = {0, 3, 5, 7, 10, 12, 15, 17, 19, 22, 24};
    const double root = 40.0 + std::floor(u(rng) * 12.0);
    int degree = 4;
    const double beat = 0.18 + 0.2 * u(rng);
    for (double t = 0.0; t < seconds; t += beat * (u(rng) < 0.3 ? 2.0 : 1.0)) {
        degree = std::clamp(degree + static_cast<int>(std::floor(u(rng) * 5.0)) - 2, 0, 10);
        const auto at = static_cast<std::size_t>(t * sample_rate);
        const std::size_t len = std::min<std::size_t>(total - at, static_cast<std::size_t>(1.5 * sample_rate));
        const double v = 0.3 + 0.6 * u(rng);
        mix_at(x.samples, pluck(midi_hz(root + scale[degree]), len, 0.995, sample_rate, rng), at, v);
        if (u(rng) < 0.25)
            mix_at(x.samples, pluck(midi_hz(root + scale[degree] + 7.0), len, 0.995, sample_rate, rng), at, 0.7 * v);
    }
    normalize_peak(x.samples, 0.7);
    return x;
}

}  // namespace panama::sig
