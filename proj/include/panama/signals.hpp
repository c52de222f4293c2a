#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "panama/audio.hpp"

namespace panama::sig {

/// Karplus-Strong plucked string: a noise burst circulating through a
/// two-tap averaging delay line of sample_rate / freq samples.
std::vector<double> pluck(double freq_hz, std::size_t length, double decay, int sample_rate, std::mt19937_64& rng);

/// Logarithmic sine sweep from f0 to f1 over the given length.
std::vector<double> log_sweep(double f0, double f1, std::size_t length, int sample_rate, double amplitude);

/// Fixed training input: white noise bursts at several levels, then a log
/// sweep, then plucked notes. The three parts split the duration 3:3:4.
dsp::AudioSignal input_signal(double seconds, int sample_rate, std::uint64_t seed);

/// Guitar-like test clip: a seeded melody of overlapping plucked notes with
/// occasional two-note chords.
dsp::AudioSignal test_clip(double seconds, int sample_rate, std::uint64_t seed);

}  // namespace panama::sig
