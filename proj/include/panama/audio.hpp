#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "panama/autodiff.hpp"

namespace panama::dsp {

/// Mono waveform. Samples nominally lie in [-1, 1].
struct AudioSignal {
    std::vector<double> samples;
    int sample_rate = 16000;

    std::size_t size() const { return samples.size(); }
    double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
    void validate() const;
};

enum class WavEncoding { Pcm16, Float32 };

AudioSignal read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding = WavEncoding::Float32);

/// One STFT/mel resolution.
struct MelConfig {
    int n_fft = 1024;
    int hop = 256;
    int n_mels = 80;
    double f_min = 0.0;
    double f_max = 8000.0;
    double log_floor = 1e-5;
    int sample_rate = 16000;

    int bins() const { return n_fft / 2 + 1; }
    std::size_t frames(std::size_t length) const;
    void validate() const;
};

/// Window lengths 32..2048 with mel counts 5..320, hop = window / 4.
std::vector<MelConfig> multiscale_configs(int sample_rate, double log_floor = 1e-5);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters on the mel scale, [n_mels x (n_fft/2 + 1)], unit peak.
/// Cached per configuration; throws if any filter row would be empty.
const ad::Array& mel_filterbank(const MelConfig& cfg);

/// Periodic Hann window of length n.
const std::vector<double>& hann_window(int n);

/// Hann-windowed power spectrum of every frame, [n_fft/2+1 x frames].
/// frames = 1 + floor((T - n_fft) / hop), no padding.
ad::Var power_spectrogram(ad::Var signal, int n_fft, int hop);

/// log(mel-filtered power + log_floor), [n_mels x frames].
ad::Var mel_spectrogram(ad::Var signal, const MelConfig& cfg);

/// Mean over scales of the mean absolute log-mel difference.
ad::Var multiscale_mel_loss(ad::Var a, ad::Var b, const std::vector<MelConfig>& scales);

void to_json(nlohmann::json& j, const MelConfig& c);
void from_json(const nlohmann::json& j, MelConfig& c);

/// multiscale_mel_loss on plain sample buffers, without gradients.
double multiscale_mel_distance(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<MelConfig>& scales);

}  // namespace panama::dsp
