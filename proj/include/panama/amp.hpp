#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "panama/audio.hpp"
#include "panama/models.hpp"

namespace panama::amp {

/// Knob order expected by the synthetic amp.
enum Knob : std::size_t { Gain = 0, Bass = 1, Mid = 2, Treble = 3, Master = 4, Presence = 5, KnobCount = 6 };

struct ShelfBand {
    double corner_hz = 100.0;
    double db_min = -12.0;
    double db_max = 12.0;
};

struct PeakBand {
    double center_hz = 800.0;
    double q = 0.7;
    double db_min = -12.0;
    double db_max = 12.0;
};

struct SynthAmpConfig {
    int version = 1;
    int sample_rate = 16000;
    /// Linear pregain, log-interpolated by the gain knob.
    double drive_min = 1.0;
    double drive_max = 50.0;
    /// Offset of the asymmetric tanh shaper: tanh(u + b) - tanh(b).
    double shaper_bias = 0.1;
    ShelfBand bass{100.0, -12.0, 12.0};
    PeakBand mid{800.0, 0.7, -12.0, 12.0};
    ShelfBand treble{3000.0, -15.0, 15.0};
    ShelfBand presence{6000.0, -9.0, 9.0};
    /// Output stage level * tanh(drive * s), both affine in the master knob.
    double master_drive_min = 1.0;
    double master_drive_max = 5.0;
    double master_level_min = 0.25;
    double master_level_max = 1.0;

    void validate() const;
};

/// Versioned default shipped in configs/synth_amp_v1.json.
SynthAmpConfig default_synth_amp();
SynthAmpConfig load_synth_amp(const std::filesystem::path& path);

/// Biquad b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;

    bool stable() const;
    void process(std::vector<double>& x) const;
};

Biquad low_shelf(double corner_hz, double gain_db, int sample_rate);
Biquad high_shelf(double corner_hz, double gain_db, int sample_rate);
Biquad peaking(double center_hz, double q, double gain_db, int sample_rate);

/// The four tone filters for a knob setting: bass, mid, treble, presence.
std::array<Biquad, 4> tone_stack(const nn::KnobVector& g, const SynthAmpConfig& cfg);

/// Pregain, shaper, tone stack, output stage. Deterministic and stateless.
dsp::AudioSignal synth_amp_process(const dsp::AudioSignal& x, const nn::KnobVector& g, const SynthAmpConfig& cfg);

/// Upper bound on |y| for any input.
double output_ceiling(const SynthAmpConfig& cfg);

/// CRC-32 over the samples encoded as float32 little-endian.
std::uint32_t signal_checksum(const std::vector<double>& samples);

struct Request {
    int id = 0;
    nn::KnobVector g;
    std::string file;

    bool operator==(const Request&) const = default;
};

struct RequestManifest {
    int version = 1;
    int round = 0;
    std::string checksum_algorithm = "crc32";
    std::uint32_t checksum = 0;
    int sample_rate = 16000;
    std::size_t length = 0;
    std::string input_file = "x.wav";
    std::vector<Request> requests;

    void validate() const;
    bool operator==(const RequestManifest&) const = default;
};

std::string request_filename(int round, int id);
std::filesystem::path manifest_path(const std::filesystem::path& dir, int round);

/// Writes the manifest and a float32 copy of x into dir.
RequestManifest export_request_manifest(const std::vector<nn::KnobVector>& G, int round, const dsp::AudioSignal& x,
                                        const std::filesystem::path& dir);
RequestManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RequestManifest& m, const std::filesystem::path& path);

struct Recording {
    int id = 0;
    nn::KnobVector g;
    dsp::AudioSignal y;
};

/// All problems found during an ingest, one message per request.
class IngestError : public std::runtime_error {
public:
    explicit IngestError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Loads every requested recording from dir. Lengths within 0.5 s of x are
/// trimmed or zero-padded to x's length. Fails as a whole if any request fails.
std::vector<Recording> ingest_recordings(const RequestManifest& manifest, const std::filesystem::path& dir,
                                         const dsp::AudioSignal& x);

void to_json(nlohmann::json& j, const SynthAmpConfig& c);
void from_json(const nlohmann::json& j, SynthAmpConfig& c);
void to_json(nlohmann::json& j, const RequestManifest& m);
void from_json(const nlohmann::json& j, RequestManifest& m);

}  // namespace panama::amp
