#include "panama/amp.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

namespace panama::amp {

namespace {

std::string hex32(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

double knob_db(double knob, double db_min, double db_max) { return db_min + (db_max - db_min) * knob; }

void check_band(double hz, double db_min, double db_max, int sample_rate, const char* name) {
    if (!(hz > 0.0 && hz < 0.5 * sample_rate))
        throw std::invalid_argument(std::string("SynthAmpConfig: ") + name + " frequency must lie in (0, Nyquist)");
    if (!(db_min <= db_max)) throw std::invalid_argument(std::string("SynthAmpConfig: ") + name + " dB range inverted");
}

}  // namespace

void SynthAmpConfig::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("SynthAmpConfig: sample_rate must be positive");
    if (!(drive_min > 0.0 && drive_min <= drive_max)) throw std::invalid_argument("SynthAmpConfig: bad drive range");
    if (!(master_drive_min > 0.0 && master_drive_min <= master_drive_max))
        throw std::invalid_argument("SynthAmpConfig: bad master drive range");
    if (!(master_level_min >= 0.0 && master_level_min <= master_level_max && master_level_max <= 1.0))
        throw std::invalid_argument("SynthAmpConfig: master level must satisfy 0 <= min <= max <= 1");
    check_band(bass.corner_hz, bass.db_min, bass.db_max, sample_rate, "bass");
    check_band(mid.center_hz, mid.db_min, mid.db_max, sample_rate, "mid");
    check_band(treble.corner_hz, treble.db_min, treble.db_max, sample_rate, "treble");
    check_band(presence.corner_hz, presence.db_min, presence.db_max, sample_rate, "presence");
    if (!(mid.q > 0.0)) throw std::invalid_argument("SynthAmpConfig: mid Q must be positive");
}

SynthAmpConfig default_synth_amp() { return SynthAmpConfig{}; }

SynthAmpConfig load_synth_amp(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open amp config " + path.string());
    SynthAmpConfig c = nlohmann::json::parse(f).get<SynthAmpConfig>();
    c.validate();
    return c;
}

bool Biquad::stable() const {
    // Jury conditions for 1 + a1 z^-1 + a2 z^-2.
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

void Biquad::process(std::vector<double>& x) const {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (double& s : x) {
        const double y = b0 * s + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = s;
        y2 = y1;
        y1 = y;
        s = y;
    }
}

Biquad low_shelf(double corner_hz, double gain_db, int sample_rate) {
    const double k = std::tan(std::numbers::pi * corner_hz / sample_rate);
    const double g = std::pow(10.0, gain_db / 20.0);
    const double a0 = 1.0 + k;
    return {(1.0 + g * k) / a0, (g * k - 1.0) / a0, 0.0, (k - 1.0) / a0, 0.0};
}

Biquad high_shelf(double corner_hz, double gain_db, int sample_rate) {
    const double k = std::tan(std::numbers::pi * corner_hz / sample_rate);
    const double g = std::pow(10.0, gain_db / 20.0);
    const double a0 = 1.0 + k;
    return {(g + k) / a0, (k - g) / a0, 0.0, (k - 1.0) / a0, 0.0};
}

Biquad peaking(double center_hz, double q, double gain_db, int sample_rate) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * std::numbers::pi * center_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha / a;
    return {(1.0 + alpha * a) / a0, -2.0 * c / a0, (1.0 - alpha * a) / a0, -2.0 * c / a0, (1.0 - alpha / a) / a0};
}

std::array<Biquad, 4> tone_stack(const nn::KnobVector& g, const SynthAmpConfig& cfg) {
    const auto& v = g.values;
    return {low_shelf(cfg.bass.corner_hz, knob_db(v[Bass], cfg.bass.db_min, cfg.bass.db_max), cfg.sample_rate),
            peaking(cfg.mid.center_hz, cfg.mid.q, knob_db(v[Mid], cfg.mid.db_min, cfg.mid.db_max), cfg.sample_rate),
            high_shelf(cfg.treble.corner_hz, knob_db(v[Treble], cfg.treble.db_min, cfg.treble.db_max),
                       cfg.sample_rate),
            high_shelf(cfg.presence.corner_hz, knob_db(v[Presence], cfg.presence.db_min, cfg.presence.db_max),
                       cfg.sample_rate)};
}

double output_ceiling(const SynthAmpConfig& cfg) { return cfg.master_level_max; }

dsp::AudioSignal synth_amp_process(const dsp::AudioSignal& x, const nn::KnobVector& g, const SynthAmpConfig& cfg) {
    if (x.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("synth_amp_process: signal sample rate " + std::to_string(x.sample_rate) +
                                    " Hz does not match amp sample rate " + std::to_string(cfg.sample_rate) + " Hz");
    if (g.size() != KnobCount)
        throw std::invalid_argument("synth_amp_process: expected " + std::to_string(KnobCount) + " knobs, got " +
                                    std::to_string(g.size()));
    g.validate();
    const auto& v = g.values;

    const double drive = cfg.drive_min * std::pow(cfg.drive_max / cfg.drive_min, v[Gain]);
    const double b = cfg.shaper_bias;
    const double tb = std::tanh(b);
    dsp::AudioSignal y{std::vector<double>(x.samples.size()), x.sample_rate};
    for (std::size_t i = 0; i < y.samples.size(); ++i) y.samples[i] = std::tanh(drive * x.samples[i] + b) - tb;

    for (const Biquad& f : tone_stack(g, cfg)) f.process(y.samples);

    const double md = cfg.master_drive_min + (cfg.master_drive_max - cfg.master_drive_min) * v[Master];
    const double ml = cfg.master_level_min + (cfg.master_level_max - cfg.master_level_min) * v[Master];
    for (double& s : y.samples) s = ml * std::tanh(md * s);
    return y;
}

std::uint32_t signal_checksum(const std::vector<double>& samples) {
    std::vector<unsigned char> bytes(samples.size() * 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const float f = static_cast<float>(samples[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(u >> (8 * b));
    }
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in bounded blocks.
    for (std::size_t off = 0; off < bytes.size(); off += 1u << 30) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

void RequestManifest::validate() const {
    if (checksum_algorithm != "crc32")
        throw std::invalid_argument("manifest: unsupported checksum algorithm '" + checksum_algorithm + "'");
    std::set<int> ids;
    for (const auto& r : requests) {
        if (!ids.insert(r.id).second) throw std::invalid_argument("manifest: duplicate request id " + std::to_string(r.id));
        r.g.validate();
    }
}

std::string request_filename(int round, int id) {
    return "round" + std::to_string(round) + "_req" + std::to_string(id) + ".wav";
}

std::filesystem::path manifest_path(const std::filesystem::path& dir, int round) {
    return dir / ("round" + std::to_string(round) + "_manifest.json");
}

RequestManifest export_request_manifest(const std::vector<nn::KnobVector>& G, int round, const dsp::AudioSignal& x,
                                        const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create request directory " + dir.string() + ": " + ec.message());
    RequestManifest m;
    m.round = round;
    m.checksum = signal_checksum(x.samples);
    m.sample_rate = x.sample_rate;
    m.length = x.samples.size();
    for (std::size_t i = 0; i < G.size(); ++i) {
        const int id = static_cast<int>(i);
        m.requests.push_back({id, G[i], request_filename(round, id)});
    }
    m.validate();
    dsp::write_wav(dir / m.input_file, x, dsp::WavEncoding::Float32);
    write_manifest(m, manifest_path(dir, round));
    return m;
}

RequestManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open manifest " + path.string());
    RequestManifest m = nlohmann::json::parse(f).get<RequestManifest>();
    m.validate();
    return m;
}

void write_manifest(const RequestManifest& m, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write manifest " + path.string());
    f << nlohmann::json(m).dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest " + path.string());
}

IngestError::IngestError(std::vector<std::string> errors)
    : std::runtime_error([&] {
          std::string msg = "ingest failed:";
          for (const auto& e : errors) msg += "\n  " + e;
          return msg;
      }()),
      errors_(std::move(errors)) {}

std::vector<Recording> ingest_recordings(const RequestManifest& manifest, const std::filesystem::path& dir,
                                         const dsp::AudioSignal& x) {
    manifest.validate();
    std::vector<std::string> errors;
    if (signal_checksum(x.samples) != manifest.checksum)
        throw IngestError({"input signal checksum mismatch: manifest has " + hex32(manifest.checksum) +
                           ", signal has " + hex32(signal_checksum(x.samples))});
    const auto tolerance = static_cast<std::size_t>(0.5 * x.sample_rate);
    std::vector<Recording> out;
    for (const Request& r : manifest.requests) {
        const auto path = dir / r.file;
        if (!std::filesystem::exists(path)) {
            errors.push_back("request " + std::to_string(r.id) + ": missing file " + r.file);
            continue;
        }
        dsp::AudioSignal y;
        try {
            y = dsp::read_wav(path);
        } catch (const std::exception& e) {
            errors.push_back("request " + std::to_string(r.id) + ": " + r.file + ": " + e.what());
            continue;
        }
        if (y.sample_rate != x.sample_rate) {
            errors.push_back("request " + std::to_string(r.id) + ": " + r.file + " has sample rate " +
                             std::to_string(y.sample_rate) + " Hz, expected " + std::to_string(x.sample_rate) + " Hz");
            continue;
        }
        const std::size_t n = y.samples.size(), want = x.samples.size();
        if ((n > want ? n - want : want - n) > tolerance) {
            errors.push_back("request " + std::to_string(r.id) + ": " + r.file + " has " + std::to_string(n) +
                             " samples, expected " + std::to_string(want) + " (tolerance 0.5 s)");
            continue;
        }
        y.samples.resize(want, 0.0);
        out.push_back({r.id, r.g, std::move(y)});
    }
    if (!errors.empty()) throw IngestError(std::move(errors));
    return out;
}

void to_json(nlohmann::json& j, const SynthAmpConfig& c) {
    auto shelf = [](const ShelfBand& s) {
        return nlohmann::json{{"type", "shelf"}, {"corner_hz", s.corner_hz}, {"db_min", s.db_min}, {"db_max", s.db_max}};
    };
    j = {{"version", c.version},
         {"sample_rate", c.sample_rate},
         {"drive_range", {c.drive_min, c.drive_max}},
         {"shaper", {{"kind", "asymmetric_tanh"}, {"bias", c.shaper_bias}}},
         {"bass", shelf(c.bass)},
         {"mid",
          {{"type", "peaking"}, {"center_hz", c.mid.center_hz}, {"q", c.mid.q}, {"db_min", c.mid.db_min},
           {"db_max", c.mid.db_max}}},
         {"treble", shelf(c.treble)},
         {"presence", shelf(c.presence)},
         {"master",
          {{"drive_range", {c.master_drive_min, c.master_drive_max}},
           {"level_range", {c.master_level_min, c.master_level_max}}}}};
    j["bass"]["type"] = "low_shelf";
    j["treble"]["type"] = "high_shelf";
    j["presence"]["type"] = "high_shelf";
}

void from_json(const nlohmann::json& j, SynthAmpConfig& c) {
    c = SynthAmpConfig{};
    c.version = j.value("version", c.version);
    if (c.version != 1) throw std::invalid_argument("SynthAmpConfig: unsupported version " + std::to_string(c.version));
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    if (j.contains("drive_range")) {
        c.drive_min = j["drive_range"].at(0).get<double>();
        c.drive_max = j["drive_range"].at(1).get<double>();
    }
    if (j.contains("shaper")) {
        const auto kind = j["shaper"].value("kind", std::string("asymmetric_tanh"));
        if (kind != "asymmetric_tanh") throw std::invalid_argument("SynthAmpConfig: unknown shaper '" + kind + "'");
        c.shaper_bias = j["shaper"].value("bias", c.shaper_bias);
    }
    auto shelf = [&](const char* key, ShelfBand& s) {
        if (!j.contains(key)) return;
        s.corner_hz = j[key].value("corner_hz", s.corner_hz);
        s.db_min = j[key].value("db_min", s.db_min);
        s.db_max = j[key].value("db_max", s.db_max);
    };
    shelf("bass", c.bass);
    shelf("treble", c.treble);
    shelf("presence", c.presence);
    if (j.contains("mid")) {
        c.mid.center_hz = j["mid"].value("center_hz", c.mid.center_hz);
        c.mid.q = j["mid"].value("q", c.mid.q);
        c.mid.db_min = j["mid"].value("db_min", c.mid.db_min);
        c.mid.db_max = j["mid"].value("db_max", c.mid.db_max);
    }
    if (j.contains("master")) {
        const auto& m = j["master"];
        if (m.contains("drive_range")) {
            c.master_drive_min = m["drive_range"].at(0).get<double>();
            c.master_drive_max = m["drive_range"].at(1).get<double>();
        }
        if (m.contains("level_range")) {
            c.master_level_min = m["level_range"].at(0).get<double>();
            c.master_level_max = m["level_range"].at(1).get<double>();
        }
    }
}

void to_json(nlohmann::json& j, const RequestManifest& m) {
    nlohmann::json reqs = nlohmann::json::array();
    for (const auto& r : m.requests) reqs.push_back({{"id", r.id}, {"g", r.g}, {"file", r.file}});
    j = {{"version", m.version},
         {"round", m.round},
         {"checksum_algorithm", m.checksum_algorithm},
         {"checksum", hex32(m.checksum)},
         {"sample_rate", m.sample_rate},
         {"length", m.length},
         {"input_file", m.input_file},
         {"requests", reqs}};
}

void from_json(const nlohmann::json& j, RequestManifest& m) {
    m = RequestManifest{};
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw std::invalid_argument("manifest: unsupported version " + std::to_string(m.version));
    m.round = j.at("round").get<int>();
    m.checksum_algorithm = j.at("checksum_algorithm").get<std::string>();
    m.checksum = static_cast<std::uint32_t>(std::stoul(j.at("checksum").get<std::string>(), nullptr, 16));
    m.sample_rate = j.at("sample_rate").get<int>();
    m.length = j.at("length").get<std::size_t>();
    m.input_file = j.value("input_file", m.input_file);
    for (const auto& r : j.at("requests")) m.requests.push_back({r.at("id").get<int>(), r.at("g").get<nn::KnobVector>(), r.at("file").get<std::string>()});
}

}  // namespace panama::amp
