#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "panama/amp.hpp"

using namespace panama;
namespace fs = std::filesystem;

namespace {

std::complex<double> response(const amp::Biquad& f, double hz, int sr) {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * hz / sr);
    return (f.b0 + f.b1 * z1 + f.b2 * z1 * z1) / (1.0 + f.a1 * z1 + f.a2 * z1 * z1);
}

double db(double linear) { return 20.0 * std::log10(linear); }

nn::KnobVector knobs(std::vector<double> v) { return nn::KnobVector::with_default_labels(std::move(v)); }

dsp::AudioSignal noise_probe(std::size_t n, std::uint64_t seed, double scale = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    dsp::AudioSignal s{std::vector<double>(n), 16000};
    for (double& v : s.samples) v = d(rng);
    return s;
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

// Total power in [lo, hi] Hz, averaged over 1024-point frames.
double band_energy(const std::vector<double>& y, double lo, double hi) {
    ad::Graph g;
    const auto p = dsp::power_spectrogram(g.constant(ad::Array::vector(y)), 1024, 512).value();
    double e = 0.0;
    for (std::size_t k = 0; k < p.dim(0); ++k) {
        const double f = k * 16000.0 / 1024.0;
        if (f < lo || f > hi) continue;
        for (std::size_t t = 0; t < p.dim(1); ++t) e += p.at(k, t);
    }
    return e;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "panama_test_amp" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST(Filters, LowShelfGains) {
    for (double gain : {-12.0, 0.0, 6.0, 12.0}) {
        const auto f = amp::low_shelf(100.0, gain, 16000);
        EXPECT_NEAR(db(std::abs(response(f, 0.0, 16000))), gain, 1e-9);
        EXPECT_NEAR(db(std::abs(response(f, 8000.0, 16000))), 0.0, 1e-9);
    }
}

TEST(Filters, HighShelfGains) {
    for (double gain : {-15.0, 0.0, 9.0}) {
        const auto f = amp::high_shelf(3000.0, gain, 16000);
        EXPECT_NEAR(db(std::abs(response(f, 0.0, 16000))), 0.0, 1e-9);
        EXPECT_NEAR(db(std::abs(response(f, 8000.0, 16000))), gain, 1e-9);
    }
}

TEST(Filters, PeakingGainAtCentre) {
    for (double gain : {-12.0, 0.0, 12.0}) {
        const auto f = amp::peaking(800.0, 0.7, gain, 16000);
        EXPECT_NEAR(db(std::abs(response(f, 800.0, 16000))), gain, 1e-9);
        EXPECT_NEAR(db(std::abs(response(f, 0.0, 16000))), 0.0, 1e-9);
        EXPECT_NEAR(db(std::abs(response(f, 8000.0, 16000))), 0.0, 1e-9);
    }
}

TEST(Filters, StableOverTheKnobCube) {
    const auto cfg = amp::default_synth_amp();
    std::vector<std::vector<double>> settings;
    for (int corner = 0; corner < 64; ++corner) {
        std::vector<double> v(6);
        for (int i = 0; i < 6; ++i) v[i] = (corner >> i) & 1;
        settings.push_back(v);
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) settings.push_back({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
    for (const auto& v : settings)
        for (const auto& f : amp::tone_stack(knobs(v), cfg)) EXPECT_TRUE(f.stable());
}

TEST(Filters, UnstableBiquadDetected) {
    EXPECT_FALSE((amp::Biquad{1.0, 0.0, 0.0, 0.0, 1.2}.stable()));
    EXPECT_FALSE((amp::Biquad{1.0, 0.0, 0.0, -2.1, 1.0}.stable()));
    EXPECT_TRUE((amp::Biquad{1.0, 0.0, 0.0, -0.5, 0.0}.stable()));
}

TEST(SynthAmp, ZeroInputGivesZeroOutput) {
    const auto cfg = amp::default_synth_amp();
    const dsp::AudioSignal zero{std::vector<double>(512, 0.0), 16000};
    for (const auto& v : {std::vector<double>(6, 0.0), std::vector<double>(6, 1.0), {0.3, 0.9, 0.1, 0.5, 0.7, 0.2}})
        for (double s : amp::synth_amp_process(zero, knobs(v), cfg).samples) EXPECT_EQ(s, 0.0);
}

TEST(SynthAmp, Deterministic) {
    const auto cfg = amp::default_synth_amp();
    const auto x = noise_probe(2048, 2);
    const auto g = knobs({0.3, 0.9, 0.1, 0.5, 0.7, 0.2});
    EXPECT_EQ(amp::synth_amp_process(x, g, cfg).samples, amp::synth_amp_process(x, g, cfg).samples);
}

TEST(SynthAmp, OutputBoundedByCeiling) {
    const auto cfg = amp::default_synth_amp();
    const auto x = noise_probe(4096, 3, 2.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const auto y = amp::synth_amp_process(x, knobs({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)}), cfg);
        EXPECT_EQ(y.size(), x.size());
        for (double s : y.samples) EXPECT_LE(std::abs(s), amp::output_ceiling(cfg));
    }
    EXPECT_LE(amp::output_ceiling(cfg), 1.0);
}

TEST(SynthAmp, MasterSweepRmsNondecreasing) {
    const auto cfg = amp::default_synth_amp();
    const auto x = noise_probe(8000, 5);
    double prev = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double r = rms(amp::synth_amp_process(x, knobs({0.5, 0.5, 0.5, 0.5, i / 10.0, 0.5}), cfg).samples);
        EXPECT_GE(r, prev) << "master " << i / 10.0;
        prev = r;
    }
}

TEST(SynthAmp, BassAndTrebleAreLive) {
    const auto cfg = amp::default_synth_amp();
    const auto x = noise_probe(16384, 6, 0.05);
    auto change = [&](amp::Knob knob, double lo, double hi) {
        std::vector<double> a(6, 0.5), b(6, 0.5);
        a[knob] = 0.0;
        b[knob] = 1.0;
        const auto ya = amp::synth_amp_process(x, knobs(a), cfg).samples;
        const auto yb = amp::synth_amp_process(x, knobs(b), cfg).samples;
        return std::abs(std::log(band_energy(yb, lo, hi) / band_energy(ya, lo, hi)));
    };
    EXPECT_GT(change(amp::Bass, 0.0, 200.0), change(amp::Bass, 4000.0, 8000.0));
    EXPECT_GT(change(amp::Treble, 4000.0, 8000.0), change(amp::Treble, 0.0, 200.0));
}

TEST(SynthAmp, Rejections) {
    const auto cfg = amp::default_synth_amp();
    try {
        amp::synth_amp_process({{0.1, 0.2}, 44100}, knobs(std::vector<double>(6, 0.5)), cfg);
        FAIL() << "expected a sample-rate error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("44100"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("16000"), std::string::npos);
    }
    EXPECT_THROW(amp::synth_amp_process({{0.1}, 16000}, knobs({0.5, 0.5}), cfg), std::invalid_argument);
    EXPECT_THROW(amp::synth_amp_process({{0.1}, 16000}, knobs({0.5, 0.5, 0.5, 0.5, 0.5, 1.5}), cfg),
                 std::invalid_argument);
}

TEST(SynthAmpConfigTest, ShippedConfigMatchesDefault) {
    const auto shipped = amp::load_synth_amp(fs::path(PANAMA_SOURCE_DIR) / "configs" / "synth_amp_v1.json");
    EXPECT_EQ(nlohmann::json(shipped), nlohmann::json(amp::default_synth_amp()));
}

TEST(SynthAmpConfigTest, JsonRoundTripAndValidation) {
    auto c = amp::default_synth_amp();
    c.mid.q = 1.3;
    const nlohmann::json j = c;
    EXPECT_EQ(nlohmann::json(j.get<amp::SynthAmpConfig>()), j);
    c.treble.corner_hz = 9000.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    auto bad = j;
    bad["version"] = 2;
    EXPECT_THROW(bad.get<amp::SynthAmpConfig>(), std::invalid_argument);
}

TEST(Checksum, Crc32OfFloat32LittleEndian) {
    // zlib.crc32(struct.pack('<3f', 0.5, -0.25, 1.0))
    EXPECT_EQ(amp::signal_checksum({0.5, -0.25, 1.0}), 0xb6ffdeb7u);
}

TEST(Manifest, ExportRoundTrip) {
    const auto dir = fresh_dir("export");
    const auto x = noise_probe(1600, 7);
    const std::vector<nn::KnobVector> G = {knobs({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}), knobs({1, 0, 1, 0, 1, 0})};
    const auto m = amp::export_request_manifest(G, 3, x, dir);
    EXPECT_EQ(m.round, 3);
    EXPECT_EQ(m.length, 1600u);
    EXPECT_EQ(m.checksum, amp::signal_checksum(x.samples));
    ASSERT_EQ(m.requests.size(), 2u);
    EXPECT_EQ(m.requests[1].file, amp::request_filename(3, 1));
    EXPECT_EQ(amp::read_manifest(amp::manifest_path(dir, 3)), m);
    EXPECT_TRUE(fs::exists(dir / m.input_file));
}

TEST(Manifest, EmptyRequestListIsValid) {
    const auto dir = fresh_dir("empty");
    const auto m = amp::export_request_manifest({}, 1, noise_probe(100, 8), dir);
    EXPECT_TRUE(m.requests.empty());
    EXPECT_EQ(amp::read_manifest(amp::manifest_path(dir, 1)), m);
}

TEST(Manifest, DuplicateIdsRejected) {
    amp::RequestManifest m;
    m.requests = {{0, knobs({0.5}), "a.wav"}, {0, knobs({0.2}), "b.wav"}};
    EXPECT_THROW(m.validate(), std::invalid_argument);
}

class Ingest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fresh_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
        x = noise_probe(16000, 9);
        manifest = amp::export_request_manifest({knobs(std::vector<double>(6, 0.2)), knobs(std::vector<double>(6, 0.8))},
                                                1, x, dir);
    }

    void record(int id, std::size_t length, int rate = 16000) {
        dsp::write_wav(dir / amp::request_filename(1, id), {std::vector<double>(length, 0.1 * (id + 1)), rate});
    }

    std::vector<std::string> ingest_errors() {
        try {
            amp::ingest_recordings(manifest, dir, x);
        } catch (const amp::IngestError& e) {
            return e.errors();
        }
        return {};
    }

    fs::path dir;
    dsp::AudioSignal x;
    amp::RequestManifest manifest;
};

TEST_F(Ingest, CompleteDirectory) {
    record(0, 16000);
    record(1, 16000);
    const auto recs = amp::ingest_recordings(manifest, dir, x);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[1].g, manifest.requests[1].g);
    EXPECT_NEAR(recs[1].y.samples[5], 0.2, 1e-7);
}

TEST_F(Ingest, TrimsAndPadsWithinTolerance) {
    record(0, 16000 + 7000);
    record(1, 16000 - 7000);
    const auto recs = amp::ingest_recordings(manifest, dir, x);
    EXPECT_EQ(recs[0].y.size(), 16000u);
    EXPECT_EQ(recs[1].y.size(), 16000u);
    EXPECT_EQ(recs[1].y.samples.back(), 0.0);
}

TEST_F(Ingest, MissingFileNamed) {
    record(0, 16000);
    const auto errs = ingest_errors();
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_NE(errs[0].find("missing file " + amp::request_filename(1, 1)), std::string::npos) << errs[0];
}

TEST_F(Ingest, WrongRateReportsBothRates) {
    record(0, 16000);
    record(1, 44100, 44100);
    const auto errs = ingest_errors();
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_NE(errs[0].find("44100"), std::string::npos) << errs[0];
    EXPECT_NE(errs[0].find("16000"), std::string::npos) << errs[0];
}

TEST_F(Ingest, LengthOutsideToleranceAndAllErrorsCollected) {
    record(0, 16000 + 9000);
    const auto errs = ingest_errors();
    EXPECT_EQ(errs.size(), 2u);
}

TEST_F(Ingest, ChecksumMismatch) {
    record(0, 16000);
    record(1, 16000);
    auto other = x;
    other.samples[0] += 0.5;
    try {
        amp::ingest_recordings(manifest, dir, other);
        FAIL() << "expected a checksum error";
    } catch (const amp::IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("checksum mismatch"), std::string::npos) << e.what();
    }
}
