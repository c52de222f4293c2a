#include "panama/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace panama::dsp {

void AudioSignal::validate() const {
    if (samples.empty()) throw std::invalid_argument("audio signal is empty");
    if (sample_rate <= 0) throw std::invalid_argument("audio signal has non-positive sample rate");
    for (double s : samples) {
        if (!std::isfinite(s)) throw std::invalid_argument("audio signal contains non-finite samples");
    }
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

[[noreturn]] void wav_error(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("read_wav: " + path.string() + ": " + what);
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) wav_error(path, "cannot open file");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        wav_error(path, "not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        const std::uint32_t size = le32(hdr + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (size < 16 || body + size > bytes.size()) wav_error(path, "truncated fmt chunk");
            format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            if (format == kFormatExtensible) {
                if (size < 26) wav_error(path, "truncated extensible fmt chunk");
                format = le16(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            if (body + size > bytes.size()) wav_error(path, "truncated file (data chunk declares " +
                                                                std::to_string(size) + " bytes, " +
                                                                std::to_string(bytes.size() - body) + " present)");
            data = bytes.data() + body;
            data_size = size;
            break;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) wav_error(path, "missing fmt chunk");
    if (!data) wav_error(path, "missing data chunk");
    if (channels != 1) wav_error(path, "channels=" + std::to_string(channels) + " unsupported");

    AudioSignal sig;
    sig.sample_rate = static_cast<int>(rate);
    if (format == kFormatPcm && bits == 16) {
        if (data_size % 2) wav_error(path, "truncated sample data");
        sig.samples.resize(data_size / 2);
        for (std::size_t i = 0; i < sig.samples.size(); ++i) {
            const auto v = static_cast<std::int16_t>(le16(data + 2 * i));
            sig.samples[i] = static_cast<double>(v) / 32768.0;
        }
    } else if (format == kFormatFloat && bits == 32) {
        if (data_size % 4) wav_error(path, "truncated sample data");
        sig.samples.resize(data_size / 4);
        for (std::size_t i = 0; i < sig.samples.size(); ++i)
            sig.samples[i] = static_cast<double>(std::bit_cast<float>(le32(data + 4 * i)));
    } else {
        wav_error(path, "unsupported codec (format tag " + std::to_string(format) + ", " + std::to_string(bits) +
                            " bits)");
    }
    return sig;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal, WavEncoding encoding) {
    const bool pcm = encoding == WavEncoding::Pcm16;
    const std::uint16_t bits = pcm ? 16 : 32;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(signal.samples.size() * (bits / 8));

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put32(out, 16);
    put16(out, pcm ? kFormatPcm : kFormatFloat);
    put16(out, 1);
    put32(out, static_cast<std::uint32_t>(signal.sample_rate));
    put32(out, static_cast<std::uint32_t>(signal.sample_rate) * (bits / 8));
    put16(out, bits / 8);
    put16(out, bits);
    out += "data";
    put32(out, data_bytes);
    for (double s : signal.samples) {
        if (pcm) {
            const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
            put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
        } else {
            put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_wav: cannot open " + path.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_wav: failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Mel configuration

std::size_t MelConfig::frames(std::size_t length) const {
    if (length < static_cast<std::size_t>(n_fft)) return 0;
    return 1 + (length - static_cast<std::size_t>(n_fft)) / static_cast<std::size_t>(hop);
}

void MelConfig::validate() const {
    if (n_fft < 2) throw std::invalid_argument("MelConfig: n_fft must be >= 2");
    if (hop < 1 || hop > n_fft) throw std::invalid_argument("MelConfig: hop must lie in [1, n_fft]");
    if (n_mels < 1) throw std::invalid_argument("MelConfig: n_mels must be >= 1");
    if (sample_rate <= 0) throw std::invalid_argument("MelConfig: sample_rate must be positive");
    if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0))
        throw std::invalid_argument("MelConfig: need 0 <= f_min < f_max <= sample_rate/2");
    if (!(log_floor > 0.0)) throw std::invalid_argument("MelConfig: log_floor must be positive");
}

std::vector<MelConfig> multiscale_configs(int sample_rate, double log_floor) {
    std::vector<MelConfig> out;
    int mels = 5;
    for (int win = 32; win <= 2048; win *= 2, mels *= 2) {
        MelConfig c;
        c.n_fft = win;
        c.hop = win / 4;
        c.n_mels = mels;
        c.f_min = 0.0;
        c.f_max = sample_rate / 2.0;
        c.log_floor = log_floor;
        c.sample_rate = sample_rate;
        out.push_back(c);
    }
    return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const ad::Array& mel_filterbank(const MelConfig& cfg) {
    cfg.validate();
    using Key = std::tuple<int, int, double, double, int>;
    static std::mutex mu;
    static std::map<Key, ad::Array> cache;
    const Key key{cfg.n_fft, cfg.n_mels, cfg.f_min, cfg.f_max, cfg.sample_rate};
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const int bins = cfg.bins();
    ad::Array fb(ad::Shape{static_cast<std::size_t>(cfg.n_mels), static_cast<std::size_t>(bins)});
    const double lo = hz_to_mel(cfg.f_min), hi = hz_to_mel(cfg.f_max);
    std::vector<double> edges(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
        double row = 0.0;
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
            const double w = std::max(0.0, std::min((f - left) / (center - left), (right - f) / (right - center)));
            fb.at(m, k) = w;
            row += w;
        }
        if (!(row > 0.0)) {
            throw std::invalid_argument("mel filterbank row " + std::to_string(m) + " is empty (n_fft=" +
                                        std::to_string(cfg.n_fft) + " too small for n_mels=" +
                                        std::to_string(cfg.n_mels) + ")");
        }
    }
    return cache.emplace(key, std::move(fb)).first->second;
}

const std::vector<double>& hann_window(int n) {
    static std::mutex mu;
    static std::map<int, std::vector<double>> cache;
    std::lock_guard lock(mu);
    auto [it, inserted] = cache.try_emplace(n);
    if (inserted) {
        it->second.resize(n);
        for (int i = 0; i < n; ++i) it->second[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// FFT-backed power spectrogram

namespace {

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

struct FftPlans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

// Plans are created under a lock; executing them with fresh fftw_malloc'd
// buffers is thread-safe.
const FftPlans& plans_for(int n) {
    static std::mutex mu;
    static std::map<int, FftPlans> cache;
    std::lock_guard lock(mu);
    auto [it, inserted] = cache.try_emplace(n);
    if (inserted) {
        std::unique_ptr<double, FftwDeleter> real(fftw_alloc_real(n));
        std::unique_ptr<fftw_complex, FftwDeleter> spec(fftw_alloc_complex(n / 2 + 1));
        it->second.r2c = fftw_plan_dft_r2c_1d(n, real.get(), spec.get(), FFTW_ESTIMATE);
        it->second.c2r = fftw_plan_dft_c2r_1d(n, spec.get(), real.get(), FFTW_ESTIMATE);
    }
    return it->second;
}

}  // namespace

ad::Var power_spectrogram(ad::Var signal, int n_fft, int hop) {
    const std::size_t length = signal.size();
    if (signal.value().rank() > 2 || (signal.value().rank() == 2 && signal.shape()[0] != 1))
        throw std::invalid_argument("power_spectrogram: expected a mono signal, got " +
                                    ad::shape_string(signal.shape()));
    if (n_fft < 2 || hop < 1) throw std::invalid_argument("power_spectrogram: invalid n_fft/hop");
    if (length < static_cast<std::size_t>(n_fft)) {
        throw std::invalid_argument("power_spectrogram: signal length " + std::to_string(length) +
                                    " shorter than n_fft " + std::to_string(n_fft));
    }
    const std::size_t n = static_cast<std::size_t>(n_fft);
    const std::size_t bins = n / 2 + 1;
    const std::size_t frames = 1 + (length - n) / static_cast<std::size_t>(hop);
    const auto& window = hann_window(n_fft);
    const FftPlans& plans = plans_for(n_fft);
    const bool keep = signal.requires_grad();

    std::unique_ptr<double, FftwDeleter> buf(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwDeleter> spec(fftw_alloc_complex(bins));
    auto cached = std::make_shared<std::vector<double>>();
    if (keep) cached->resize(frames * bins * 2);

    ad::Array out(ad::Shape{bins, frames});
    const double* s = signal.value().data.data();
    for (std::size_t f = 0; f < frames; ++f) {
        const double* frame = s + f * hop;
        for (std::size_t i = 0; i < n; ++i) buf.get()[i] = window[i] * frame[i];
        fftw_execute_dft_r2c(plans.r2c, buf.get(), spec.get());
        for (std::size_t k = 0; k < bins; ++k) {
            const double re = spec.get()[k][0], im = spec.get()[k][1];
            out.data[k * frames + f] = re * re + im * im;
            if (keep) {
                (*cached)[(f * bins + k) * 2] = re;
                (*cached)[(f * bins + k) * 2 + 1] = im;
            }
        }
    }
    if (!keep) return signal.graph().constant(std::move(out));

    const auto si = signal.id();
    return signal.graph().record(std::move(out), {signal}, [si, n, bins, frames, hop, cached](ad::Graph& g, std::uint32_t self) {
        // dP_k/du_n = 2 Re(X_k e^{+i 2 pi k n / N}); summing over k is a
        // half-spectrum inverse transform.
        const auto& gp = g.grad(self);
        auto& gs = g.grad_acc(si);
        const auto& win = hann_window(static_cast<int>(n));
        const FftPlans& pl = plans_for(static_cast<int>(n));
        std::unique_ptr<double, FftwDeleter> res(fftw_alloc_real(n));
        std::unique_ptr<fftw_complex, FftwDeleter> z(fftw_alloc_complex(bins));
        for (std::size_t f = 0; f < frames; ++f) {
            for (std::size_t k = 0; k < bins; ++k) {
                const double w = 2.0 * gp[k * frames + f];
                const double half = (k == 0 || 2 * k == n) ? 1.0 : 0.5;
                z.get()[k][0] = half * w * (*cached)[(f * bins + k) * 2];
                z.get()[k][1] = half * w * (*cached)[(f * bins + k) * 2 + 1];
            }
            z.get()[0][1] = 0.0;
            if (n % 2 == 0) z.get()[bins - 1][1] = 0.0;
            fftw_execute_dft_c2r(pl.c2r, z.get(), res.get());
            for (std::size_t i = 0; i < n; ++i) gs[f * hop + i] += win[i] * res.get()[i];
        }
    });
}

ad::Var mel_spectrogram(ad::Var signal, const MelConfig& cfg) {
    cfg.validate();
    if (signal.size() < static_cast<std::size_t>(cfg.n_fft)) {
        throw std::invalid_argument("mel_spectrogram: signal length " + std::to_string(signal.size()) +
                                    " shorter than n_fft " + std::to_string(cfg.n_fft));
    }
    auto& g = signal.graph();
    ad::Var power = power_spectrogram(signal, cfg.n_fft, cfg.hop);
    ad::Var fb = g.constant(mel_filterbank(cfg));
    return ad::log(ad::add_scalar(ad::matmul(fb, power), cfg.log_floor));
}

ad::Var multiscale_mel_loss(ad::Var a, ad::Var b, const std::vector<MelConfig>& scales) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("multiscale_mel_loss: length mismatch " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    if (scales.empty()) throw std::invalid_argument("multiscale_mel_loss: no scales");
    ad::Var total;
    for (const MelConfig& cfg : scales) {
        ad::Var term = ad::mean(ad::abs(mel_spectrogram(a, cfg) - mel_spectrogram(b, cfg)));
        total = total.valid() ? total + term : term;
    }
    return ad::scale(total, 1.0 / static_cast<double>(scales.size()));
}

double multiscale_mel_distance(const std::vector<double>& a, const std::vector<double>& b,
                               const std::vector<MelConfig>& scales) {
    ad::Graph g;
    ad::Var va = g.constant(ad::Array::vector(a));
    ad::Var vb = g.constant(ad::Array::vector(b));
    return multiscale_mel_loss(va, vb, scales).item();
}

void to_json(nlohmann::json& j, const MelConfig& c) {
    j = {{"n_fft", c.n_fft},   {"hop", c.hop},       {"n_mels", c.n_mels},           {"f_min", c.f_min},
         {"f_max", c.f_max},   {"log_floor", c.log_floor}, {"sample_rate", c.sample_rate}};
}

void from_json(const nlohmann::json& j, MelConfig& c) {
    c = MelConfig{};
    c.n_fft = j.value("n_fft", c.n_fft);
    c.hop = j.value("hop", c.hop);
    c.n_mels = j.value("n_mels", c.n_mels);
    c.f_min = j.value("f_min", c.f_min);
    c.f_max = j.value("f_max", c.f_max);
    c.log_floor = j.value("log_floor", c.log_floor);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
}

}  // namespace panama::dsp
