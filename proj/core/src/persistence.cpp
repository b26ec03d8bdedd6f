#include "ampal/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace ampal {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

void read_bytes(std::istream& is, void* p, size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n) {
        fail(std::string("truncated file while reading ") + what);
    }
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    T v;
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

constexpr uint16_t kWavPcm = 1;
constexpr uint16_t kWavFloat = 3;

}  // namespace

AudioSignal read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open WAV file: " + path);

    char tag[5] = {};
    read_bytes(is, tag, 4, "RIFF tag");
    if (std::strncmp(tag, "RIFF", 4) != 0) fail("not a RIFF file: " + path);
    (void)read_le<uint32_t>(is, "RIFF size");
    read_bytes(is, tag, 4, "WAVE tag");
    if (std::strncmp(tag, "WAVE", 4) != 0) fail("not a WAVE file: " + path);

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    std::vector<char> payload;

    while (is.peek() != EOF) {
        read_bytes(is, tag, 4, "chunk id");
        const auto size = read_le<uint32_t>(is, "chunk size");
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            if (size < 16) fail("malformed fmt chunk in " + path);
            format = read_le<uint16_t>(is, "audio format");
            channels = read_le<uint16_t>(is, "channel count");
            sample_rate = read_le<uint32_t>(is, "sample rate");
            (void)read_le<uint32_t>(is, "byte rate");
            (void)read_le<uint16_t>(is, "block align");
            bits = read_le<uint16_t>(is, "bits per sample");
            is.seekg(size - 16 + (size % 2), std::ios::cur);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            payload.resize(size);
            read_bytes(is, payload.data(), size, "sample data");
            if (size % 2) is.seekg(1, std::ios::cur);
            break;
        } else {
            is.seekg(size + (size % 2), std::ios::cur);
            if (!is) fail("truncated file while skipping chunk in " + path);
        }
    }

    if (!have_fmt) fail("WAV file has no fmt chunk: " + path);
    if (payload.empty()) fail("WAV file has no data chunk: " + path);
    if (channels != 1) {
        fail("unsupported channel count " + std::to_string(channels) + " (mono only): " + path);
    }

    AudioSignal sig;
    sig.sample_rate = static_cast<int>(sample_rate);
    if (format == kWavPcm && bits == 16) {
        const size_t n = payload.size() / 2;
        sig.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
            int16_t v;
            std::memcpy(&v, payload.data() + 2 * i, 2);
            sig.samples[i] = static_cast<real>(v) / real(32767);
        }
    } else if (format == kWavFloat && bits == 32) {
        const size_t n = payload.size() / 4;
        sig.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
            float v;
            std::memcpy(&v, payload.data() + 4 * i, 4);
            sig.samples[i] = static_cast<real>(v);
        }
    } else if (format == kWavFloat && bits == 64) {
        const size_t n = payload.size() / 8;
        sig.samples.resize(n);
        for (size_t i = 0; i < n; ++i) {
            double v;
            std::memcpy(&v, payload.data() + 8 * i, 8);
            sig.samples[i] = static_cast<real>(v);
        }
    } else {
        fail("unsupported WAV encoding (format " + std::to_string(format) + ", " +
             std::to_string(bits) + " bits): " + path);
    }
    return sig;
}

void write_wav(const std::string& path, const AudioSignal& signal, WavFormat format) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot create WAV file: " + path);

    const uint16_t bytes_per_sample =
        format == WavFormat::Pcm16 ? 2 : (format == WavFormat::Float32 ? 4 : 8);
    const uint16_t fmt_code = format == WavFormat::Pcm16 ? kWavPcm : kWavFloat;
    const auto data_size = static_cast<uint32_t>(signal.samples.size() * bytes_per_sample);

    write_bytes(os, "RIFF", 4);
    write_le<uint32_t>(os, 36 + data_size);
    write_bytes(os, "WAVE", 4);
    write_bytes(os, "fmt ", 4);
    write_le<uint32_t>(os, 16);
    write_le<uint16_t>(os, fmt_code);
    write_le<uint16_t>(os, 1);  // mono
    write_le<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate));
    write_le<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate) * bytes_per_sample);
    write_le<uint16_t>(os, bytes_per_sample);
    write_le<uint16_t>(os, static_cast<uint16_t>(bytes_per_sample * 8));
    write_bytes(os, "data", 4);
    write_le<uint32_t>(os, data_size);

    for (real s : signal.samples) {
        if (format == WavFormat::Pcm16) {
            const real c = std::clamp(s, real(-1), real(1));
            write_le<int16_t>(os, static_cast<int16_t>(std::lround(c * real(32767))));
        } else if (format == WavFormat::Float32) {
            write_le<float>(os, static_cast<float>(s));
        } else {
            write_le<double>(os, static_cast<double>(s));
        }
    }
    if (data_size % 2) write_le<uint8_t>(os, 0);
    if (!os) fail("write failed: " + path);
}

namespace {

uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open for hashing: " + path.string());
    uint64_t h = 14695981039346656037ULL;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<uint8_t>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string format_g(const KnobVector& g) {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < g.values.size(); ++i) {
        if (i) os << " ";
        os << g.values[i];
    }
    os << "\n";
    return os.str();
}

KnobVector parse_g(const std::string& text) {
    std::istringstream is(text);
    KnobVector g;
    real v;
    while (is >> v) g.values.push_back(v);
    return g;
}

}  // namespace

void save_dataset(const std::string& directory, const LabeledDataset& dataset) {
    const fs::path dir(directory);
    fs::create_directories(dir / "pairs");

    write_wav((dir / "x.wav").string(), dataset.x, WavFormat::Float64);
    for (size_t i = 0; i < dataset.pairs.size(); ++i) {
        const auto& [g, wet] = dataset.pairs[i];
        write_wav((dir / "pairs" / (std::to_string(i) + ".wav")).string(), wet,
                  WavFormat::Float64);
        std::ofstream gs(dir / "pairs" / (std::to_string(i) + ".g"));
        gs << format_g(g);
        if (!gs) fail("failed to write knob file for pair " + std::to_string(i));
    }

    std::ofstream m(dir / "manifest");
    if (!m) fail("cannot create manifest in " + directory);
    m << "ampal dataset v1\n";
    m << "pairs " << dataset.pairs.size() << "\n";
    m << "x " << std::hex << fnv1a_file(dir / "x.wav") << std::dec << "\n";
    for (size_t i = 0; i < dataset.pairs.size(); ++i) {
        m << i << " " << std::hex << fnv1a_file(dir / "pairs" / (std::to_string(i) + ".g")) << " "
          << fnv1a_file(dir / "pairs" / (std::to_string(i) + ".wav")) << std::dec << "\n";
    }
}

LabeledDataset load_dataset(const std::string& directory) {
    const fs::path dir(directory);
    std::ifstream m(dir / "manifest");
    if (!m) fail("cannot open manifest in " + directory);

    std::string header;
    std::getline(m, header);
    if (header != "ampal dataset v1") fail("unrecognized dataset manifest header: " + header);
    std::string word;
    size_t n_pairs = 0;
    m >> word >> n_pairs;
    uint64_t x_hash = 0;
    m >> word >> std::hex >> x_hash >> std::dec;
    if (!m || word != "x") fail("malformed dataset manifest in " + directory);

    if (!fs::exists(dir / "x.wav")) fail("dataset missing x.wav in " + directory);
    if (fnv1a_file(dir / "x.wav") != x_hash) fail("hash mismatch for x.wav in " + directory);

    LabeledDataset dataset;
    dataset.x = read_wav((dir / "x.wav").string());

    for (size_t i = 0; i < n_pairs; ++i) {
        size_t idx;
        uint64_t gh, wh;
        m >> idx >> std::hex >> gh >> wh >> std::dec;
        if (!m || idx != i) fail("malformed manifest entry for pair " + std::to_string(i));
        const fs::path gpath = dir / "pairs" / (std::to_string(i) + ".g");
        const fs::path wpath = dir / "pairs" / (std::to_string(i) + ".wav");
        if (!fs::exists(gpath) || !fs::exists(wpath)) {
            fail("dataset pair " + std::to_string(i) + " is missing on disk");
        }
        if (fnv1a_file(gpath) != gh || fnv1a_file(wpath) != wh) {
            fail("hash mismatch for dataset pair " + std::to_string(i));
        }
        std::ifstream gs(gpath);
        std::string text((std::istreambuf_iterator<char>(gs)), std::istreambuf_iterator<char>());
        dataset.pairs.emplace_back(parse_g(text), read_wav(wpath.string()));
    }
    return dataset;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot create checkpoint file: " + path);
    const ModelConfig& cfg = checkpoint.params.config;

    os << "ampal checkpoint v" << Checkpoint::kFormatVersion << "\n";
    os << "channels " << cfg.channels << "\n";
    os << "kernel_width " << cfg.kernel_width << "\n";
    os << "knob_count " << cfg.knob_count << "\n";
    os << "use_residual " << (cfg.use_residual ? 1 : 0) << "\n";
    os << "use_skip " << (cfg.use_skip ? 1 : 0) << "\n";
    os << "dilations";
    for (int d : cfg.dilation_schedule) os << " " << d;
    os << "\n";
    os << "seed " << checkpoint.seed << "\n";
    os << "epochs " << checkpoint.epochs << "\n";
    os.precision(17);
    os << "final_loss " << checkpoint.final_loss << "\n";

    auto arrays = checkpoint.params.flat();
    auto names = checkpoint.params.names();
    os << "sections " << arrays.size() << "\n\n";

    for (size_t i = 0; i < arrays.size(); ++i) {
        write_le<uint32_t>(os, static_cast<uint32_t>(names[i].size()));
        write_bytes(os, names[i].data(), names[i].size());
        write_le<uint32_t>(os, static_cast<uint32_t>(arrays[i]->shape.size()));
        for (int64_t d : arrays[i]->shape) write_le<uint64_t>(os, static_cast<uint64_t>(d));
        for (real v : arrays[i]->data) write_le<double>(os, static_cast<double>(v));
    }
    if (!os) fail("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail("cannot open checkpoint file: " + path);

    std::string line;
    std::getline(is, line);
    const std::string prefix = "ampal checkpoint v";
    if (line.rfind(prefix, 0) != 0) fail("not an ampal checkpoint: " + path);
    const int version = std::stoi(line.substr(prefix.size()));
    if (version != Checkpoint::kFormatVersion) {
        fail("checkpoint version " + std::to_string(version) + " unsupported (expected " +
             std::to_string(Checkpoint::kFormatVersion) + "): " + path);
    }

    ModelConfig cfg;
    cfg.dilation_schedule.clear();
    Checkpoint ckpt;
    size_t sections = 0;
    while (std::getline(is, line) && !line.empty()) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "channels") ls >> cfg.channels;
        else if (key == "kernel_width") ls >> cfg.kernel_width;
        else if (key == "knob_count") ls >> cfg.knob_count;
        else if (key == "use_residual") { int v; ls >> v; cfg.use_residual = v != 0; }
        else if (key == "use_skip") { int v; ls >> v; cfg.use_skip = v != 0; }
        else if (key == "dilations") {
            int d;
            while (ls >> d) cfg.dilation_schedule.push_back(d);
            ls.clear();
        }
        else if (key == "seed") ls >> ckpt.seed;
        else if (key == "epochs") ls >> ckpt.epochs;
        else if (key == "final_loss") ls >> ckpt.final_loss;
        else if (key == "sections") ls >> sections;
        else fail("unknown checkpoint header field '" + key + "': " + path);
        if (ls.fail()) fail("malformed checkpoint header line '" + line + "': " + path);
    }
    cfg.validate();

    // Reconstruct the expected layout, then overwrite every array from disk.
    ckpt.params = init_model(cfg, 0);
    auto arrays = ckpt.params.flat();
    auto names = ckpt.params.names();
    if (sections != arrays.size()) {
        fail("checkpoint section count " + std::to_string(sections) + " does not match config (" +
             std::to_string(arrays.size()) + " expected): " + path);
    }

    for (size_t i = 0; i < arrays.size(); ++i) {
        const auto name_len = read_le<uint32_t>(is, "section name length");
        std::string name(name_len, '\0');
        read_bytes(is, name.data(), name_len, "section name");
        if (name != names[i]) {
            fail("checkpoint section '" + name + "' does not match expected '" + names[i] +
                 "': " + path);
        }
        const auto ndim = read_le<uint32_t>(is, "section rank");
        std::vector<int64_t> shape(ndim);
        for (auto& d : shape) d = static_cast<int64_t>(read_le<uint64_t>(is, "section shape"));
        if (shape != arrays[i]->shape) {
            fail("checkpoint shape " + shape_to_string(shape) + " for '" + name +
                 "' does not match config shape " + shape_to_string(arrays[i]->shape) + ": " +
                 path);
        }
        for (auto& v : arrays[i]->data) v = static_cast<real>(read_le<double>(is, "section data"));
    }
    return ckpt;
}

}  // namespace ampal
