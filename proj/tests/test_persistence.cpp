#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "ampal/amp_oracle.hpp"
#include "ampal/persistence.hpp"
#include "ampal/rng.hpp"
#include "ampal/signals.hpp"

using namespace ampal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ampal_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name = "") const { return (path / name).string(); }
};

AudioSignal noise(int64_t n, uint64_t seed, int rate = 8000) {
    std::mt19937_64 rng(seed);
    AudioSignal s;
    s.sample_rate = rate;
    s.samples.resize(static_cast<size_t>(n));
    for (auto& v : s.samples) v = 2 * uniform01(rng) - 1;
    return s;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.channels = 3;
    cfg.kernel_width = 2;
    cfg.dilation_schedule = {1, 2, 4};
    cfg.knob_count = 6;
    return cfg;
}

}  // namespace

TEST_CASE("float64 wav round-trips bit-exactly") {
    TempDir dir;
    auto x = noise(777, 1, 8000);
    x.samples.push_back(0);
    x.samples.push_back(1);
    x.samples.push_back(-1);
    write_wav(dir.str("x.wav"), x, WavFormat::Float64);
    auto y = read_wav(dir.str("x.wav"));
    CHECK(y.sample_rate == 8000);
    CHECK(y.samples == x.samples);
}

TEST_CASE("float32 wav is exact for float-representable samples") {
    TempDir dir;
    AudioSignal x;
    x.sample_rate = 48000;
    for (int i = 0; i < 100; ++i) x.samples.push_back(static_cast<float>(i) / 64.0f);
    write_wav(dir.str("x.wav"), x, WavFormat::Float32);
    auto y = read_wav(dir.str("x.wav"));
    CHECK(y.sample_rate == 48000);
    CHECK(y.samples == x.samples);
}

TEST_CASE("pcm16 wav round-trips within one quantization step") {
    TempDir dir;
    auto x = noise(1000, 2, 44100);
    write_wav(dir.str("x.wav"), x, WavFormat::Pcm16);
    auto y = read_wav(dir.str("x.wav"));
    REQUIRE(y.samples.size() == x.samples.size());
    for (size_t i = 0; i < x.samples.size(); ++i) {
        CHECK(std::abs(y.samples[i] - x.samples[i]) <= 1.0 / 32767.0);
    }
}

TEST_CASE("read_wav reports malformed files") {
    TempDir dir;
    SUBCASE("missing file") { CHECK_THROWS(read_wav(dir.str("nope.wav"))); }
    SUBCASE("not a wav") {
        std::ofstream(dir.str("junk.wav")) << "this is not audio";
        CHECK_THROWS(read_wav(dir.str("junk.wav")));
    }
    SUBCASE("truncated data") {
        auto x = noise(500, 3);
        write_wav(dir.str("x.wav"), x, WavFormat::Float32);
        auto size = fs::file_size(dir.str("x.wav"));
        fs::resize_file(dir.str("x.wav"), size - 100);
        CHECK_THROWS(read_wav(dir.str("x.wav")));
    }
}

TEST_CASE("dataset round-trips exactly") {
    TempDir dir;
    OracleConfig oracle;
    LabeledDataset ds;
    ds.x = make_dry_signal(oracle.sample_rate, 0.5, 4);
    label(ds, KnobVector{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}}, oracle);
    label(ds, KnobVector{{0.9, 0.8, 0.7, 0.6, 0.5, 0.4}}, oracle);
    label(ds, KnobVector{{1.0, 0.0, 1.0, 0.0, 1.0, 1.0 / 3.0}}, oracle);

    save_dataset(dir.str("ds"), ds);
    auto back = load_dataset(dir.str("ds"));
    CHECK(back.x.samples == ds.x.samples);
    CHECK(back.x.sample_rate == ds.x.sample_rate);
    REQUIRE(back.pairs.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(back.pairs[i].first.values == ds.pairs[i].first.values);
        CHECK(back.pairs[i].second.samples == ds.pairs[i].second.samples);
    }
}

TEST_CASE("empty dataset round-trips") {
    TempDir dir;
    LabeledDataset ds;
    ds.x = noise(100, 5);
    save_dataset(dir.str("ds"), ds);
    auto back = load_dataset(dir.str("ds"));
    CHECK(back.x.samples == ds.x.samples);
    CHECK(back.pairs.empty());
}

TEST_CASE("loading a damaged dataset names the problem") {
    TempDir dir;
    OracleConfig oracle;
    LabeledDataset ds;
    ds.x = noise(256, 6, oracle.sample_rate);
    label(ds, KnobVector{{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}}, oracle);
    label(ds, KnobVector{{0.2, 0.5, 0.5, 0.5, 0.5, 0.5}}, oracle);
    save_dataset(dir.str("ds"), ds);

    SUBCASE("deleted pair file") {
        fs::remove(fs::path(dir.str("ds")) / "pairs" / "1.wav");
        CHECK_THROWS_WITH_AS(load_dataset(dir.str("ds")), doctest::Contains("1"),
                             std::runtime_error);
    }
    SUBCASE("edited pair audio breaks the hash") {
        auto wet = read_wav((fs::path(dir.str("ds")) / "pairs" / "0.wav").string());
        wet.samples[0] += 0.25;
        write_wav((fs::path(dir.str("ds")) / "pairs" / "0.wav").string(), wet,
                  WavFormat::Float64);
        CHECK_THROWS(load_dataset(dir.str("ds")));
    }
    SUBCASE("missing manifest") {
        fs::remove(fs::path(dir.str("ds")) / "manifest");
        CHECK_THROWS(load_dataset(dir.str("ds")));
    }
}

TEST_CASE("checkpoint round-trip reproduces the forward pass bit-exactly") {
    TempDir dir;
    auto params = init_model(tiny_config(), 77);
    Checkpoint ck;
    ck.params = params;
    ck.seed = 77;
    ck.epochs = 13;
    ck.final_loss = 0.0123456789;
    save_checkpoint(dir.str("m.ckpt"), ck);
    auto back = load_checkpoint(dir.str("m.ckpt"));

    CHECK(back.seed == 77);
    CHECK(back.epochs == 13);
    CHECK(back.final_loss == ck.final_loss);
    CHECK(back.params.config == params.config);
    CHECK(parameter_distance(back.params, params) == 0);

    auto x = noise(512, 8);
    KnobVector g{{0.3, 0.6, 0.1, 0.8, 0.5, 0.2}};
    auto y1 = forward(params, x, g);
    auto y2 = forward(back.params, x, g);
    CHECK(y1.samples == y2.samples);
}

TEST_CASE("checkpoint loading rejects tampering") {
    TempDir dir;
    Checkpoint ck;
    ck.params = init_model(tiny_config(), 1);
    save_checkpoint(dir.str("m.ckpt"), ck);

    SUBCASE("wrong version") {
        std::ifstream in(dir.str("m.ckpt"), std::ios::binary);
        std::string contents((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
        in.close();
        const std::string header = "ampal checkpoint v";
        auto pos = contents.find(header + "1");
        REQUIRE(pos != std::string::npos);
        contents[pos + header.size()] = '9';
        std::ofstream(dir.str("bad.ckpt"), std::ios::binary) << contents;
        CHECK_THROWS_WITH_AS(load_checkpoint(dir.str("bad.ckpt")), doctest::Contains("version"),
                             std::runtime_error);
    }
    SUBCASE("truncated weights") {
        auto size = fs::file_size(dir.str("m.ckpt"));
        fs::resize_file(dir.str("m.ckpt"), size - 16);
        CHECK_THROWS(load_checkpoint(dir.str("m.ckpt")));
    }
    SUBCASE("missing file") { CHECK_THROWS(load_checkpoint(dir.str("nope.ckpt"))); }
}
