#ifndef ACCSTEER_TESTS_SUPPORT_HPP
#define ACCSTEER_TESTS_SUPPORT_HPP

#include "accsteer/accsteer.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("accsteer_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

/// Small planted dataset used across suites.
inline accsteer::SyntheticConfig small_config(std::uint64_t seed = 1) {
    accsteer::SyntheticConfig c;
    c.seed = seed;
    c.layer_count = 8;
    c.hidden_dim = 8;
    c.projector_dim = 6;
    c.planted_accent.inject_first = 2;
    c.planted_accent.inject_last = 4;
    c.planted_accent.speaker_noise_scale = 0.1;
    c.planted_accent.num_speakers_per_group = 4;
    c.planted_accent.utterances_per_speaker = 10;
    c.planted_accent.transcript_pool_size = 20;
    c.min_frames = 3;
    c.max_frames = 6;
    return c;
}

/// Planted-band sweep task: accent shift injected in the middle band of a
/// 16-layer linear encoder, transcribed by the nearest-transcript readout.
inline accsteer::SyntheticConfig sweep_config(std::uint64_t seed) {
    accsteer::SyntheticConfig c;
    c.seed = seed;
    c.layer_count = 16;
    c.hidden_dim = 32;
    c.projector_dim = 32;
    c.nonlinearity = accsteer::Nonlinearity::none;
    c.content_scale = 0.15;
    c.planted_accent.inject_first = 7;
    c.planted_accent.inject_last = 9;
    c.planted_accent.shift_norm = 0.7;
    c.planted_accent.speaker_noise_scale = 0.1;
    c.planted_accent.num_speakers_per_group = 10;
    c.planted_accent.utterances_per_speaker = 40;
    c.planted_accent.transcript_pool_size = 120;
    return c;
}

} // namespace testing_support

#endif // ACCSTEER_TESTS_SUPPORT_HPP
