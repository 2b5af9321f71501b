#ifndef ACCSTEER_SYNTHETIC_HPP
#define ACCSTEER_SYNTHETIC_HPP

// Synthetic data with planted accent structure.
//
// Each transcript in a shared pool owns a content matrix (a base vector plus
// per-frame jitter, with a transcript-specific frame count). A speaker adds a
// constant offset drawn once per speaker. The encoder runs on content+offset;
// for utterances of a planted accent group it also adds that group's shift
// vector to the hidden state at every layer in the injection range.

#include "accsteer/activation_store.hpp"
#include "accsteer/encoder.hpp"
#include "accsteer/error.hpp"
#include "accsteer/random.hpp"
#include "accsteer/transcriber.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace accsteer {

struct PlantedAccent {
    std::vector<std::string> accent_labels{"accent"};
    /// Shift for accent_labels[0]. Empty: random direction of length shift_norm.
    std::vector<float> shift_vector;
    double shift_norm = 1.0;
    std::size_t inject_first = 0;
    std::size_t inject_last = 0;
    double speaker_noise_scale = 0.0;
    std::size_t num_speakers_per_group = 5;
    std::size_t utterances_per_speaker = 20;
    std::size_t transcript_pool_size = 40;
};

struct SyntheticConfig {
    std::uint64_t seed = 0;
    std::size_t layer_count = 16;
    std::size_t hidden_dim = 32;
    std::size_t projector_dim = 32;
    Nonlinearity nonlinearity = Nonlinearity::none;
    std::string standard_group = "standard";
    PlantedAccent planted_accent;
    std::size_t min_frames = 8;
    std::size_t max_frames = 16;
    std::size_t min_words = 3;
    std::size_t max_words = 8;
    double content_scale = 1.0;
    double frame_jitter_scale = 0.3;
    bool store_projector = true;

    void validate() const {
        EncoderSpec{layer_count, hidden_dim, projector_dim, EncoderKind::synthetic}.validate();
        const auto& pa = planted_accent;
        if (pa.accent_labels.empty())
            throw ValidationError("synthetic config needs at least one accent label");
        std::set<std::string> labels{standard_group};
        for (const auto& l : pa.accent_labels)
            if (l.empty() || !labels.insert(l).second)
                throw ValidationError("accent labels must be non-empty, distinct and differ from the standard group");
        if (pa.inject_first > pa.inject_last || pa.inject_last >= layer_count)
            throw ValidationError("inject_layers must satisfy 0 <= first <= last < layer_count");
        if (!pa.shift_vector.empty() && pa.shift_vector.size() != hidden_dim)
            throw ValidationError("shift_vector has " + std::to_string(pa.shift_vector.size()) + " entries, expected " +
                                  std::to_string(hidden_dim));
        if (!(pa.shift_norm >= 0.0) || !(pa.speaker_noise_scale >= 0.0) || !(content_scale >= 0.0) ||
            !(frame_jitter_scale >= 0.0))
            throw ValidationError("scales must be non-negative");
        if (pa.num_speakers_per_group == 0 || pa.utterances_per_speaker == 0 || pa.transcript_pool_size == 0)
            throw ValidationError("degenerate synthetic config: zero speakers, utterances or transcripts");
        if (min_frames == 0 || min_frames > max_frames)
            throw ValidationError("frame range must satisfy 1 <= min_frames <= max_frames");
        if (min_words == 0 || min_words > max_words)
            throw ValidationError("word range must satisfy 1 <= min_words <= max_words");
    }
};

inline const char* to_string(Nonlinearity n) { return n == Nonlinearity::none ? "none" : "saturating"; }

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "none")
        return Nonlinearity::none;
    if (s == "saturating")
        return Nonlinearity::saturating;
    throw ValidationError("nonlinearity must be 'none' or 'saturating', got '" + s + "'");
}

inline json to_json(const SyntheticConfig& c) {
    const auto& pa = c.planted_accent;
    json planted{{"accent_labels", pa.accent_labels},
                 {"shift_norm", pa.shift_norm},
                 {"inject_layers", {pa.inject_first, pa.inject_last}},
                 {"speaker_noise_scale", pa.speaker_noise_scale},
                 {"num_speakers_per_group", pa.num_speakers_per_group},
                 {"utterances_per_speaker", pa.utterances_per_speaker},
                 {"transcript_pool_size", pa.transcript_pool_size}};
    if (!pa.shift_vector.empty())
        planted["shift_vector"] = pa.shift_vector;
    return {{"seed", c.seed},
            {"layer_count", c.layer_count},
            {"hidden_dim", c.hidden_dim},
            {"projector_dim", c.projector_dim},
            {"nonlinearity", to_string(c.nonlinearity)},
            {"standard_group", c.standard_group},
            {"planted_accent", planted},
            {"frames", {c.min_frames, c.max_frames}},
            {"words", {c.min_words, c.max_words}},
            {"content_scale", c.content_scale},
            {"frame_jitter_scale", c.frame_jitter_scale},
            {"store_projector", c.store_projector}};
}

inline SyntheticConfig synthetic_config_from_json(const json& j) {
    SyntheticConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        c.layer_count = j.value("layer_count", c.layer_count);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.projector_dim = j.value("projector_dim", c.projector_dim);
        c.nonlinearity = nonlinearity_from_string(j.value("nonlinearity", std::string("none")));
        c.standard_group = j.value("standard_group", c.standard_group);
        if (j.contains("frames")) {
            c.min_frames = j["frames"].at(0).get<std::size_t>();
            c.max_frames = j["frames"].at(1).get<std::size_t>();
        }
        if (j.contains("words")) {
            c.min_words = j["words"].at(0).get<std::size_t>();
            c.max_words = j["words"].at(1).get<std::size_t>();
        }
        c.content_scale = j.value("content_scale", c.content_scale);
        c.frame_jitter_scale = j.value("frame_jitter_scale", c.frame_jitter_scale);
        c.store_projector = j.value("store_projector", c.store_projector);
        if (j.contains("planted_accent")) {
            const auto& p = j["planted_accent"];
            auto& pa = c.planted_accent;
            pa.accent_labels = p.value("accent_labels", pa.accent_labels);
            pa.shift_vector = p.value("shift_vector", std::vector<float>{});
            pa.shift_norm = p.value("shift_norm", pa.shift_norm);
            if (p.contains("inject_layers")) {
                pa.inject_first = p["inject_layers"].at(0).get<std::size_t>();
                pa.inject_last = p["inject_layers"].at(1).get<std::size_t>();
            }
            pa.speaker_noise_scale = p.value("speaker_noise_scale", pa.speaker_noise_scale);
            pa.num_speakers_per_group = p.value("num_speakers_per_group", pa.num_speakers_per_group);
            pa.utterances_per_speaker = p.value("utterances_per_speaker", pa.utterances_per_speaker);
            pa.transcript_pool_size = p.value("transcript_pool_size", pa.transcript_pool_size);
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed synthetic config: ") + ex.what());
    }
    c.validate();
    return c;
}

inline constexpr const char* kSyntheticConfigFileName = "synthetic_config.json";

/// Deterministic generative model behind a synthetic dataset: encoder,
/// transcript pool, content matrices and speaker offsets.
class SyntheticWorld {
public:
    explicit SyntheticWorld(SyntheticConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build_shifts();
        encoder_ = std::make_shared<SyntheticEncoder>(
            EncoderSpec{cfg_.layer_count, cfg_.hidden_dim, cfg_.projector_dim, EncoderKind::synthetic}, cfg_.seed,
            cfg_.nonlinearity,
            SyntheticEncoder::Planting{shifts_, cfg_.planted_accent.inject_first, cfg_.planted_accent.inject_last});
        build_transcripts();
    }

    const SyntheticConfig& config() const noexcept { return cfg_; }
    const SyntheticEncoder& encoder() const noexcept { return *encoder_; }
    std::shared_ptr<const SyntheticEncoder> shared_encoder() const noexcept { return encoder_; }
    const std::vector<std::string>& transcripts() const noexcept { return transcripts_; }

    /// Groups in manifest order: standard first, then the accents.
    std::vector<std::string> groups() const {
        std::vector<std::string> g{cfg_.standard_group};
        g.insert(g.end(), cfg_.planted_accent.accent_labels.begin(), cfg_.planted_accent.accent_labels.end());
        return g;
    }

    /// Content input (T x D) of a pool transcript, before any speaker offset.
    Matrix content_input(std::size_t transcript_index) const {
        Rng rng = Rng(cfg_.seed).fork("content").fork(static_cast<std::uint64_t>(transcript_index));
        const auto frames = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(cfg_.min_frames), static_cast<std::int64_t>(cfg_.max_frames)));
        std::vector<double> base(cfg_.hidden_dim);
        for (auto& b : base)
            b = cfg_.content_scale * rng.normal();
        Matrix m(frames, cfg_.hidden_dim);
        for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t d = 0; d < cfg_.hidden_dim; ++d)
                m(t, d) = static_cast<float>(base[d] + cfg_.frame_jitter_scale * rng.normal());
        return m;
    }

    std::vector<double> speaker_offset(const std::string& group, std::size_t speaker_index) const {
        Rng rng = Rng(cfg_.seed).fork("speaker:" + group).fork(static_cast<std::uint64_t>(speaker_index));
        std::vector<double> off(cfg_.hidden_dim);
        for (auto& o : off)
            o = cfg_.planted_accent.speaker_noise_scale * rng.normal();
        return off;
    }

    /// Pool indices spoken by one speaker.
    std::vector<std::size_t> speaker_script(const std::string& group, std::size_t speaker_index) const {
        Rng rng = Rng(cfg_.seed).fork("script:" + group).fork(static_cast<std::uint64_t>(speaker_index));
        const std::size_t pool = transcripts_.size();
        std::vector<std::size_t> perm(pool);
        for (std::size_t i = 0; i < pool; ++i)
            perm[i] = i;
        rng.shuffle(perm);
        std::vector<std::size_t> out(cfg_.planted_accent.utterances_per_speaker);
        for (std::size_t u = 0; u < out.size(); ++u)
            out[u] = perm[u % pool];
        return out;
    }

    static std::string speaker_id(const std::string& group, std::size_t s) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "_s%02zu", s);
        return group + buf;
    }

    static std::string utterance_id(const std::string& group, std::size_t s, std::size_t u) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "_u%03zu", u);
        return speaker_id(group, s) + buf;
    }

    /// Input features of one utterance: content plus speaker offset.
    Matrix utterance_input(const std::string& group, std::size_t speaker_index, std::size_t transcript_index) const {
        Matrix m = content_input(transcript_index);
        const auto off = speaker_offset(group, speaker_index);
        for (std::size_t t = 0; t < m.rows(); ++t)
            for (std::size_t d = 0; d < m.cols(); ++d)
                m(t, d) = static_cast<float>(static_cast<double>(m(t, d)) + off[d]);
        return m;
    }

private:
    void build_shifts() {
        const auto& pa = cfg_.planted_accent;
        std::vector<float> first = pa.shift_vector;
        if (first.empty())
            first = random_direction(pa.accent_labels.front(), pa.shift_norm);
        double norm = 0.0;
        for (float f : first)
            norm += static_cast<double>(f) * f;
        norm = std::sqrt(norm);
        shifts_[pa.accent_labels.front()] = first;
        for (std::size_t k = 1; k < pa.accent_labels.size(); ++k)
            shifts_[pa.accent_labels[k]] = random_direction(pa.accent_labels[k], norm);
    }

    std::vector<float> random_direction(const std::string& label, double norm) const {
        Rng rng = Rng(cfg_.seed).fork("shift:" + label);
        std::vector<double> v(cfg_.hidden_dim);
        double n2 = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            n2 += x * x;
        }
        const double scale = n2 > 0.0 ? norm / std::sqrt(n2) : 0.0;
        std::vector<float> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i] = static_cast<float>(v[i] * scale);
        return out;
    }

    void build_transcripts() {
        static constexpr const char* vocabulary[] = {
            "please", "call",   "stella", "ask",    "her",   "to",     "bring", "these",  "things", "with",  "from",
            "the",    "store",  "six",    "spoons", "of",    "fresh",  "snow",  "peas",   "five",   "thick", "slabs",
            "blue",   "cheese", "and",    "maybe",  "a",     "snack",  "for",   "brother", "bob",   "we",    "also",
            "need",   "small",  "plastic", "snake", "big",   "toy",    "frog",  "kids",   "she",    "can",   "scoop",
            "into",   "three",  "red",    "bags",   "will",  "go",     "meet",  "wednesday", "at",  "train", "station",
            "rain",   "wind",   "river",  "stone",  "light", "window", "garden"};
        constexpr std::size_t vocab_size = std::size(vocabulary);
        Rng rng = Rng(cfg_.seed).fork("transcripts");
        std::set<std::string> seen;
        const std::size_t want = cfg_.planted_accent.transcript_pool_size;
        std::size_t attempts = 0;
        while (transcripts_.size() < want) {
            if (++attempts > 1000 * want)
                throw ValidationError("cannot generate " + std::to_string(want) + " distinct transcripts");
            const auto words =
                rng.between(static_cast<std::int64_t>(cfg_.min_words), static_cast<std::int64_t>(cfg_.max_words));
            std::string text;
            for (std::int64_t w = 0; w < words; ++w) {
                if (w)
                    text.push_back(' ');
                text += vocabulary[rng.below(vocab_size)];
            }
            if (seen.insert(text).second)
                transcripts_.push_back(std::move(text));
        }
    }

    SyntheticConfig cfg_;
    std::map<std::string, std::vector<float>, std::less<>> shifts_;
    std::shared_ptr<SyntheticEncoder> encoder_;
    std::vector<std::string> transcripts_;
};

/// Writes a complete synthetic dataset (activations, optional projector
/// outputs, manifest, and the generating config) under `root`.
inline DatasetManifest generate_synthetic_dataset(const SyntheticConfig& cfg, const fs::path& root) {
    SyntheticWorld world(cfg);
    const auto& pa = cfg.planted_accent;
    json extras{{"layer_count", cfg.layer_count},
                {"hidden_dim", cfg.hidden_dim},
                {"projector_dim", cfg.projector_dim},
                {"generator", "synthetic"}};
    auto writer = DatasetWriter::create(root, world.groups(), cfg.standard_group, extras);

    for (const auto& group : world.groups()) {
        for (std::size_t s = 0; s < pa.num_speakers_per_group; ++s) {
            const auto script = world.speaker_script(group, s);
            for (std::size_t u = 0; u < script.size(); ++u) {
                const Matrix input = world.utterance_input(group, s, script[u]);
                ActivationRecord rec{SyntheticWorld::utterance_id(group, s, u), world.encoder().run(input, group)};
                UtteranceMeta meta{rec.utterance_id, SyntheticWorld::speaker_id(group, s), group,
                                   world.transcripts()[script[u]], static_cast<std::uint32_t>(input.rows())};
                if (cfg.store_projector) {
                    const Matrix proj = world.encoder().project(rec.layers.back());
                    writer.write(std::move(rec), std::move(meta), &proj);
                } else {
                    writer.write(std::move(rec), std::move(meta));
                }
            }
        }
    }

    const std::string text = to_json(cfg).dump(2) + "\n";
    detail::write_atomically(root / kSyntheticConfigFileName, std::as_bytes(std::span(text.data(), text.size())));
    return writer.manifest();
}

inline SyntheticConfig load_synthetic_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open synthetic config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw ValidationError(path.string() + ": " + ex.what());
    }
    return synthetic_config_from_json(j);
}

/// Fixed linear readout over pooled projector outputs followed by a
/// nearest-neighbour lookup among the pool transcripts' clean embeddings
/// (standard speaker, zero offset). Accent shifts that move an utterance
/// closer to another transcript's embedding produce real word errors.
class SyntheticTranscriber final : public Transcriber {
public:
    explicit SyntheticTranscriber(const SyntheticWorld& world) : transcripts_(world.transcripts()) {
        const auto& enc = world.encoder();
        const std::size_t p = enc.spec().projector_dim;
        Rng rng = Rng(world.config().seed).fork("readout");
        readout_ = detail::random_orthogonal(p, rng);
        dim_ = p;
        embeddings_.reserve(transcripts_.size());
        for (std::size_t i = 0; i < transcripts_.size(); ++i) {
            const auto layers = enc.run(world.content_input(i));
            embeddings_.push_back(read_out(time_mean(enc.project(layers.back()))));
        }
    }

    std::string transcribe(const UtteranceMeta&, std::span<const double> pooled) const override {
        if (pooled.size() != dim_)
            throw TranscriberError("pooled projector output has dim " + std::to_string(pooled.size()) + ", expected " +
                                   std::to_string(dim_));
        const auto z = read_out(pooled);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < embeddings_.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim_; ++k) {
                const double diff = z[k] - embeddings_[i][k];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = i;
            }
        }
        return transcripts_[best];
    }
    bool concurrent_safe() const noexcept override { return true; }

private:
    std::vector<double> read_out(std::span<const double> v) const {
        std::vector<double> out(dim_, 0.0);
        for (std::size_t r = 0; r < dim_; ++r)
            for (std::size_t k = 0; k < dim_; ++k)
                out[r] += readout_[r * dim_ + k] * v[k];
        return out;
    }

    std::vector<std::string> transcripts_;
    std::vector<double> readout_;
    std::size_t dim_ = 0;
    std::vector<std::vector<double>> embeddings_;
};

/// Encoder for a dataset: the synthetic encoder when the dataset carries its
/// generating config, otherwise a precomputed stand-in.
inline std::shared_ptr<const Encoder> load_encoder(const ActivationStore& store) {
    const fs::path cfg = store.root() / kSyntheticConfigFileName;
    if (fs::exists(cfg))
        return SyntheticWorld(load_synthetic_config(cfg)).shared_encoder();
    const auto& x = store.manifest().extras;
    EncoderSpec spec;
    spec.layer_count = x.contains("layer_count") ? x["layer_count"].get<std::size_t>() : store.layer_count();
    spec.hidden_dim = x.value("hidden_dim", std::size_t{1});
    spec.projector_dim = x.value("projector_dim", spec.hidden_dim);
    spec.kind = EncoderKind::precomputed;
    return std::make_shared<PrecomputedEncoder>(spec);
}

} // namespace accsteer

#endif // ACCSTEER_SYNTHETIC_HPP
