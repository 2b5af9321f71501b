#include "support.hpp"

#include <gtest/gtest.h>

using namespace accsteer;
using testing_support::TempDir;

namespace {

struct Fixture {
    TempDir dir{"sens"};
    std::unique_ptr<ActivationStore> store;
    std::shared_ptr<const Encoder> encoder;
    std::vector<UtterancePair> cross, within;

    explicit Fixture(const SyntheticConfig& cfg, std::size_t n_cross = 60, std::size_t n_within = 30) {
        generate_synthetic_dataset(cfg, dir.path() / "ds");
        store = std::make_unique<ActivationStore>(dir.path() / "ds");
        encoder = load_encoder(*store);
        const auto& accent = cfg.planted_accent.accent_labels.front();
        cross = build_cross_pairs(store->manifest(), accent, n_cross, 5).pairs;
        within = build_within_pairs(store->manifest(), accent, n_within, 5).pairs;
    }
};

SteeringVector vector_between(const ActivationStore& store, const std::string& to, const std::string& from,
                              std::size_t layer) {
    const std::vector<PooledRep> a{store.pooled(to, layer)}, b{store.pooled(from, layer)};
    return mean_shift(a, b, layer);
}

// Throws a capability error on inputs with exactly `rows` frames.
class PickyEncoder final : public Encoder {
public:
    PickyEncoder(std::shared_ptr<const Encoder> inner, std::size_t rows) : inner_(std::move(inner)), rows_(rows) {}
    const EncoderSpec& spec() const noexcept override { return inner_->spec(); }
    bool can_resume() const noexcept override { return true; }
    Matrix forward_from_layer(std::size_t start, const Matrix& h, std::string_view cond) const override {
        if (h.rows() == rows_)
            throw CapabilityError("no");
        return inner_->forward_from_layer(start, h, cond);
    }

private:
    std::shared_ptr<const Encoder> inner_;
    std::size_t rows_;
};

SensitivityProfile profile_with(const std::vector<double>& sens, std::set<std::size_t> excluded = {}) {
    SensitivityProfile p;
    p.layer_count = sens.size();
    for (std::size_t l = 0; l < sens.size(); ++l) {
        LayerSensitivity row;
        row.layer = l;
        row.sensitivity = sens[l];
        row.excluded = excluded.contains(l);
        p.layers.push_back(row);
    }
    p.excluded_layers = std::move(excluded);
    return p;
}

} // namespace

TEST(Bands, ThirtyTwoLayers) {
    const auto b = classify_bands(32);
    for (std::size_t l = 0; l < 32; ++l) {
        const Band want = l <= 14 ? Band::early : l <= 19 ? Band::middle : l <= 30 ? Band::late : Band::excluded;
        EXPECT_EQ(b[l], want) << l;
    }
    EXPECT_EQ(b[16], Band::middle);
    EXPECT_EQ(b[31], Band::excluded);
}

TEST(Bands, EightLayers) {
    const auto b = classify_bands(8);
    const std::vector<Band> want{Band::early,  Band::early, Band::early, Band::middle,
                                 Band::middle, Band::late,  Band::late,  Band::excluded};
    EXPECT_EQ(b, want);
}

TEST(Bands, SmallAndInvalid) {
    EXPECT_THROW(classify_bands(2), ValidationError);
    EXPECT_THROW(classify_bands(0), ValidationError);
    const auto b = classify_bands(3);
    EXPECT_EQ(b.back(), Band::excluded);
    for (Band x : {Band::early, Band::middle, Band::late, Band::excluded})
        EXPECT_EQ(band_from_string(to_string(x)), x);
    EXPECT_THROW(band_from_string("upper"), FormatError);
}

TEST(Aas, ZeroAlphaIsExactlyZero) {
    Fixture f(testing_support::small_config(1));
    for (const auto& pairs : {f.cross, f.within})
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t l = 0; l < 8; ++l)
                for (auto who : {Perturbed::first, Perturbed::second}) {
                    const auto d = vector_between(*f.store, pairs[i].first_id, pairs[i].second_id, l);
                    EXPECT_EQ(compute_aas(pairs[i], l, d, 0.0, *f.store, *f.encoder, who).aas, 0.0);
                }
}

TEST(Aas, ConstructedAlignment) {
    auto cfg = testing_support::small_config(2);
    cfg.nonlinearity = Nonlinearity::none;
    Fixture f(cfg);
    // After the injection band the remaining map is linear and shift-free, so
    // adding (target - source) pooled means lands the source on the target.
    for (std::size_t l = cfg.planted_accent.inject_last; l < cfg.layer_count; ++l)
        for (std::size_t i = 0; i < 5; ++i) {
            const auto& p = f.cross[i];
            const auto d = vector_between(*f.store, p.first_id, p.second_id, l);
            BaselineCache cache(*f.store, *f.encoder);
            const auto r = compute_aas(p, l, d, 1.0, *f.store, *f.encoder, cache, Perturbed::second);
            const double base = cosine(cache.get(p.second_id, l), cache.get(p.first_id, l));
            EXPECT_NEAR(r.aas, 1.0 - base, 1e-5);
            EXPECT_EQ(r.source_id, p.second_id);
            EXPECT_EQ(r.direction_label(), "accent_to_std");
        }
}

TEST(Aas, BoundedByTwo) {
    Fixture f(testing_support::small_config(3));
    Rng rng(1);
    for (std::size_t i = 0; i < 20; ++i) {
        SteeringVector d;
        d.layer = i % 7;
        d.direction.resize(8);
        for (auto& x : d.direction)
            x = static_cast<float>(rng.normal());
        const auto r = compute_aas(f.cross[i], d.layer, d, 1e3, *f.store, *f.encoder);
        EXPECT_TRUE(std::isfinite(r.aas));
        EXPECT_LE(std::fabs(r.aas), 2.0);
    }
}

TEST(Aas, Errors) {
    Fixture f(testing_support::small_config(4));
    const auto d = vector_between(*f.store, f.cross[0].first_id, f.cross[0].second_id, 3);
    EXPECT_THROW(compute_aas(f.cross[0], 4, d, 1.0, *f.store, *f.encoder), ValidationError);
    PrecomputedEncoder pre(f.encoder->spec());
    EXPECT_THROW(compute_aas(f.cross[0], 3, d, 1.0, *f.store, pre), CapabilityError);
    EXPECT_THROW(build_profile("accent", f.cross, f.within, *f.store, pre), CapabilityError);
}

TEST(Normalize, HandExample) {
    const auto p = normalize_profile(profile_with({0, 2, 4, 9}, {3}));
    EXPECT_DOUBLE_EQ(p.layers[0].normalized_sensitivity, 0.0);
    EXPECT_DOUBLE_EQ(p.layers[1].normalized_sensitivity, 0.5);
    EXPECT_DOUBLE_EQ(p.layers[2].normalized_sensitivity, 1.0);
    EXPECT_DOUBLE_EQ(p.layers[3].normalized_sensitivity, 0.0);
    EXPECT_FALSE(p.degenerate_range);
    EXPECT_FALSE(p.all_zero);
}

TEST(Normalize, DegenerateAndZero) {
    const auto c = normalize_profile(profile_with({0.3, 0.3, 0.3}));
    EXPECT_TRUE(c.degenerate_range);
    for (const auto& l : c.layers)
        EXPECT_EQ(l.normalized_sensitivity, 1.0);
    const auto z = normalize_profile(profile_with({0, 0, 0}));
    EXPECT_TRUE(z.all_zero);
    for (const auto& l : z.layers)
        EXPECT_EQ(l.normalized_sensitivity, 0.0);
}

TEST(Normalize, CanonicalInputUnchanged) {
    const std::vector<double> s{0.0, 0.25, 1.0, 0.6};
    const auto p = normalize_profile(profile_with(s));
    for (std::size_t l = 0; l < s.size(); ++l)
        EXPECT_DOUBLE_EQ(p.layers[l].normalized_sensitivity, s[l]);
}

TEST(Profile, ArgmaxTiesGoLow) {
    EXPECT_EQ(profile_with({0.1, 0.5, 0.2, 0.5}).argmax_layer(), 1u);
    EXPECT_EQ(profile_with({0.1, 0.5, 0.2, 0.9}, {3}).argmax_layer(), 1u);
    EXPECT_EQ(profile_with({0, 0, 0}).argmax_layer(), 0u);
    EXPECT_FALSE(profile_with({1.0}, {0}).argmax_layer());
}

TEST(Profile, Invariants) {
    Fixture f(testing_support::small_config(5));
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder);
    ASSERT_EQ(p.layers.size(), 8u);
    EXPECT_EQ(p.excluded_layers, std::set<std::size_t>{7});
    EXPECT_TRUE(p.layers[7].excluded);
    EXPECT_EQ(p.n_cross, f.cross.size());
    EXPECT_EQ(p.n_within, f.within.size());
    EXPECT_EQ(p.failed_pairs, 0u);
    for (const auto& l : p.layers) {
        if (l.excluded)
            continue;
        EXPECT_EQ(l.specificity, l.mean_aas_cross - l.mean_aas_within);
        EXPECT_EQ(l.sensitivity, std::max(0.0, l.specificity));
        EXPECT_GE(l.normalized_sensitivity, 0.0);
        EXPECT_LE(l.normalized_sensitivity, 1.0);
        EXPECT_DOUBLE_EQ(l.mean_aas_cross, 0.5 * (l.cross_forward + l.cross_reverse));
        EXPECT_DOUBLE_EQ(l.mean_aas_within, 0.5 * (l.within_forward + l.within_reverse));
        EXPECT_LE(std::fabs(l.mean_aas_cross), 2.0);
    }
}

TEST(Profile, OneDirection) {
    Fixture f(testing_support::small_config(6));
    ProfileOptions one;
    one.bidirectional = false;
    const auto a = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, one);
    const auto b = build_profile("accent", f.cross, f.within, *f.store, *f.encoder);
    for (std::size_t l = 0; l < 7; ++l) {
        EXPECT_EQ(a.layers[l].mean_aas_cross, a.layers[l].cross_forward);
        EXPECT_EQ(a.layers[l].cross_reverse, 0.0);
        EXPECT_EQ(a.layers[l].cross_forward, b.layers[l].cross_forward);
    }
    EXPECT_FALSE(a.bidirectional);
}

TEST(Profile, ZeroAlphaIsAllZero) {
    Fixture f(testing_support::small_config(7));
    ProfileOptions o;
    o.alpha = 0.0;
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, o);
    EXPECT_TRUE(p.all_zero);
    for (const auto& l : p.layers) {
        EXPECT_EQ(l.mean_aas_cross, 0.0);
        EXPECT_EQ(l.mean_aas_within, 0.0);
    }
}

TEST(Profile, ExcludedLayers) {
    Fixture f(testing_support::small_config(8), 20, 10);
    ProfileOptions o;
    o.excluded_layers = {0, 7};
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, o);
    EXPECT_TRUE(p.layers[0].excluded);
    EXPECT_EQ(p.included_layers().size(), 6u);
    o.excluded_layers = {0, 1, 2, 3, 4, 5, 6, 7};
    EXPECT_THROW(build_profile("accent", f.cross, f.within, *f.store, *f.encoder, o), ValidationError);
}

TEST(Profile, BadPairLists) {
    Fixture f(testing_support::small_config(9), 10, 5);
    EXPECT_THROW(build_profile("accent", {}, f.within, *f.store, *f.encoder), ValidationError);
    EXPECT_THROW(build_profile("accent", f.cross, {}, *f.store, *f.encoder), ValidationError);
    EXPECT_THROW(build_profile("accent", f.within, f.within, *f.store, *f.encoder), ValidationError);
    EXPECT_THROW(build_profile("accent", f.cross, f.cross, *f.store, *f.encoder), ValidationError);
}

TEST(Profile, FailedPairsAreCounted) {
    Fixture f(testing_support::small_config(10), 60, 30);
    const PickyEncoder picky(f.encoder, 3);
    auto frames = [&](const std::string& id) { return f.store->record(id)->layers[0].rows(); };
    std::size_t expected = 0;
    for (const auto* list : {&f.cross, &f.within})
        for (const auto& p : *list)
            expected += (frames(p.first_id) == 3 || frames(p.second_id) == 3) ? 1 : 0;
    ASSERT_GT(expected, 0u);
    ASSERT_LT(expected, f.cross.size() + f.within.size());
    const auto p = build_profile("accent", f.cross, f.within, *f.store, picky);
    EXPECT_EQ(p.failed_pairs, expected);
}

TEST(Profile, WorkerCountDoesNotMatter) {
    Fixture f(testing_support::small_config(11));
    ProfileOptions one, many;
    many.workers = 8;
    const auto a = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, one);
    const auto b = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, many);
    EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Profile, FlatAfterInjectionWithoutNoise) {
    auto cfg = testing_support::small_config(12);
    cfg.nonlinearity = Nonlinearity::none;
    cfg.planted_accent.speaker_noise_scale = 0.0;
    Fixture f(cfg);
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder);
    const std::size_t b = cfg.planted_accent.inject_last;
    for (std::size_t l = b + 1; l + 1 < cfg.layer_count; ++l) {
        EXPECT_NEAR(p.layers[l].mean_aas_cross, p.layers[b].mean_aas_cross, 1e-5) << l;
        EXPECT_NEAR(p.layers[l].mean_aas_within, p.layers[b].mean_aas_within, 1e-5) << l;
        EXPECT_NEAR(p.layers[l].sensitivity, p.layers[b].sensitivity, 1e-5) << l;
    }
}

TEST(Profile, PlantedBandIsFound) {
    auto cfg = testing_support::small_config(13);
    cfg.layer_count = 16;
    cfg.hidden_dim = 32;
    cfg.projector_dim = 32;
    cfg.nonlinearity = Nonlinearity::saturating;
    cfg.planted_accent.inject_first = 6;
    cfg.planted_accent.inject_last = 8;
    cfg.planted_accent.speaker_noise_scale = 0.2;
    cfg.planted_accent.num_speakers_per_group = 5;
    cfg.planted_accent.utterances_per_speaker = 20;
    cfg.planted_accent.transcript_pool_size = 40;
    cfg.min_frames = 8;
    cfg.max_frames = 16;
    Fixture f(cfg, 200, 100);
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder, {1.0, true, {}, 4});
    const auto top = p.argmax_layer();
    ASSERT_TRUE(top);
    EXPECT_GE(*top, 6u);
    EXPECT_LE(*top, 8u);
}

TEST(Profile, NullShiftHasNoStandoutLayer) {
    auto cfg = testing_support::small_config(14);
    cfg.planted_accent.shift_norm = 0.0;
    Fixture null_f(cfg);
    cfg.planted_accent.shift_norm = 1.0;
    Fixture planted_f(cfg);
    auto max_spec = [](const SensitivityProfile& p) {
        double m = 0.0;
        for (const auto& l : p.layers)
            if (!l.excluded)
                m = std::max(m, std::fabs(l.specificity));
        return m;
    };
    const auto pn = build_profile("accent", null_f.cross, null_f.within, *null_f.store, *null_f.encoder);
    const auto pp = build_profile("accent", planted_f.cross, planted_f.within, *planted_f.store, *planted_f.encoder);
    EXPECT_LT(max_spec(pn), 0.25 * max_spec(pp));
}

TEST(Profile, JsonAndCsv) {
    Fixture f(testing_support::small_config(15), 20, 10);
    const auto p = build_profile("accent", f.cross, f.within, *f.store, *f.encoder);
    const auto j = to_json(p);
    EXPECT_EQ(to_json(profile_from_json(j)), j);
    EXPECT_EQ(j.at("argmax_layer"), *p.argmax_layer());
    const auto csv = profile_csv(p);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,mean_cross,mean_within,spec,sensitivity,normalized,band");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    EXPECT_THROW(profile_from_json(json{{"accent", "x"}}), FormatError);
}
