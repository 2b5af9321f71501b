#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace accsteer;
using testing_support::TempDir;

namespace {

PooledRep rep(std::string id, std::vector<float> v, std::size_t layer = 0) {
    return PooledRep{std::move(id), layer, std::move(v)};
}

std::vector<PooledRep> random_group(Rng& rng, std::size_t n, std::size_t dim, std::size_t layer, double offset) {
    std::vector<PooledRep> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (auto& x : v)
            x = static_cast<float>(offset + rng.normal());
        out.push_back(rep("u" + std::to_string(i), std::move(v), layer));
    }
    return out;
}

// Two-pass mean in long double, independent of the library accumulation.
std::vector<long double> oracle_mean(const std::vector<PooledRep>& g) {
    std::vector<long double> m(g.front().vector.size(), 0.0L);
    for (const auto& r : g)
        for (std::size_t d = 0; d < m.size(); ++d)
            m[d] += r.vector[d];
    for (auto& x : m)
        x /= static_cast<long double>(g.size());
    return m;
}

} // namespace

TEST(MeanShift, HandExample) {
    const std::vector<PooledRep> s{rep("a", {1, 0}), rep("b", {3, 0})};
    const std::vector<PooledRep> t{rep("c", {0, 1}), rep("d", {0, 3})};
    const auto v = mean_shift(s, t, 0, "src", "tgt");
    ASSERT_EQ(v.dim(), 2u);
    EXPECT_FLOAT_EQ(v.direction[0], 2.0f);
    EXPECT_FLOAT_EQ(v.direction[1], -2.0f);
    EXPECT_FALSE(v.is_normalized);
    EXPECT_EQ(v.n_source, 2u);
    EXPECT_EQ(v.n_target, 2u);
    EXPECT_EQ(v.source_group, "src");
}

TEST(MeanShift, IdenticalGroupsGiveZero) {
    Rng rng(3);
    const auto g = random_group(rng, 7, 5, 2, 0.0);
    const auto v = mean_shift(g, g, 2);
    for (float x : v.direction)
        EXPECT_EQ(x, 0.0f);
    EXPECT_THROW(normalize(v), ZeroDirectionError);
}

TEST(MeanShift, Singletons) {
    const std::vector<PooledRep> s{rep("a", {1.5f, -2.0f, 4.0f})};
    const std::vector<PooledRep> t{rep("b", {0.5f, 1.0f, -1.0f})};
    const auto v = mean_shift(s, t, 0);
    EXPECT_FLOAT_EQ(v.direction[0], 1.0f);
    EXPECT_FLOAT_EQ(v.direction[1], -3.0f);
    EXPECT_FLOAT_EQ(v.direction[2], 5.0f);
}

TEST(MeanShift, Errors) {
    const std::vector<PooledRep> s{rep("a", {1, 2})};
    const std::vector<PooledRep> none;
    EXPECT_THROW(mean_shift(s, none, 0), ValidationError);
    EXPECT_THROW(mean_shift(none, s, 0), ValidationError);
    const std::vector<PooledRep> wide{rep("b", {1, 2, 3})};
    EXPECT_THROW(mean_shift(s, wide, 0), DimensionMismatchError);
    const std::vector<PooledRep> other_layer{rep("c", {1, 2}, 4)};
    EXPECT_THROW(mean_shift(s, other_layer, 0), DimensionMismatchError);
}

TEST(MeanShift, MatchesOracleOnRandomInputs) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t dim = 1 + rng.below(40);
        const auto a = random_group(rng, 1 + rng.below(30), dim, 3, rng.normal() * 5);
        const auto b = random_group(rng, 1 + rng.below(30), dim, 3, rng.normal() * 5);
        const auto v = mean_shift(a, b, 3);
        const auto ma = oracle_mean(a), mb = oracle_mean(b);
        for (std::size_t d = 0; d < dim; ++d)
            ASSERT_NEAR(v.direction[d], static_cast<double>(ma[d] - mb[d]), 1e-6);
    }
}

TEST(MeanShift, Antisymmetric) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_group(rng, 9, 12, 0, 1.0);
        const auto b = random_group(rng, 4, 12, 0, -1.0);
        const auto ab = mean_shift(a, b, 0);
        const auto ba = mean_shift(b, a, 0);
        for (std::size_t d = 0; d < 12; ++d)
            ASSERT_EQ(ab.direction[d], -ba.direction[d]);
    }
}

TEST(MeanShift, TranslationEquivariant) {
    Rng rng(8);
    auto a = random_group(rng, 10, 6, 0, 0.0);
    auto b = random_group(rng, 13, 6, 0, 0.5);
    const auto before = mean_shift(a, b, 0);
    std::vector<float> c(6);
    for (auto& x : c)
        x = static_cast<float>(rng.normal());
    for (auto* g : {&a, &b})
        for (auto& r : *g)
            for (std::size_t d = 0; d < 6; ++d)
                r.vector[d] += c[d];
    const auto after = mean_shift(a, b, 0);
    for (std::size_t d = 0; d < 6; ++d)
        EXPECT_NEAR(after.direction[d], before.direction[d], 1e-5);
}

TEST(Normalize, HandExample) {
    SteeringVector v;
    v.direction = {3.0f, 4.0f};
    const auto n = normalize(v);
    EXPECT_NEAR(n.direction[0], 0.6, 1e-7);
    EXPECT_NEAR(n.direction[1], 0.8, 1e-7);
    EXPECT_DOUBLE_EQ(n.original_norm, 5.0);
    EXPECT_TRUE(n.is_normalized);
}

TEST(Normalize, IdempotentAndKeepsDirection) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        SteeringVector v;
        v.direction.resize(1 + rng.below(64));
        for (auto& x : v.direction)
            x = static_cast<float>(rng.normal() * 10);
        const auto n = normalize(v);
        EXPECT_NEAR(l2_norm(std::span<const float>(n.direction)), 1.0, 1e-6);
        EXPECT_NEAR(cosine(v.direction, n.direction), 1.0, 1e-6);
        const auto nn = normalize(n);
        for (std::size_t d = 0; d < n.dim(); ++d)
            ASSERT_NEAR(nn.direction[d], n.direction[d], 1e-6);
        EXPECT_DOUBLE_EQ(nn.original_norm, n.original_norm);
    }
}

TEST(Normalize, ZeroVectorRejected) {
    SteeringVector v;
    v.direction = {0.0f, 0.0f, 0.0f};
    EXPECT_THROW(normalize(v), ZeroDirectionError);
}

TEST(Cosine, BasicCases) {
    const std::vector<float> u{1, 2, 3};
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-12);
    EXPECT_NEAR(cosine(std::vector<float>{1, 0}, std::vector<float>{0, 1}), 0.0, 1e-12);
    EXPECT_NEAR(cosine(std::vector<float>{1, 1}, std::vector<float>{-1, -1}), -1.0, 1e-12);
    EXPECT_THROW(cosine(std::vector<float>{0, 0}, std::vector<float>{1, 0}), ZeroDirectionError);
    EXPECT_THROW(cosine(std::vector<float>{1, 0}, std::vector<float>{1, 0, 0}), DimensionMismatchError);
}

TEST(Cosine, StaysInRange) {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> a(1 + rng.below(20));
        for (auto& x : a)
            x = rng.normal() * 1e3;
        std::vector<double> b = a;
        for (auto& x : b)
            x *= 1.0 + 1e-12 * rng.normal();
        const double c = cosine(a, b);
        ASSERT_LE(c, 1.0);
        ASSERT_GE(c, -1.0);
    }
}

TEST(Perturb, HandExample) {
    Matrix h(1, 2, std::vector<float>{1, 1});
    const auto out = perturb(h, std::vector<float>{1, 0}, 2.0);
    EXPECT_FLOAT_EQ(out(0, 0), 3.0f);
    EXPECT_FLOAT_EQ(out(0, 1), 1.0f);
    EXPECT_FLOAT_EQ(h(0, 0), 1.0f);
}

TEST(Perturb, ZeroAlphaIsIdentityAndAdditive) {
    Rng rng(4);
    Matrix h(5, 7);
    for (auto& x : h.flat())
        x = static_cast<float>(rng.normal());
    std::vector<float> d(7);
    for (auto& x : d)
        x = static_cast<float>(rng.normal());
    EXPECT_TRUE(perturb(h, d, 0.0).bit_equal(h));
    const auto twice = perturb(perturb(h, d, 0.7), d, 1.8);
    const auto once = perturb(h, d, 2.5);
    for (std::size_t i = 0; i < h.size(); ++i)
        ASSERT_NEAR(twice.flat()[i], once.flat()[i], 1e-5);
    EXPECT_THROW(perturb(h, std::vector<float>(6), 1.0), DimensionMismatchError);
}

TEST(Perturb, MovesPooledMeanByShift) {
    Rng rng(21);
    std::vector<ActivationRecord> src;
    std::vector<PooledRep> src_reps, tgt_reps;
    for (int i = 0; i < 6; ++i) {
        for (int g = 0; g < 2; ++g) {
            ActivationRecord r;
            r.utterance_id = (g ? "t" : "s") + std::to_string(i);
            Matrix m(3 + rng.below(5), 4);
            for (auto& x : m.flat())
                x = static_cast<float>(rng.normal() + (g ? 1.0 : -1.0));
            r.layers.push_back(m);
            (g ? tgt_reps : src_reps).push_back(mean_pool(r, 0));
            if (!g)
                src.push_back(r);
        }
    }
    const auto d = mean_shift(tgt_reps, src_reps, 0);
    std::vector<PooledRep> moved;
    for (auto r : src) {
        r.layers[0] = perturb(r.layers[0], d, 1.0);
        moved.push_back(mean_pool(r, 0));
    }
    const auto residual = mean_shift(tgt_reps, moved, 0);
    for (float x : residual.direction)
        EXPECT_NEAR(x, 0.0, 1e-5);
}

TEST(SteeringFile, RoundTrip) {
    TempDir dir("strv");
    SteeringVector v;
    v.layer = 17;
    v.direction = {0.25f, -1.5f, 3.0f, 1e-7f};
    v.source_group = "scottish";
    v.target_group = "standard";
    v.n_source = 12;
    v.n_target = 9;
    v = normalize(v);
    v.provenance["seed"] = 42;
    const auto path = dir / "v.strv";
    write_steering_vector(path, v);
    const auto back = read_steering_vector(path);
    EXPECT_EQ(back.layer, 17u);
    EXPECT_TRUE(back.is_normalized);
    EXPECT_EQ(back.original_norm, v.original_norm);
    ASSERT_EQ(back.dim(), 4u);
    for (std::size_t d = 0; d < 4; ++d)
        EXPECT_EQ(back.direction[d], v.direction[d]);
    EXPECT_EQ(back.source_group, "scottish");
    EXPECT_EQ(back.target_group, "standard");
    EXPECT_EQ(back.n_source, 12u);
    EXPECT_EQ(back.n_target, 9u);
    EXPECT_EQ(back.provenance.at("seed"), 42);
    EXPECT_EQ(fs::file_size(path), 28u + 16u);
}

TEST(SteeringFile, Corruption) {
    TempDir dir("strv_bad");
    SteeringVector v;
    v.direction = {1.0f, 2.0f};
    const auto path = dir / "v.strv";
    write_steering_vector(path, v);
    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << b;
    };

    write(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_steering_vector(path), TruncatedError);
    write(bytes + "xx");
    EXPECT_THROW(read_steering_vector(path), ShapeMismatchError);
    std::string magic = bytes;
    magic[0] = 'X';
    write(magic);
    EXPECT_THROW(read_steering_vector(path), BadMagicError);
    std::string version = bytes;
    version[4] = 9;
    write(version);
    try {
        read_steering_vector(path);
        FAIL() << "expected a version error";
    } catch (const UnsupportedVersionError& e) {
        EXPECT_EQ(e.version(), 9u);
    }
}
