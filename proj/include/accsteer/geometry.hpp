#ifndef ACCSTEER_GEOMETRY_HPP
#define ACCSTEER_GEOMETRY_HPP

#include "accsteer/activation_store.hpp"
#include "accsteer/error.hpp"
#include "accsteer/matrix.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace accsteer {

/// A direction in one layer's hidden space plus where it came from.
struct SteeringVector {
    std::size_t layer = 0;
    std::vector<float> direction;
    bool is_normalized = false;
    std::string source_group;
    std::string target_group;
    std::size_t n_source = 0;
    std::size_t n_target = 0;
    double original_norm = 0.0;
    /// Free-form provenance (seed, dataset hash, split hash, orientation, ...).
    json provenance = json::object();

    std::size_t dim() const noexcept { return direction.size(); }
};

template <typename T>
concept Real = std::floating_point<T>;

template <Real T>
double l2_norm(std::span<const T> v) {
    double acc = 0.0;
    for (T x : v)
        acc += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(acc);
}

template <Real T, Real U>
double dot(std::span<const T> a, std::span<const U> b) {
    if (a.size() != b.size())
        throw DimensionMismatchError("dot: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

/// Cosine similarity clamped to [-1, 1]. Zero-norm inputs are an error.
template <Real T, Real U>
double cosine(std::span<const T> u, std::span<const U> v) {
    if (u.size() != v.size())
        throw DimensionMismatchError("cosine: sizes " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw ZeroDirectionError("cosine of a zero-norm vector is undefined");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

template <Real T, Real U>
double cosine(const std::vector<T>& u, const std::vector<U>& v) {
    return cosine(std::span<const T>(u), std::span<const U>(v));
}

namespace detail {

inline std::vector<double> group_mean(std::span<const PooledRep> reps, std::size_t layer, std::size_t dim,
                                      const char* which) {
    std::vector<double> acc(dim, 0.0);
    for (const auto& r : reps) {
        if (r.layer != layer)
            throw DimensionMismatchError(std::string("mean_shift: ") + which + " rep '" + r.utterance_id +
                                         "' is from layer " + std::to_string(r.layer) + ", expected " +
                                         std::to_string(layer));
        if (r.vector.size() != dim)
            throw DimensionMismatchError(std::string("mean_shift: ") + which + " rep '" + r.utterance_id + "' has dim " +
                                         std::to_string(r.vector.size()) + ", expected " + std::to_string(dim));
        for (std::size_t d = 0; d < dim; ++d)
            acc[d] += r.vector[d];
    }
    const double inv = 1.0 / static_cast<double>(reps.size());
    for (auto& v : acc)
        v *= inv;
    return acc;
}

} // namespace detail

/// mean(source) - mean(target) over pooled representations at one layer.
/// Accumulates in double in input order; stores float.
inline SteeringVector mean_shift(std::span<const PooledRep> source, std::span<const PooledRep> target, std::size_t layer,
                                 std::string source_group = {}, std::string target_group = {}) {
    if (source.empty() || target.empty())
        throw ValidationError("mean_shift needs non-empty groups (got " + std::to_string(source.size()) + " and " +
                              std::to_string(target.size()) + ")");
    const std::size_t dim = source.front().vector.size();
    const auto ms = detail::group_mean(source, layer, dim, "source");
    const auto mt = detail::group_mean(target, layer, dim, "target");

    SteeringVector v;
    v.layer = layer;
    v.direction.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
        v.direction[d] = static_cast<float>(ms[d] - mt[d]);
    v.source_group = std::move(source_group);
    v.target_group = std::move(target_group);
    v.n_source = source.size();
    v.n_target = target.size();
    v.original_norm = l2_norm(std::span<const float>(v.direction));
    return v;
}

/// Unit-norm copy; original_norm keeps the norm before scaling.
inline SteeringVector normalize(const SteeringVector& v) {
    const double norm = l2_norm(std::span<const float>(v.direction));
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw ZeroDirectionError("cannot normalize a zero direction at layer " + std::to_string(v.layer) +
                                 " (groups are indistinguishable there)");
    SteeringVector out = v;
    for (std::size_t d = 0; d < out.direction.size(); ++d)
        out.direction[d] = static_cast<float>(static_cast<double>(v.direction[d]) / norm);
    out.is_normalized = true;
    out.original_norm = v.is_normalized ? v.original_norm : norm;
    return out;
}

/// H + alpha * direction on every time step. With alpha == 0 the output is
/// bit-identical to the input.
inline Matrix perturb(const Matrix& h, std::span<const float> direction, double alpha) {
    if (direction.size() != h.cols())
        throw DimensionMismatchError("perturb: direction has dim " + std::to_string(direction.size()) +
                                     ", activations have " + std::to_string(h.cols()));
    if (alpha == 0.0)
        return h;
    Matrix out(h.rows(), h.cols());
    for (std::size_t t = 0; t < h.rows(); ++t) {
        const auto src = h.row(t);
        auto dst = out.row(t);
        for (std::size_t d = 0; d < h.cols(); ++d)
            dst[d] = static_cast<float>(static_cast<double>(src[d]) + alpha * static_cast<double>(direction[d]));
    }
    return out;
}

inline Matrix perturb(const Matrix& h, const SteeringVector& v, double alpha) {
    return perturb(h, std::span<const float>(v.direction), alpha);
}

// ---------------------------------------------------------------------------
// Serialization: binary "STRV" file plus a JSON provenance sidecar.
//
//   "STRV" | u32 version=1 | u32 layer | u32 D | u32 flags (bit0 = normalized)
//   | f64 original_norm | D x f32
//
// All little-endian.

inline constexpr std::uint32_t kSteeringVersion = 1;

inline json provenance_json(const SteeringVector& v) {
    json j = v.provenance;
    j["layer"] = v.layer;
    j["dim"] = v.dim();
    j["is_normalized"] = v.is_normalized;
    j["source_group"] = v.source_group;
    j["target_group"] = v.target_group;
    j["n_source"] = v.n_source;
    j["n_target"] = v.n_target;
    j["original_norm"] = v.original_norm;
    return j;
}

inline fs::path sidecar_path(const fs::path& path) {
    fs::path p = path;
    p += ".json";
    return p;
}

inline void write_steering_vector(const fs::path& path, const SteeringVector& v) {
    std::vector<std::byte> out;
    for (char c : {'S', 'T', 'R', 'V'})
        out.push_back(static_cast<std::byte>(c));
    detail::put_u32(out, kSteeringVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(v.layer));
    detail::put_u32(out, static_cast<std::uint32_t>(v.dim()));
    detail::put_u32(out, v.is_normalized ? 1u : 0u);
    const auto bits = std::bit_cast<std::uint64_t>(v.original_norm);
    detail::put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
    detail::put_u32(out, static_cast<std::uint32_t>(bits >> 32));
    for (float f : v.direction)
        detail::put_f32(out, f);
    detail::write_atomically(path, out);

    const std::string side = provenance_json(v).dump(2) + "\n";
    detail::write_atomically(sidecar_path(path), std::as_bytes(std::span(side.data(), side.size())));
}

inline SteeringVector read_steering_vector(const fs::path& path) {
    const auto bytes = detail::slurp(path);
    constexpr std::size_t header = 28;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "STRV", 4) != 0)
        throw BadMagicError(path.string() + " is not a steering vector file");
    if (bytes.size() < header)
        throw TruncatedError(path.string() + ": header truncated", header, bytes.size());
    const auto version = detail::get_u32(bytes.data() + 4);
    if (version != kSteeringVersion)
        throw UnsupportedVersionError(path.string() + ": unsupported steering vector version " + std::to_string(version),
                                      version);
    SteeringVector v;
    v.layer = detail::get_u32(bytes.data() + 8);
    const std::size_t dim = detail::get_u32(bytes.data() + 12);
    v.is_normalized = (detail::get_u32(bytes.data() + 16) & 1u) != 0;
    const std::uint64_t lo = detail::get_u32(bytes.data() + 20);
    const std::uint64_t hi = detail::get_u32(bytes.data() + 24);
    v.original_norm = std::bit_cast<double>(lo | (hi << 32));
    const std::size_t expected = header + 4 * dim;
    if (bytes.size() != expected) {
        if (bytes.size() < expected)
            throw TruncatedError(path.string() + ": payload truncated", expected, bytes.size());
        throw ShapeMismatchError(path.string() + ": trailing bytes after payload");
    }
    v.direction.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
        v.direction[d] = detail::get_f32(bytes.data() + header + 4 * d);

    const auto side = sidecar_path(path);
    if (fs::exists(side)) {
        std::ifstream in(side);
        json j = json::parse(in);
        v.source_group = j.value("source_group", std::string{});
        v.target_group = j.value("target_group", std::string{});
        v.n_source = j.value("n_source", std::size_t{0});
        v.n_target = j.value("n_target", std::size_t{0});
        for (const char* k : {"layer", "dim", "is_normalized", "source_group", "target_group", "n_source", "n_target",
                              "original_norm"})
            j.erase(k);
        v.provenance = std::move(j);
    }
    return v;
}

} // namespace accsteer

#endif // ACCSTEER_GEOMETRY_HPP
