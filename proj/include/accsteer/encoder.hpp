#ifndef ACCSTEER_ENCODER_HPP
#define ACCSTEER_ENCODER_HPP

#include "accsteer/activation_store.hpp"
#include "accsteer/error.hpp"
#include "accsteer/matrix.hpp"
#include "accsteer/random.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace accsteer {

enum class EncoderKind { synthetic, precomputed };
enum class Nonlinearity { none, saturating };

struct EncoderSpec {
    std::size_t layer_count = 0;
    std::size_t hidden_dim = 0;
    std::size_t projector_dim = 0;
    EncoderKind kind = EncoderKind::synthetic;

    void validate() const {
        if (layer_count < 2)
            throw ValidationError("encoder needs at least 2 layers, got " + std::to_string(layer_count));
        if (hidden_dim == 0 || projector_dim == 0)
            throw ValidationError("encoder hidden_dim and projector_dim must be positive");
    }
};

/// Forward-computation contract: resume a pass from the output of
/// `start_layer`, run the remaining layers and the projector.
///
/// `condition` is the utterance's group label. Real encoders ignore it; the
/// synthetic encoder uses it to re-apply its planted accent term in the
/// injection layers that come after the resume point, so resuming from a
/// stored layer reproduces the stored trajectory.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual const EncoderSpec& spec() const noexcept = 0;
    virtual bool can_resume() const noexcept = 0;
    virtual Matrix forward_from_layer(std::size_t start_layer, const Matrix& h, std::string_view condition = {}) const = 0;
};

/// Mean over time of forward_from_layer's output.
inline std::vector<double> project_and_pool(const Encoder& encoder, std::size_t start_layer, const Matrix& h,
                                            std::string_view condition = {}) {
    return time_mean(encoder.forward_from_layer(start_layer, h, condition));
}

/// Stands in for a real model whose activations were dumped offline. It
/// cannot run anything, so every resumption is a capability error.
class PrecomputedEncoder final : public Encoder {
public:
    explicit PrecomputedEncoder(EncoderSpec spec) : spec_(spec) { spec_.kind = EncoderKind::precomputed; }

    const EncoderSpec& spec() const noexcept override { return spec_; }
    bool can_resume() const noexcept override { return false; }
    Matrix forward_from_layer(std::size_t start_layer, const Matrix&, std::string_view) const override {
        throw CapabilityError("precomputed encoder cannot resume a forward pass from layer " +
                              std::to_string(start_layer));
    }

private:
    EncoderSpec spec_;
};

namespace detail {

/// n x n orthogonal matrix (row-major, double) from Gaussian entries by
/// modified Gram-Schmidt.
inline std::vector<double> random_orthogonal(std::size_t n, Rng& rng) {
    std::vector<double> q(n * n);
    for (auto& x : q)
        x = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        double* ri = &q[i * n];
        for (std::size_t j = 0; j < i; ++j) {
            const double* rj = &q[j * n];
            double proj = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                proj += ri[k] * rj[k];
            for (std::size_t k = 0; k < n; ++k)
                ri[k] -= proj * rj[k];
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            norm += ri[k] * ri[k];
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < n; ++k)
            ri[k] /= norm;
    }
    return q;
}

} // namespace detail

/// Group-conditioned shifts added to the hidden state in layers
/// first_layer..last_layer.
struct PlantedShifts {
    std::map<std::string, std::vector<float>, std::less<>> shifts; // group label -> D-vector
    std::size_t first_layer = 0;
    std::size_t last_layer = 0;
};

/// Residual stack h_{l} = h_{l-1} + g * phi(W_l h_{l-1}) [+ planted shift],
/// with orthogonal W_l, gain g = 1/sqrt(L), phi = identity or tanh, and a
/// linear projector with orthonormal rows (or columns when P > D).
///
/// Every layer maps float rows to float rows through double arithmetic, so
/// resuming from a stored float layer is bit-identical to the original run.
class SyntheticEncoder final : public Encoder {
public:
    using Planting = PlantedShifts;

    SyntheticEncoder(EncoderSpec spec, std::uint64_t seed, Nonlinearity nonlinearity, Planting planting = {})
        : spec_(spec), nonlinearity_(nonlinearity), planting_(std::move(planting)) {
        spec_.kind = EncoderKind::synthetic;
        spec_.validate();
        if (!planting_.shifts.empty()) {
            if (planting_.first_layer > planting_.last_layer || planting_.last_layer >= spec_.layer_count)
                throw ValidationError("injection layers must satisfy 0 <= first <= last < L");
            for (const auto& [label, shift] : planting_.shifts)
                if (shift.size() != spec_.hidden_dim)
                    throw ValidationError("shift vector for '" + label + "' has dim " + std::to_string(shift.size()));
        }
        gain_ = 1.0 / std::sqrt(static_cast<double>(spec_.layer_count));
        Rng rng = Rng(seed).fork("encoder-weights");
        const std::size_t d = spec_.hidden_dim;
        weights_.reserve(spec_.layer_count);
        for (std::size_t l = 0; l < spec_.layer_count; ++l) {
            Rng layer_rng = rng.fork(static_cast<std::uint64_t>(l));
            weights_.push_back(detail::random_orthogonal(d, layer_rng));
        }
        Rng proj_rng = rng.fork("projector");
        const std::size_t n = std::max(spec_.projector_dim, d);
        const auto q = detail::random_orthogonal(n, proj_rng);
        projector_.resize(spec_.projector_dim * d);
        for (std::size_t p = 0; p < spec_.projector_dim; ++p)
            for (std::size_t k = 0; k < d; ++k)
                projector_[p * d + k] = q[p * n + k];
    }

    const EncoderSpec& spec() const noexcept override { return spec_; }
    bool can_resume() const noexcept override { return true; }
    Nonlinearity nonlinearity() const noexcept { return nonlinearity_; }
    const Planting& planting() const noexcept { return planting_; }
    double gain() const noexcept { return gain_; }

    /// Planted shift for a group label, or nullptr.
    const std::vector<float>* shift_for(std::string_view condition) const {
        auto it = planting_.shifts.find(condition);
        return it == planting_.shifts.end() ? nullptr : &it->second;
    }

    bool injects_at(std::size_t layer) const noexcept {
        return !planting_.shifts.empty() && layer >= planting_.first_layer && layer <= planting_.last_layer;
    }

    /// One encoder layer.
    Matrix apply_layer(std::size_t layer, const Matrix& h, std::string_view condition = {}) const {
        check_width(h, spec_.hidden_dim, "layer input");
        const std::size_t d = spec_.hidden_dim;
        const auto& w = weights_[layer];
        const std::vector<float>* shift = injects_at(layer) ? shift_for(condition) : nullptr;
        Matrix out(h.rows(), d);
        std::vector<double> x(d);
        for (std::size_t t = 0; t < h.rows(); ++t) {
            const auto in = h.row(t);
            for (std::size_t k = 0; k < d; ++k)
                x[k] = in[k];
            auto dst = out.row(t);
            for (std::size_t i = 0; i < d; ++i) {
                double z = 0.0;
                const double* wi = &w[i * d];
                for (std::size_t k = 0; k < d; ++k)
                    z += wi[k] * x[k];
                if (nonlinearity_ == Nonlinearity::saturating)
                    z = std::tanh(z);
                double v = x[i] + gain_ * z;
                if (shift)
                    v += (*shift)[i];
                dst[i] = static_cast<float>(v);
            }
        }
        return out;
    }

    Matrix project(const Matrix& h) const {
        check_width(h, spec_.hidden_dim, "projector input");
        const std::size_t d = spec_.hidden_dim;
        const std::size_t p_dim = spec_.projector_dim;
        Matrix out(h.rows(), p_dim);
        for (std::size_t t = 0; t < h.rows(); ++t) {
            const auto in = h.row(t);
            auto dst = out.row(t);
            for (std::size_t p = 0; p < p_dim; ++p) {
                double z = 0.0;
                const double* wp = &projector_[p * d];
                for (std::size_t k = 0; k < d; ++k)
                    z += wp[k] * static_cast<double>(in[k]);
                dst[p] = static_cast<float>(z);
            }
        }
        return out;
    }

    /// All layer outputs for an input feature matrix (the input to layer 0).
    std::vector<Matrix> run(const Matrix& input, std::string_view condition = {}) const {
        std::vector<Matrix> layers;
        layers.reserve(spec_.layer_count);
        const Matrix* h = &input;
        for (std::size_t l = 0; l < spec_.layer_count; ++l) {
            layers.push_back(apply_layer(l, *h, condition));
            h = &layers.back();
        }
        return layers;
    }

    Matrix forward_from_layer(std::size_t start_layer, const Matrix& h, std::string_view condition = {}) const override {
        if (start_layer >= spec_.layer_count)
            throw ValidationError("start layer " + std::to_string(start_layer) + " out of range (L=" +
                                  std::to_string(spec_.layer_count) + ")");
        check_width(h, spec_.hidden_dim, "resumed activations");
        Matrix cur = h;
        for (std::size_t l = start_layer + 1; l < spec_.layer_count; ++l)
            cur = apply_layer(l, cur, condition);
        return project(cur);
    }

private:
    static void check_width(const Matrix& h, std::size_t d, const char* what) {
        if (h.cols() != d)
            throw DimensionMismatchError(std::string(what) + " has width " + std::to_string(h.cols()) + ", expected " +
                                         std::to_string(d));
    }

    EncoderSpec spec_;
    Nonlinearity nonlinearity_;
    Planting planting_;
    double gain_ = 0.0;
    std::vector<std::vector<double>> weights_; // L x (D x D)
    std::vector<double> projector_;            // P x D
};

} // namespace accsteer

#endif // ACCSTEER_ENCODER_HPP
