#ifndef ACCSTEER_SENSITIVITY_HPP
#define ACCSTEER_SENSITIVITY_HPP

// Layer-wise accent sensitivity.
//
// For a pair, one member (the source) is perturbed at layer l by a
// mean-shift vector that points from the source's group toward the other
// member's group, the pass is resumed through the projector, and the
// alignment score is
//
//   cos(pool(proj(source perturbed)), pool(proj(target)))
//     - cos(pool(proj(source)), pool(proj(target))).
//
// Cross pairs use group means over the pair set; within pairs use the two
// speakers' per-speaker means. Specificity is mean cross score minus mean
// within score; sensitivity is its positive part.

#include "accsteer/activation_store.hpp"
#include "accsteer/encoder.hpp"
#include "accsteer/error.hpp"
#include "accsteer/geometry.hpp"
#include "accsteer/pairing.hpp"
#include "accsteer/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace accsteer {

// ---------------------------------------------------------------------------
// Layer bands

enum class Band { early, middle, late, excluded };

inline const char* to_string(Band b) {
    switch (b) {
    case Band::early:
        return "early";
    case Band::middle:
        return "middle";
    case Band::late:
        return "late";
    case Band::excluded:
        return "excluded";
    }
    return "?";
}

/// early = [0, floor(15L/32)), middle = [floor(15L/32), floor(20L/32)),
/// late = up to L-2, and the final layer is excluded. L = 32 gives
/// 0-14 / 15-19 / 20-30 / 31.
inline std::vector<Band> classify_bands(std::size_t layer_count) {
    if (layer_count < 3)
        throw ValidationError("band classification needs at least 3 layers, got " + std::to_string(layer_count));
    const std::size_t middle_start = 15 * layer_count / 32;
    const std::size_t late_start = 20 * layer_count / 32;
    std::vector<Band> bands(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l) {
        if (l + 1 == layer_count)
            bands[l] = Band::excluded;
        else if (l < middle_start)
            bands[l] = Band::early;
        else if (l < late_start)
            bands[l] = Band::middle;
        else
            bands[l] = Band::late;
    }
    return bands;
}

// ---------------------------------------------------------------------------
// Alignment score

enum class Perturbed { first, second };

struct AASResult {
    UtterancePair pair;
    std::size_t layer = 0;
    Perturbed perturbed = Perturbed::second;
    std::string source_id; // the perturbed member
    std::string target_id;
    double aas = 0.0;

    /// Cross pairs only: which way the accent moved.
    std::string direction_label() const {
        if (pair.kind != PairKind::cross)
            return perturbed == Perturbed::first ? "first_to_second" : "second_to_first";
        return perturbed == Perturbed::second ? "accent_to_std" : "std_to_accent";
    }
};

/// Pooled projector outputs of unperturbed utterances resumed from a given
/// layer, memoized across pairs. Thread-safe.
class BaselineCache {
public:
    BaselineCache(const ActivationStore& store, const Encoder& encoder) : store_(store), encoder_(encoder) {}

    std::vector<double> get(const std::string& id, std::size_t layer) {
        const auto key = std::make_pair(id, layer);
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end())
                return it->second;
        }
        const auto rec = store_.record(id);
        auto pooled = project_and_pool(encoder_, layer, rec->layers.at(layer), store_.meta(id).accent_group);
        std::lock_guard lock(mutex_);
        return cache_.try_emplace(key, std::move(pooled)).first->second;
    }

private:
    const ActivationStore& store_;
    const Encoder& encoder_;
    std::mutex mutex_;
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> cache_;
};

namespace detail {

inline void require_resumable(const Encoder& encoder) {
    if (!encoder.can_resume())
        throw CapabilityError("alignment scores need an encoder that can resume from a hidden layer");
}

inline double aas_core(const std::string& source, const std::string& target, std::size_t layer, const SteeringVector& d,
                       double alpha, const ActivationStore& store, const Encoder& encoder, BaselineCache& baselines) {
    const auto rec = store.record(source);
    if (layer >= rec->layer_count())
        throw ValidationError("layer " + std::to_string(layer) + " out of range for '" + source + "'");
    const auto perturbed = project_and_pool(encoder, layer, perturb(rec->layers[layer], d, alpha),
                                            store.meta(source).accent_group);
    const auto base = baselines.get(source, layer);
    const auto tgt = baselines.get(target, layer);
    return cosine(perturbed, tgt) - cosine(base, tgt);
}

} // namespace detail

inline AASResult compute_aas(const UtterancePair& pair, std::size_t layer, const SteeringVector& d, double alpha,
                             const ActivationStore& store, const Encoder& encoder, BaselineCache& baselines,
                             Perturbed perturbed = Perturbed::second) {
    detail::require_resumable(encoder);
    if (d.layer != layer)
        throw ValidationError("steering vector is for layer " + std::to_string(d.layer) + ", not " +
                              std::to_string(layer));
    AASResult r;
    r.pair = pair;
    r.layer = layer;
    r.perturbed = perturbed;
    r.source_id = perturbed == Perturbed::first ? pair.first_id : pair.second_id;
    r.target_id = perturbed == Perturbed::first ? pair.second_id : pair.first_id;
    r.aas = detail::aas_core(r.source_id, r.target_id, layer, d, alpha, store, encoder, baselines);
    return r;
}

inline AASResult compute_aas(const UtterancePair& pair, std::size_t layer, const SteeringVector& d, double alpha,
                             const ActivationStore& store, const Encoder& encoder,
                             Perturbed perturbed = Perturbed::second) {
    BaselineCache baselines(store, encoder);
    return compute_aas(pair, layer, d, alpha, store, encoder, baselines, perturbed);
}

// ---------------------------------------------------------------------------
// Profiles

struct LayerSensitivity {
    std::size_t layer = 0;
    Band band = Band::early;
    bool excluded = false;
    double cross_forward = 0.0;  // accent member perturbed toward standard
    double cross_reverse = 0.0;  // standard member perturbed toward accent
    double within_forward = 0.0; // first member perturbed toward second speaker
    double within_reverse = 0.0;
    double mean_aas_cross = 0.0;
    double mean_aas_within = 0.0;
    double specificity = 0.0;
    double sensitivity = 0.0;
    double normalized_sensitivity = 0.0;
};

struct SensitivityProfile {
    std::string accent;
    std::size_t layer_count = 0;
    std::vector<LayerSensitivity> layers;
    std::set<std::size_t> excluded_layers;
    double alpha = 1.0;
    bool bidirectional = true;
    std::size_t n_cross = 0;
    std::size_t n_within = 0;
    std::size_t failed_pairs = 0;
    bool normalized = false;
    bool degenerate_range = false;
    bool all_zero = false;

    std::vector<std::size_t> included_layers() const {
        std::vector<std::size_t> out;
        for (const auto& l : layers)
            if (!l.excluded)
                out.push_back(l.layer);
        return out;
    }

    /// Layer with the largest sensitivity; ties go to the lowest index.
    std::optional<std::size_t> argmax_layer() const {
        std::optional<std::size_t> best;
        double best_v = 0.0;
        for (const auto& l : layers) {
            if (l.excluded)
                continue;
            if (!best || l.sensitivity > best_v) {
                best = l.layer;
                best_v = l.sensitivity;
            }
        }
        return best;
    }
};

struct ProfileOptions {
    double alpha = 1.0;
    bool bidirectional = true;
    /// Empty means {L-1}.
    std::set<std::size_t> excluded_layers;
    std::size_t workers = 1;
};

/// Min-max over included layers. A constant positive profile maps to all
/// ones (degenerate_range); an all-zero profile stays zero (all_zero).
inline SensitivityProfile normalize_profile(SensitivityProfile p) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& l : p.layers) {
        if (l.excluded)
            continue;
        lo = std::min(lo, l.sensitivity);
        hi = std::max(hi, l.sensitivity);
    }
    p.normalized = true;
    p.degenerate_range = false;
    p.all_zero = false;
    if (!(hi > 0.0)) {
        p.all_zero = true;
        for (auto& l : p.layers)
            l.normalized_sensitivity = 0.0;
        return p;
    }
    const double range = hi - lo;
    if (range == 0.0)
        p.degenerate_range = true;
    for (auto& l : p.layers) {
        if (l.excluded)
            l.normalized_sensitivity = 0.0;
        else
            l.normalized_sensitivity = range == 0.0 ? 1.0 : (l.sensitivity - lo) / range;
    }
    return p;
}

namespace detail {

/// Pooled reps for a set of utterances at every layer, loaded once.
class PooledTable {
public:
    PooledTable(const ActivationStore& store, std::vector<std::string> ids, std::size_t layer_count,
                std::size_t workers) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        ids_ = std::move(ids);
        reps_.resize(ids_.size());
        parallel_for(ids_.size(), workers, [&](std::size_t i) {
            const auto rec = store.record(ids_[i]);
            if (rec->layer_count() < layer_count)
                throw ShapeMismatchError("record '" + ids_[i] + "' has " + std::to_string(rec->layer_count()) +
                                         " layers, expected " + std::to_string(layer_count));
            reps_[i].reserve(layer_count);
            for (std::size_t l = 0; l < layer_count; ++l)
                reps_[i].push_back(mean_pool(*rec, l));
        });
        for (std::size_t i = 0; i < ids_.size(); ++i)
            pos_.emplace(ids_[i], i);
    }

    std::vector<PooledRep> at_layer(const std::vector<std::string>& ids, std::size_t layer) const {
        std::vector<PooledRep> out;
        out.reserve(ids.size());
        for (const auto& id : ids)
            out.push_back(reps_[pos_.at(id)][layer]);
        return out;
    }

private:
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> pos_;
    std::vector<std::vector<PooledRep>> reps_;
};

inline std::vector<std::string> sorted_unique(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace detail

/// Per-layer sensitivity profile of one accent.
inline SensitivityProfile build_profile(const std::string& accent, const std::vector<UtterancePair>& cross_pairs,
                                        const std::vector<UtterancePair>& within_pairs, const ActivationStore& store,
                                        const Encoder& encoder, const ProfileOptions& options = {}) {
    if (cross_pairs.empty() || within_pairs.empty())
        throw ValidationError("profile for '" + accent + "' needs non-empty cross and within pair lists");
    detail::require_resumable(encoder);
    for (const auto& p : cross_pairs)
        if (p.kind != PairKind::cross)
            throw ValidationError("cross pair list contains a within pair");
    for (const auto& p : within_pairs)
        if (p.kind != PairKind::within)
            throw ValidationError("within pair list contains a cross pair");

    const std::size_t layer_count = encoder.spec().layer_count;
    std::set<std::size_t> excluded = options.excluded_layers;
    if (excluded.empty())
        excluded.insert(layer_count - 1);
    std::vector<std::size_t> layers;
    for (std::size_t l = 0; l < layer_count; ++l)
        if (!excluded.contains(l))
            layers.push_back(l);
    if (layers.empty())
        throw ValidationError("every layer is excluded");

    const auto& manifest = store.manifest();
    const std::string& standard = manifest.standard_group;

    // Group members of the cross pairs.
    std::vector<std::string> standard_ids, accent_ids;
    for (const auto& p : cross_pairs) {
        standard_ids.push_back(p.first_id);
        accent_ids.push_back(p.second_id);
    }
    standard_ids = detail::sorted_unique(std::move(standard_ids));
    accent_ids = detail::sorted_unique(std::move(accent_ids));

    // Speakers of the within pairs and all of their utterances in the accent.
    std::map<std::string, std::vector<std::string>> speaker_utts;
    std::set<std::string> within_speakers;
    for (const auto& p : within_pairs) {
        within_speakers.insert(manifest.at(p.first_id).meta.speaker_id);
        within_speakers.insert(manifest.at(p.second_id).meta.speaker_id);
    }
    for (const auto* e : manifest.in_group(accent))
        if (within_speakers.contains(e->meta.speaker_id))
            speaker_utts[e->meta.speaker_id].push_back(e->meta.utterance_id);
    for (auto& [_, ids] : speaker_utts)
        std::sort(ids.begin(), ids.end());

    std::vector<std::string> all_ids = standard_ids;
    all_ids.insert(all_ids.end(), accent_ids.begin(), accent_ids.end());
    for (const auto& [_, ids] : speaker_utts)
        all_ids.insert(all_ids.end(), ids.begin(), ids.end());
    const detail::PooledTable table(store, all_ids, layer_count, options.workers);

    // Mean-shift vectors per layer. Each perturbs its source toward the other group.
    std::map<std::size_t, SteeringVector> toward_standard, toward_accent;
    std::map<std::size_t, std::map<std::string, std::vector<PooledRep>>> speaker_reps;
    for (std::size_t l : layers) {
        const auto s = table.at_layer(standard_ids, l);
        const auto a = table.at_layer(accent_ids, l);
        toward_standard.emplace(l, mean_shift(s, a, l, standard, accent));
        toward_accent.emplace(l, mean_shift(a, s, l, accent, standard));
        for (const auto& [spk, ids] : speaker_utts)
            speaker_reps[l][spk] = table.at_layer(ids, l);
    }

    const std::size_t n_dirs = options.bidirectional ? 2 : 1;
    const std::size_t n_pairs = cross_pairs.size() + within_pairs.size();
    // scores[pair][layer_slot][dir]
    std::vector<std::vector<double>> scores(n_pairs, std::vector<double>(layers.size() * n_dirs, 0.0));
    std::vector<char> failed(n_pairs, 0);
    BaselineCache baselines(store, encoder);

    parallel_for(n_pairs, options.workers, [&](std::size_t i) {
        const bool is_cross = i < cross_pairs.size();
        const UtterancePair& pair = is_cross ? cross_pairs[i] : within_pairs[i - cross_pairs.size()];
        try {
            for (std::size_t k = 0; k < layers.size(); ++k) {
                const std::size_t l = layers[k];
                if (is_cross) {
                    scores[i][k * n_dirs] = detail::aas_core(pair.second_id, pair.first_id, l, toward_standard.at(l),
                                                             options.alpha, store, encoder, baselines);
                    if (n_dirs == 2)
                        scores[i][k * n_dirs + 1] = detail::aas_core(pair.first_id, pair.second_id, l,
                                                                     toward_accent.at(l), options.alpha, store,
                                                                     encoder, baselines);
                } else {
                    const auto& sp = manifest.at(pair.first_id).meta.speaker_id;
                    const auto& sq = manifest.at(pair.second_id).meta.speaker_id;
                    const auto& reps = speaker_reps.at(l);
                    const auto fwd = mean_shift(reps.at(sq), reps.at(sp), l, sq, sp);
                    scores[i][k * n_dirs] = detail::aas_core(pair.first_id, pair.second_id, l, fwd, options.alpha,
                                                             store, encoder, baselines);
                    if (n_dirs == 2) {
                        const auto rev = mean_shift(reps.at(sp), reps.at(sq), l, sp, sq);
                        scores[i][k * n_dirs + 1] = detail::aas_core(pair.second_id, pair.first_id, l, rev,
                                                                     options.alpha, store, encoder, baselines);
                    }
                }
            }
        } catch (const CapabilityError&) {
            failed[i] = 1;
        }
    });

    SensitivityProfile profile;
    profile.accent = accent;
    profile.layer_count = layer_count;
    profile.excluded_layers = excluded;
    profile.alpha = options.alpha;
    profile.bidirectional = options.bidirectional;
    profile.n_cross = cross_pairs.size();
    profile.n_within = within_pairs.size();

    // Fixed-order reduction.
    const auto bands = classify_bands(layer_count);
    std::vector<double> sums(layers.size() * n_dirs * 2, 0.0);
    std::size_t ok_cross = 0, ok_within = 0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        if (failed[i]) {
            ++profile.failed_pairs;
            continue;
        }
        const bool is_cross = i < cross_pairs.size();
        (is_cross ? ok_cross : ok_within) += 1;
        const std::size_t kind = is_cross ? 0 : 1;
        for (std::size_t k = 0; k < layers.size(); ++k)
            for (std::size_t dir = 0; dir < n_dirs; ++dir)
                sums[(k * n_dirs + dir) * 2 + kind] += scores[i][k * n_dirs + dir];
    }
    if (ok_cross == 0 || ok_within == 0)
        throw CapabilityError("no pair of '" + accent + "' could be scored");

    for (std::size_t l = 0; l < layer_count; ++l) {
        LayerSensitivity row;
        row.layer = l;
        row.band = bands[l];
        row.excluded = excluded.contains(l);
        profile.layers.push_back(row);
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        auto& row = profile.layers[layers[k]];
        auto mean = [&](std::size_t dir, std::size_t kind) {
            return sums[(k * n_dirs + dir) * 2 + kind] / static_cast<double>(kind == 0 ? ok_cross : ok_within);
        };
        row.cross_forward = mean(0, 0);
        row.within_forward = mean(0, 1);
        if (n_dirs == 2) {
            row.cross_reverse = mean(1, 0);
            row.within_reverse = mean(1, 1);
            row.mean_aas_cross = 0.5 * (row.cross_forward + row.cross_reverse);
            row.mean_aas_within = 0.5 * (row.within_forward + row.within_reverse);
        } else {
            row.mean_aas_cross = row.cross_forward;
            row.mean_aas_within = row.within_forward;
        }
        row.specificity = row.mean_aas_cross - row.mean_aas_within;
        row.sensitivity = std::max(0.0, row.specificity);
    }
    return normalize_profile(std::move(profile));
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const SensitivityProfile& p) {
    json rows = json::array();
    for (const auto& l : p.layers)
        rows.push_back({{"layer", l.layer},
                        {"band", to_string(l.band)},
                        {"excluded", l.excluded},
                        {"cross_forward", l.cross_forward},
                        {"cross_reverse", l.cross_reverse},
                        {"within_forward", l.within_forward},
                        {"within_reverse", l.within_reverse},
                        {"mean_aas_cross", l.mean_aas_cross},
                        {"mean_aas_within", l.mean_aas_within},
                        {"specificity", l.specificity},
                        {"sensitivity", l.sensitivity},
                        {"normalized_sensitivity", l.normalized_sensitivity}});
    json j{{"accent", p.accent},
           {"layer_count", p.layer_count},
           {"excluded_layers", p.excluded_layers},
           {"alpha", p.alpha},
           {"bidirectional", p.bidirectional},
           {"bidirectional_reduction", "mean of per-direction mean AAS, before specificity"},
           {"normalization", "min-max over included layers"},
           {"n_cross", p.n_cross},
           {"n_within", p.n_within},
           {"failed_pairs", p.failed_pairs},
           {"degenerate_range", p.degenerate_range},
           {"all_zero", p.all_zero},
           {"layers", rows}};
    if (auto best = p.argmax_layer())
        j["argmax_layer"] = *best;
    return j;
}

inline Band band_from_string(const std::string& s) {
    for (Band b : {Band::early, Band::middle, Band::late, Band::excluded})
        if (s == to_string(b))
            return b;
    throw FormatError("unknown band '" + s + "'");
}

inline SensitivityProfile profile_from_json(const json& j) {
    SensitivityProfile p;
    try {
        p.accent = j.at("accent").get<std::string>();
        p.layer_count = j.at("layer_count").get<std::size_t>();
        p.excluded_layers = j.at("excluded_layers").get<std::set<std::size_t>>();
        p.alpha = j.at("alpha").get<double>();
        p.bidirectional = j.at("bidirectional").get<bool>();
        p.n_cross = j.at("n_cross").get<std::size_t>();
        p.n_within = j.at("n_within").get<std::size_t>();
        p.failed_pairs = j.value("failed_pairs", std::size_t{0});
        p.degenerate_range = j.value("degenerate_range", false);
        p.all_zero = j.value("all_zero", false);
        p.normalized = true;
        for (const auto& r : j.at("layers")) {
            LayerSensitivity l;
            l.layer = r.at("layer").get<std::size_t>();
            l.band = band_from_string(r.at("band").get<std::string>());
            l.excluded = r.at("excluded").get<bool>();
            l.cross_forward = r.value("cross_forward", 0.0);
            l.cross_reverse = r.value("cross_reverse", 0.0);
            l.within_forward = r.value("within_forward", 0.0);
            l.within_reverse = r.value("within_reverse", 0.0);
            l.mean_aas_cross = r.at("mean_aas_cross").get<double>();
            l.mean_aas_within = r.at("mean_aas_within").get<double>();
            l.specificity = r.at("specificity").get<double>();
            l.sensitivity = r.at("sensitivity").get<double>();
            l.normalized_sensitivity = r.at("normalized_sensitivity").get<double>();
            p.layers.push_back(l);
        }
    } catch (const json::exception& ex) {
        throw FormatError(std::string("malformed profile: ") + ex.what());
    }
    return p;
}

/// layer,mean_cross,mean_within,spec,sensitivity,normalized,band
inline std::string profile_csv(const SensitivityProfile& p) {
    std::ostringstream os;
    os.precision(10);
    os << "layer,mean_cross,mean_within,spec,sensitivity,normalized,band\n";
    for (const auto& l : p.layers) {
        if (l.excluded) {
            os << l.layer << ",,,,,," << to_string(Band::excluded) << '\n';
            continue;
        }
        os << l.layer << ',' << l.mean_aas_cross << ',' << l.mean_aas_within << ',' << l.specificity << ','
           << l.sensitivity << ',' << l.normalized_sensitivity << ',' << to_string(l.band) << '\n';
    }
    return os.str();
}

} // namespace accsteer

#endif // ACCSTEER_SENSITIVITY_HPP
