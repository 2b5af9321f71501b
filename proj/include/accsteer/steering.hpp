#ifndef ACCSTEER_STEERING_HPP
#define ACCSTEER_STEERING_HPP

// Steering vector extraction and the single-layer (layer x alpha) sweep.

#include "accsteer/activation_store.hpp"
#include "accsteer/encoder.hpp"
#include "accsteer/error.hpp"
#include "accsteer/geometry.hpp"
#include "accsteer/pairing.hpp"
#include "accsteer/parallel.hpp"
#include "accsteer/sensitivity.hpp"
#include "accsteer/transcriber.hpp"
#include "accsteer/wer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

namespace accsteer {

/// Which way the extracted vector points. The default moves accented
/// activations toward the standard group.
enum class Orientation { accent_to_standard, standard_to_accent };

inline const char* to_string(Orientation o) {
    return o == Orientation::accent_to_standard ? "accent_to_standard" : "standard_to_accent";
}

inline Orientation orientation_from_string(const std::string& s) {
    if (s == "accent_to_standard")
        return Orientation::accent_to_standard;
    if (s == "standard_to_accent")
        return Orientation::standard_to_accent;
    throw ValidationError("unknown orientation '" + s + "'");
}

inline std::uint64_t split_hash(const SplitPlan& plan) { return fnv1a(to_json(plan).dump()); }

/// Normalized mean-shift over a seeded sample of the split's extraction pairs.
inline SteeringVector extract_steering_vector(const SplitPlan& split, std::size_t layer, const ActivationStore& store,
                                              std::size_t sample_count = 1000, std::uint64_t seed = 0,
                                              Orientation orientation = Orientation::accent_to_standard) {
    if (split.extraction_pairs.empty())
        throw ValidationError("split for '" + split.accent + "' has no extraction pairs");
    if (sample_count == 0)
        throw ValidationError("sample count must be positive");

    auto pairs = split.extraction_pairs;
    std::sort(pairs.begin(), pairs.end(), [](const UtterancePair& a, const UtterancePair& b) {
        return std::tie(a.first_id, a.second_id) < std::tie(b.first_id, b.second_id);
    });
    const auto sample = detail::sample_prefix(std::move(pairs), sample_count, seed, "steer:" + split.accent);

    std::vector<std::string> standard_ids, accent_ids;
    for (const auto& p : sample.pairs) {
        standard_ids.push_back(p.first_id);
        accent_ids.push_back(p.second_id);
    }
    standard_ids = detail::sorted_unique(std::move(standard_ids));
    accent_ids = detail::sorted_unique(std::move(accent_ids));

    auto pooled = [&](const std::vector<std::string>& ids) {
        std::vector<PooledRep> out;
        out.reserve(ids.size());
        for (const auto& id : ids)
            out.push_back(store.pooled(id, layer));
        return out;
    };
    const auto s = pooled(standard_ids);
    const auto a = pooled(accent_ids);
    const std::string& standard = store.manifest().standard_group;

    SteeringVector raw = orientation == Orientation::accent_to_standard ? mean_shift(s, a, layer, standard, split.accent)
                                                                        : mean_shift(a, s, layer, split.accent, standard);
    SteeringVector v = normalize(raw);
    v.provenance = {{"accent", split.accent},
                    {"orientation", to_string(orientation)},
                    {"seed", seed},
                    {"sample_count", sample_count},
                    {"pairs_used", sample.pairs.size()},
                    {"pairs_available", sample.available},
                    {"split_hash", hex64(split_hash(split))},
                    {"split_seed", split.seed}};
    return v;
}

/// Projector output after adding alpha * v to layer `layer` of a stored
/// utterance and resuming the pass. The stored activations are not touched.
inline Matrix steer_forward(const std::string& utterance_id, std::size_t layer, const SteeringVector& v, double alpha,
                            const ActivationStore& store, const Encoder& encoder) {
    if (!v.is_normalized)
        throw ValidationError("steering expects a unit-norm vector");
    if (v.layer != layer)
        throw ValidationError("vector was extracted at layer " + std::to_string(v.layer) + ", not " +
                              std::to_string(layer));
    if (!encoder.can_resume())
        throw CapabilityError("encoder cannot resume a forward pass; steering needs a runnable encoder");
    const auto rec = store.record(utterance_id);
    if (layer >= rec->layer_count())
        throw ValidationError("layer " + std::to_string(layer) + " out of range for '" + utterance_id + "'");
    return encoder.forward_from_layer(layer, perturb(rec->layers[layer], v, alpha),
                                      store.meta(utterance_id).accent_group);
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepConfig {
    std::string accent;
    std::vector<std::size_t> layers;          // empty = every layer
    std::vector<double> alphas{0.5, 1.0, 2.0, 5.0};
    std::map<std::size_t, SteeringVector> vectors; // one per swept layer
    std::vector<std::string> evaluation;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate(std::size_t layer_count) const {
        if (alphas.empty())
            throw ValidationError("alpha grid is empty");
        for (double a : alphas)
            if (!std::isfinite(a))
                throw ValidationError("alpha values must be finite");
        for (std::size_t l : layers)
            if (l >= layer_count)
                throw ValidationError("sweep layer " + std::to_string(l) + " out of range (L=" +
                                      std::to_string(layer_count) + ")");
        if (evaluation.empty())
            throw ValidationError("evaluation set is empty");
    }

    std::vector<std::size_t> resolved_layers(std::size_t layer_count) const {
        if (!layers.empty())
            return layers;
        std::vector<std::size_t> all(layer_count);
        for (std::size_t l = 0; l < layer_count; ++l)
            all[l] = l;
        return all;
    }
};

struct UtteranceOutcome {
    std::string utterance_id;
    WerScore base;
    WerScore steered;
    std::string hypothesis;
    bool failed = false;
};

struct SweepCell {
    std::size_t layer = 0;
    double alpha = 0.0;
    double wer_base = 0.0;
    double wer_steered = 0.0;
    double delta_wer = 0.0;
    std::size_t n_utterances = 0;
    std::size_t n_failed = 0;
    std::vector<UtteranceOutcome> utterances;
};

/// Unsteered result of one evaluation utterance.
struct BaseResult {
    std::string utterance_id;
    std::string hypothesis;
    WerScore score;
    bool failed = false;
};

struct SweepGrid {
    std::string accent;
    std::vector<std::size_t> layers;
    std::vector<double> alphas;
    std::vector<BaseResult> base;
    double wer_base = 0.0; // over utterances whose base transcription succeeded
    std::vector<SweepCell> cells; // layer-major, alphas in config order

    const SweepCell& cell(std::size_t layer, double alpha) const {
        for (const auto& c : cells)
            if (c.layer == layer && c.alpha == alpha)
                return c;
        throw ValidationError("no cell for layer " + std::to_string(layer) + ", alpha " + std::to_string(alpha));
    }
};

/// Pooled projector output of an unsteered utterance: the stored projector
/// frames when present, otherwise a resumption from the last layer. Empty
/// when neither is available (offline hypothesis tables do not need it).
inline std::vector<double> baseline_pooled(const std::string& id, const ActivationStore& store, const Encoder& encoder) {
    if (auto proj = store.projector(id))
        return time_mean(*proj);
    if (!encoder.can_resume())
        return {};
    const auto rec = store.record(id);
    const std::size_t last = rec->layer_count() - 1;
    return project_and_pool(encoder, last, rec->layers[last], store.meta(id).accent_group);
}

/// Base transcriptions for an evaluation set, computed once per sweep.
inline std::vector<BaseResult> transcribe_baseline(const std::vector<std::string>& ids, const ActivationStore& store,
                                                   const Encoder& encoder, const Transcriber& transcriber,
                                                   std::size_t workers = 1) {
    std::vector<BaseResult> out(ids.size());
    parallel_for(ids.size(), transcriber.concurrent_safe() ? workers : 1, [&](std::size_t i) {
        auto& r = out[i];
        r.utterance_id = ids[i];
        const auto& meta = store.meta(ids[i]);
        try {
            r.hypothesis = transcriber.transcribe(meta, baseline_pooled(ids[i], store, encoder));
            r.score = wer(meta.transcript, r.hypothesis);
        } catch (const TranscriberError&) {
            r.failed = true;
        }
    });
    return out;
}

namespace detail {

inline UtteranceOutcome steer_one(const BaseResult& base, std::size_t layer, const SteeringVector& v, double alpha,
                                  const ActivationStore& store, const Encoder& encoder, const Transcriber& transcriber) {
    UtteranceOutcome o;
    o.utterance_id = base.utterance_id;
    o.base = base.score;
    if (base.failed) {
        o.failed = true;
        return o;
    }
    const auto& meta = store.meta(base.utterance_id);
    try {
        const auto pooled = time_mean(steer_forward(base.utterance_id, layer, v, alpha, store, encoder));
        o.hypothesis = transcriber.transcribe(meta, pooled);
        o.steered = wer(meta.transcript, o.hypothesis);
    } catch (const TranscriberError&) {
        o.failed = true;
    }
    return o;
}

inline void finish_cell(SweepCell& c) {
    std::vector<WerScore> base, steered;
    for (const auto& u : c.utterances) {
        if (u.failed) {
            ++c.n_failed;
            continue;
        }
        base.push_back(u.base);
        steered.push_back(u.steered);
    }
    c.n_utterances = base.size();
    c.wer_base = corpus_wer(base);
    c.wer_steered = corpus_wer(steered);
    c.delta_wer = c.wer_steered - c.wer_base;
}

inline const SteeringVector& vector_for(const SweepConfig& cfg, std::size_t layer) {
    auto it = cfg.vectors.find(layer);
    if (it == cfg.vectors.end())
        throw ValidationError("no steering vector for layer " + std::to_string(layer));
    return it->second;
}

} // namespace detail

/// One (layer, alpha) cell against precomputed base results.
inline SweepCell run_cell(const SweepConfig& cfg, std::size_t layer, double alpha, const std::vector<BaseResult>& base,
                          const ActivationStore& store, const Encoder& encoder, const Transcriber& transcriber) {
    const auto& v = detail::vector_for(cfg, layer);
    SweepCell c;
    c.layer = layer;
    c.alpha = alpha;
    c.utterances.resize(base.size());
    parallel_for(base.size(), transcriber.concurrent_safe() ? cfg.workers : 1, [&](std::size_t i) {
        c.utterances[i] = detail::steer_one(base[i], layer, v, alpha, store, encoder, transcriber);
    });
    detail::finish_cell(c);
    return c;
}

inline SweepGrid run_sweep(const SweepConfig& cfg, const ActivationStore& store, const Encoder& encoder,
                           const Transcriber& transcriber) {
    const std::size_t layer_count = encoder.spec().layer_count;
    cfg.validate(layer_count);
    if (!encoder.can_resume())
        throw CapabilityError("sweeps need an encoder that can resume from a hidden layer");

    SweepGrid grid;
    grid.accent = cfg.accent;
    grid.layers = cfg.resolved_layers(layer_count);
    grid.alphas = cfg.alphas;
    for (std::size_t l : grid.layers)
        (void)detail::vector_for(cfg, l);

    grid.base = transcribe_baseline(cfg.evaluation, store, encoder, transcriber, cfg.workers);
    std::vector<WerScore> ok;
    for (const auto& b : grid.base)
        if (!b.failed)
            ok.push_back(b.score);
    grid.wer_base = corpus_wer(ok);

    const std::size_t n_utt = grid.base.size();
    const std::size_t n_cells = grid.layers.size() * grid.alphas.size();
    grid.cells.resize(n_cells);
    for (std::size_t k = 0; k < n_cells; ++k) {
        grid.cells[k].layer = grid.layers[k / grid.alphas.size()];
        grid.cells[k].alpha = grid.alphas[k % grid.alphas.size()];
        grid.cells[k].utterances.resize(n_utt);
    }
    parallel_for(n_cells * n_utt, transcriber.concurrent_safe() ? cfg.workers : 1, [&](std::size_t w) {
        auto& c = grid.cells[w / n_utt];
        const std::size_t i = w % n_utt;
        c.utterances[i] = detail::steer_one(grid.base[i], c.layer, cfg.vectors.at(c.layer), c.alpha, store, encoder,
                                            transcriber);
    });
    for (auto& c : grid.cells)
        detail::finish_cell(c);
    return grid;
}

// ---------------------------------------------------------------------------
// Band aggregates

struct BandSummary {
    Band band = Band::early;
    double alpha = 0.0;
    double mean_delta_wer = 0.0;
    std::size_t n_cells = 0;
};

/// Mean delta WER per (band, alpha) over the grid's cells.
inline std::vector<BandSummary> band_table(const SweepGrid& grid, std::size_t layer_count) {
    const auto bands = classify_bands(layer_count);
    std::vector<BandSummary> out;
    for (Band b : {Band::early, Band::middle, Band::late, Band::excluded})
        for (double a : grid.alphas) {
            BandSummary s;
            s.band = b;
            s.alpha = a;
            double sum = 0.0;
            for (const auto& c : grid.cells)
                if (c.alpha == a && c.layer < layer_count && bands[c.layer] == b) {
                    sum += c.delta_wer;
                    ++s.n_cells;
                }
            if (s.n_cells == 0)
                continue;
            s.mean_delta_wer = sum / static_cast<double>(s.n_cells);
            out.push_back(s);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const WerScore& s) {
    return {{"ref_words", s.ref_words}, {"S", s.substitutions}, {"I", s.insertions}, {"D", s.deletions}, {"wer", s.wer()}};
}

inline WerScore wer_score_from_json(const json& j) {
    WerScore s;
    s.ref_words = j.at("ref_words").get<std::size_t>();
    s.substitutions = j.at("S").get<std::size_t>();
    s.insertions = j.at("I").get<std::size_t>();
    s.deletions = j.at("D").get<std::size_t>();
    return s;
}

inline json to_json(const SweepGrid& g) {
    json base = json::array();
    for (const auto& b : g.base)
        base.push_back({{"utterance_id", b.utterance_id},
                        {"hypothesis", b.hypothesis},
                        {"failed", b.failed},
                        {"score", to_json(b.score)}});
    json cells = json::array();
    for (const auto& c : g.cells) {
        json utts = json::array();
        for (const auto& u : c.utterances)
            utts.push_back({{"utterance_id", u.utterance_id},
                            {"failed", u.failed},
                            {"hypothesis", u.hypothesis},
                            {"base", to_json(u.base)},
                            {"steered", to_json(u.steered)}});
        cells.push_back({{"layer", c.layer},
                         {"alpha", c.alpha},
                         {"wer_base", c.wer_base},
                         {"wer_steered", c.wer_steered},
                         {"delta_wer", c.delta_wer},
                         {"n_utterances", c.n_utterances},
                         {"n_failed", c.n_failed},
                         {"utterances", utts}});
    }
    return {{"accent", g.accent}, {"layers", g.layers}, {"alphas", g.alphas}, {"wer_base", g.wer_base},
            {"base", base},       {"cells", cells}};
}

inline SweepGrid grid_from_json(const json& j) {
    SweepGrid g;
    try {
        g.accent = j.at("accent").get<std::string>();
        g.layers = j.at("layers").get<std::vector<std::size_t>>();
        g.alphas = j.at("alphas").get<std::vector<double>>();
        g.wer_base = j.at("wer_base").get<double>();
        for (const auto& b : j.value("base", json::array()))
            g.base.push_back({b.at("utterance_id").get<std::string>(), b.value("hypothesis", std::string{}),
                              wer_score_from_json(b.at("score")), b.value("failed", false)});
        for (const auto& c : j.at("cells")) {
            SweepCell cell;
            cell.layer = c.at("layer").get<std::size_t>();
            cell.alpha = c.at("alpha").get<double>();
            cell.wer_base = c.at("wer_base").get<double>();
            cell.wer_steered = c.at("wer_steered").get<double>();
            cell.delta_wer = c.at("delta_wer").get<double>();
            cell.n_utterances = c.at("n_utterances").get<std::size_t>();
            cell.n_failed = c.value("n_failed", std::size_t{0});
            for (const auto& u : c.value("utterances", json::array()))
                cell.utterances.push_back({u.at("utterance_id").get<std::string>(), wer_score_from_json(u.at("base")),
                                           wer_score_from_json(u.at("steered")), u.value("hypothesis", std::string{}),
                                           u.value("failed", false)});
            g.cells.push_back(std::move(cell));
        }
    } catch (const json::exception& ex) {
        throw FormatError(std::string("malformed sweep grid: ") + ex.what());
    }
    return g;
}

/// layer,alpha,wer_base,wer_steered,delta_wer,n_utterances,n_failed
inline std::string grid_csv(const SweepGrid& g) {
    std::ostringstream os;
    os.precision(10);
    os << "layer,alpha,wer_base,wer_steered,delta_wer,n_utterances,n_failed\n";
    for (const auto& c : g.cells)
        os << c.layer << ',' << c.alpha << ',' << c.wer_base << ',' << c.wer_steered << ',' << c.delta_wer << ','
           << c.n_utterances << ',' << c.n_failed << '\n';
    return os.str();
}

/// Plot-ready long format: layer,alpha,delta_wer.
inline std::string long_format_csv(const SweepGrid& g) {
    std::ostringstream os;
    os.precision(10);
    os << "layer,alpha,delta_wer\n";
    for (const auto& c : g.cells)
        os << c.layer << ',' << c.alpha << ',' << c.delta_wer << '\n';
    return os.str();
}

inline std::string band_table_csv(const std::vector<BandSummary>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "band,alpha,mean_delta_wer,n_cells\n";
    for (const auto& r : rows)
        os << to_string(r.band) << ',' << r.alpha << ',' << r.mean_delta_wer << ',' << r.n_cells << '\n';
    return os.str();
}

} // namespace accsteer

#endif // ACCSTEER_STEERING_HPP
