#ifndef ACCSTEER_PAIRING_HPP
#define ACCSTEER_PAIRING_HPP

#include "accsteer/activation_store.hpp"
#include "accsteer/error.hpp"
#include "accsteer/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace accsteer {

enum class PairKind { cross, within };

inline const char* to_string(PairKind k) { return k == PairKind::cross ? "cross" : "within"; }

/// Cross pairs: first = standard-group utterance, second = accented one,
/// same normalized transcript. Within pairs: two accented utterances by
/// different speakers.
struct UtterancePair {
    PairKind kind = PairKind::cross;
    std::string first_id;
    std::string second_id;
    std::string shared_transcript; // cross pairs only
    std::string accent_group;

    friend bool operator==(const UtterancePair&, const UtterancePair&) = default;
};

struct PairSet {
    std::vector<UtterancePair> pairs;
    std::size_t requested = 0;
    std::size_t available = 0;
    bool shortfall = false;
};

namespace detail {

inline void require_accent(const DatasetManifest& m, const std::string& accent) {
    if (!m.has_group(accent) || accent == m.standard_group)
        throw PairingError("unknown accent group '" + accent + "'");
}

/// Shuffle the sorted candidates with a seeded PRNG and keep a prefix.
inline PairSet sample_prefix(std::vector<UtterancePair> candidates, std::size_t count, std::uint64_t seed,
                             std::string_view stream) {
    PairSet out;
    out.requested = count;
    out.available = candidates.size();
    Rng rng = Rng(seed).fork(stream);
    rng.shuffle(candidates);
    if (candidates.size() > count)
        candidates.resize(count);
    out.shortfall = out.available < count;
    out.pairs = std::move(candidates);
    return out;
}

/// Every (standard, accented) combination sharing a transcript, in sorted
/// id order. `accent_filter` restricts the accented side.
template <typename Filter>
std::vector<UtterancePair> cross_candidates(const DatasetManifest& m, const std::string& accent, Filter&& accent_filter) {
    std::map<std::string, std::vector<std::string>> standard_by_text;
    for (const auto* e : m.in_group(m.standard_group))
        standard_by_text[e->meta.transcript].push_back(e->meta.utterance_id);
    for (auto& [_, ids] : standard_by_text)
        std::sort(ids.begin(), ids.end());

    std::vector<const ManifestEntry*> accented = m.in_group(accent);
    std::sort(accented.begin(), accented.end(),
              [](const auto* a, const auto* b) { return a->meta.utterance_id < b->meta.utterance_id; });

    std::vector<UtterancePair> out;
    for (const auto* a : accented) {
        if (!accent_filter(*a))
            continue;
        auto it = standard_by_text.find(a->meta.transcript);
        if (it == standard_by_text.end())
            continue;
        for (const auto& s : it->second)
            out.push_back({PairKind::cross, s, a->meta.utterance_id, a->meta.transcript, accent});
    }
    return out;
}

} // namespace detail

inline PairSet build_cross_pairs(const DatasetManifest& m, const std::string& accent, std::size_t count,
                                 std::uint64_t seed) {
    detail::require_accent(m, accent);
    if (count == 0)
        throw ValidationError("pair count must be positive");
    if (m.in_group(m.standard_group).empty())
        throw PairingError("standard group '" + m.standard_group + "' has no utterances");
    auto candidates = detail::cross_candidates(m, accent, [](const ManifestEntry&) { return true; });
    if (candidates.empty())
        throw PairingError("no transcripts shared between '" + m.standard_group + "' and '" + accent + "'");
    return detail::sample_prefix(std::move(candidates), count, seed, "cross:" + accent);
}

inline PairSet build_within_pairs(const DatasetManifest& m, const std::string& accent, std::size_t count,
                                  std::uint64_t seed) {
    detail::require_accent(m, accent);
    if (count == 0)
        throw ValidationError("pair count must be positive");
    const auto speakers = m.speakers(accent);
    if (speakers.size() < 2)
        throw PairingError("accent '" + accent + "' has " + std::to_string(speakers.size()) +
                           " speaker(s); within pairs need at least 2");

    auto entries = m.in_group(accent);
    std::sort(entries.begin(), entries.end(),
              [](const auto* a, const auto* b) { return a->meta.utterance_id < b->meta.utterance_id; });
    std::vector<UtterancePair> candidates;
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j)
            if (entries[i]->meta.speaker_id != entries[j]->meta.speaker_id)
                candidates.push_back(
                    {PairKind::within, entries[i]->meta.utterance_id, entries[j]->meta.utterance_id, {}, accent});
    return detail::sample_prefix(std::move(candidates), count, seed, "within:" + accent);
}

// ---------------------------------------------------------------------------
// Extraction / evaluation split

struct SplitPlan {
    std::string accent;
    std::vector<std::string> extraction_speakers;
    std::vector<std::string> evaluation_speakers;
    std::vector<UtterancePair> extraction_pairs;
    std::vector<std::string> evaluation_utterances;
    std::uint64_t seed = 0;
    double extraction_fraction = 0.8;
    std::size_t requested_pairs = 0;
    std::size_t available_pairs = 0;
    /// Evaluation utterances removed because their transcript is used by an extraction pair.
    std::size_t dropped_for_overlap = 0;
};

/// Speaker-level split of one accent. Extraction pairs are cross pairs whose
/// accented member comes from an extraction speaker; evaluation keeps the
/// evaluation speakers' utterances whose transcript no extraction pair uses.
inline SplitPlan make_split(const DatasetManifest& m, const std::string& accent, double extraction_fraction,
                            std::uint64_t seed, std::size_t pair_count = 1000) {
    detail::require_accent(m, accent);
    if (!(extraction_fraction > 0.0 && extraction_fraction < 1.0))
        throw ValidationError("extraction fraction must lie in (0, 1); got " + std::to_string(extraction_fraction) +
                              " (the evaluation set would be empty)");
    if (pair_count == 0)
        throw ValidationError("pair count must be positive");

    auto speakers = m.speakers(accent);
    if (speakers.size() < 2)
        throw PairingError("accent '" + accent + "' needs at least 2 speakers to split, has " +
                           std::to_string(speakers.size()));

    Rng rng = Rng(seed).fork("split:" + accent);
    rng.shuffle(speakers);
    const auto n = speakers.size();
    auto n_extract = static_cast<std::size_t>(std::floor(extraction_fraction * static_cast<double>(n) + 1e-9));
    n_extract = std::clamp<std::size_t>(n_extract, 1, n - 1);

    SplitPlan plan;
    plan.accent = accent;
    plan.seed = seed;
    plan.extraction_fraction = extraction_fraction;
    plan.extraction_speakers.assign(speakers.begin(), speakers.begin() + static_cast<std::ptrdiff_t>(n_extract));
    plan.evaluation_speakers.assign(speakers.begin() + static_cast<std::ptrdiff_t>(n_extract), speakers.end());
    std::sort(plan.extraction_speakers.begin(), plan.extraction_speakers.end());
    std::sort(plan.evaluation_speakers.begin(), plan.evaluation_speakers.end());

    const std::set<std::string> extract_set(plan.extraction_speakers.begin(), plan.extraction_speakers.end());
    auto candidates = detail::cross_candidates(
        m, accent, [&](const ManifestEntry& e) { return extract_set.contains(e.meta.speaker_id); });
    if (candidates.empty())
        throw PairingError("extraction speakers of '" + accent + "' share no transcript with the standard group");
    auto sampled = detail::sample_prefix(std::move(candidates), pair_count, seed, "extract:" + accent);
    plan.extraction_pairs = std::move(sampled.pairs);
    plan.requested_pairs = sampled.requested;
    plan.available_pairs = sampled.available;

    std::set<std::string> used_text;
    for (const auto& p : plan.extraction_pairs)
        used_text.insert(p.shared_transcript);

    const std::set<std::string> eval_set(plan.evaluation_speakers.begin(), plan.evaluation_speakers.end());
    std::size_t considered = 0;
    for (const auto* e : m.in_group(accent)) {
        if (!eval_set.contains(e->meta.speaker_id))
            continue;
        ++considered;
        if (used_text.contains(e->meta.transcript))
            ++plan.dropped_for_overlap;
        else
            plan.evaluation_utterances.push_back(e->meta.utterance_id);
    }
    std::sort(plan.evaluation_utterances.begin(), plan.evaluation_utterances.end());
    if (plan.evaluation_utterances.empty())
        throw PairingError("transcript-overlap filter removed all " + std::to_string(considered) +
                           " evaluation utterances of '" + accent + "' (" + std::to_string(plan.extraction_pairs.size()) +
                           " extraction pairs over " + std::to_string(used_text.size()) + " transcripts)");
    return plan;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const UtterancePair& p) {
    json j{{"kind", to_string(p.kind)}, {"first", p.first_id}, {"second", p.second_id}, {"accent", p.accent_group}};
    if (p.kind == PairKind::cross)
        j["transcript"] = p.shared_transcript;
    return j;
}

inline UtterancePair pair_from_json(const json& j) {
    UtterancePair p;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "cross" && kind != "within")
        throw FormatError("unknown pair kind '" + kind + "'");
    p.kind = kind == "cross" ? PairKind::cross : PairKind::within;
    p.first_id = j.at("first").get<std::string>();
    p.second_id = j.at("second").get<std::string>();
    p.accent_group = j.at("accent").get<std::string>();
    p.shared_transcript = j.value("transcript", std::string{});
    return p;
}

inline json to_json(const PairSet& s) {
    json pairs = json::array();
    for (const auto& p : s.pairs)
        pairs.push_back(to_json(p));
    return {{"requested", s.requested}, {"available", s.available}, {"shortfall", s.shortfall}, {"pairs", pairs}};
}

inline PairSet pair_set_from_json(const json& j) {
    PairSet s;
    s.requested = j.at("requested").get<std::size_t>();
    s.available = j.at("available").get<std::size_t>();
    s.shortfall = j.at("shortfall").get<bool>();
    for (const auto& p : j.at("pairs"))
        s.pairs.push_back(pair_from_json(p));
    return s;
}

inline json to_json(const SplitPlan& plan) {
    json pairs = json::array();
    for (const auto& p : plan.extraction_pairs)
        pairs.push_back(json::array({p.first_id, p.second_id, p.shared_transcript}));
    return {{"accent", plan.accent},
            {"seed", plan.seed},
            {"extraction_fraction", plan.extraction_fraction},
            {"extraction_speakers", plan.extraction_speakers},
            {"evaluation_speakers", plan.evaluation_speakers},
            {"requested_pairs", plan.requested_pairs},
            {"available_pairs", plan.available_pairs},
            {"dropped_for_overlap", plan.dropped_for_overlap},
            {"extraction_pairs", pairs},
            {"evaluation_utterances", plan.evaluation_utterances}};
}

inline SplitPlan split_from_json(const json& j) {
    SplitPlan plan;
    try {
        plan.accent = j.at("accent").get<std::string>();
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.extraction_fraction = j.at("extraction_fraction").get<double>();
        plan.extraction_speakers = j.at("extraction_speakers").get<std::vector<std::string>>();
        plan.evaluation_speakers = j.at("evaluation_speakers").get<std::vector<std::string>>();
        plan.requested_pairs = j.value("requested_pairs", std::size_t{0});
        plan.available_pairs = j.value("available_pairs", std::size_t{0});
        plan.dropped_for_overlap = j.value("dropped_for_overlap", std::size_t{0});
        for (const auto& t : j.at("extraction_pairs"))
            plan.extraction_pairs.push_back(
                {PairKind::cross, t.at(0).get<std::string>(), t.at(1).get<std::string>(), t.at(2).get<std::string>(),
                 plan.accent});
        plan.evaluation_utterances = j.at("evaluation_utterances").get<std::vector<std::string>>();
    } catch (const json::exception& ex) {
        throw FormatError(std::string("malformed split plan: ") + ex.what());
    }
    return plan;
}

} // namespace accsteer

#endif // ACCSTEER_PAIRING_HPP
