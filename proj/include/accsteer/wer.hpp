#ifndef ACCSTEER_WER_HPP
#define ACCSTEER_WER_HPP

#include "accsteer/error.hpp"
#include "accsteer/random.hpp"
#include "accsteer/text.hpp"

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace accsteer {

struct WerScore {
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
    std::size_t ref_words = 0;

    std::size_t edits() const noexcept { return substitutions + insertions + deletions; }
    double wer() const noexcept {
        return ref_words == 0 ? 0.0 : static_cast<double>(edits()) / static_cast<double>(ref_words);
    }
    bool operator==(const WerScore&) const = default;
};

/// Minimum word edit distance with unit costs. Among optimal alignments the
/// backtrace prefers substitution, then deletion, then insertion.
inline WerScore word_alignment(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::size_t> cost((n + 1) * (m + 1));
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    for (std::size_t i = 0; i <= n; ++i)
        cost[at(i, 0)] = i;
    for (std::size_t j = 0; j <= m; ++j)
        cost[at(0, j)] = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = cost[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cost[at(i, j)] = std::min({sub, cost[at(i - 1, j)] + 1, cost[at(i, j - 1)] + 1});
        }

    WerScore s;
    s.ref_words = n;
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        const std::size_t c = cost[at(i, j)];
        if (i > 0 && j > 0 && c == cost[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
            if (ref[i - 1] != hyp[j - 1])
                ++s.substitutions;
            --i;
            --j;
        } else if (i > 0 && c == cost[at(i - 1, j)] + 1) {
            ++s.deletions;
            --i;
        } else {
            ++s.insertions;
            --j;
        }
    }
    return s;
}

/// WER of a hypothesis against a reference, both normalized and split on
/// whitespace. Unclipped: insertions can push it above 1.
inline WerScore wer(std::string_view reference, std::string_view hypothesis) {
    const auto ref = tokenize(reference);
    if (ref.empty())
        throw ValidationError("reference transcript is empty after normalization");
    return word_alignment(ref, tokenize(hypothesis));
}

/// Corpus WER: total edits over total reference words.
inline double corpus_wer(const std::vector<WerScore>& scores) {
    std::size_t edits = 0, words = 0;
    for (const auto& s : scores) {
        edits += s.edits();
        words += s.ref_words;
    }
    return words == 0 ? 0.0 : static_cast<double>(edits) / static_cast<double>(words);
}

struct ScoredUtterance {
    std::string utterance_id;
    WerScore score;
};

struct BalancedSample {
    std::vector<std::string> zero_wer;
    std::vector<std::string> positive_wer;
    std::size_t per_bucket = 0;
    std::size_t zero_shortfall = 0;
    std::size_t positive_shortfall = 0;

    /// Zero bucket first, then the positive bucket.
    std::vector<std::string> ids() const {
        std::vector<std::string> out = zero_wer;
        out.insert(out.end(), positive_wer.begin(), positive_wer.end());
        return out;
    }
};

/// Up to `per_bucket` utterances with WER == 0 and up to `per_bucket` with
/// WER > 0, each drawn by a seeded shuffle of the id-sorted bucket.
inline BalancedSample balanced_sample(const std::vector<ScoredUtterance>& scored, std::size_t per_bucket = 100,
                                      std::uint64_t seed = 0) {
    if (scored.empty())
        throw ValidationError("balanced_sample needs scored utterances");
    std::vector<std::string> zero, positive;
    for (const auto& s : scored)
        (s.score.edits() == 0 ? zero : positive).push_back(s.utterance_id);
    if (zero.empty() && positive.empty())
        throw ValidationError("both WER buckets are empty");

    Rng rng(seed);
    auto draw = [&](std::vector<std::string> ids, const char* tag, std::size_t& shortfall) {
        std::sort(ids.begin(), ids.end());
        Rng r = rng.fork(tag);
        r.shuffle(ids);
        if (ids.size() < per_bucket)
            shortfall = per_bucket - ids.size();
        else
            ids.resize(per_bucket);
        return ids;
    };
    BalancedSample out;
    out.per_bucket = per_bucket;
    out.zero_wer = draw(std::move(zero), "zero-wer", out.zero_shortfall);
    out.positive_wer = draw(std::move(positive), "positive-wer", out.positive_shortfall);
    return out;
}

/// utterance_id,ref_words,S,I,D,wer
inline std::string wer_csv(const std::vector<ScoredUtterance>& scored) {
    std::ostringstream os;
    os.precision(10);
    os << "utterance_id,ref_words,S,I,D,wer\n";
    for (const auto& s : scored)
        os << s.utterance_id << ',' << s.score.ref_words << ',' << s.score.substitutions << ','
           << s.score.insertions << ',' << s.score.deletions << ',' << s.score.wer() << '\n';
    return os.str();
}

} // namespace accsteer

#endif // ACCSTEER_WER_HPP
