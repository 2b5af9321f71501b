#ifndef ACCSTEER_TRANSCRIBER_HPP
#define ACCSTEER_TRANSCRIBER_HPP

#include "accsteer/activation_store.hpp"
#include "accsteer/error.hpp"

#include <fstream>
#include <map>
#include <span>
#include <string>

namespace accsteer {

/// Turns a pooled projector output into hypothesis text. Implementations
/// throw TranscriberError for a single utterance they cannot handle.
class Transcriber {
public:
    virtual ~Transcriber() = default;
    virtual std::string transcribe(const UtteranceMeta& meta, std::span<const double> pooled_projector) const = 0;
    /// Whether transcribe() may be called from several threads at once.
    virtual bool concurrent_safe() const noexcept { return false; }
};

/// Hypotheses produced offline alongside the activations (CSV with header
/// `utterance_id,hypothesis`). Only meaningful for unsteered projector
/// outputs, which is all a precomputed dataset has.
class HypothesisTable final : public Transcriber {
public:
    static HypothesisTable load(const fs::path& csv) {
        std::ifstream in(csv);
        if (!in)
            throw DataError("cannot open hypotheses " + csv.string());
        HypothesisTable t;
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (header) {
                header = false;
                if (line.rfind("utterance_id", 0) == 0)
                    continue;
            }
            if (line.empty())
                continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw FormatError(csv.string() + ": expected 'utterance_id,hypothesis' rows");
            std::string hyp = line.substr(comma + 1);
            if (hyp.size() >= 2 && hyp.front() == '"' && hyp.back() == '"')
                hyp = hyp.substr(1, hyp.size() - 2);
            t.hypotheses_[line.substr(0, comma)] = hyp;
        }
        return t;
    }

    void add(std::string id, std::string hypothesis) { hypotheses_[std::move(id)] = std::move(hypothesis); }

    std::string transcribe(const UtteranceMeta& meta, std::span<const double>) const override {
        auto it = hypotheses_.find(meta.utterance_id);
        if (it == hypotheses_.end())
            throw TranscriberError("no hypothesis for '" + meta.utterance_id + "'");
        return it->second;
    }
    bool concurrent_safe() const noexcept override { return true; }

private:
    std::map<std::string, std::string> hypotheses_;
};

} // namespace accsteer

#endif // ACCSTEER_TRANSCRIBER_HPP
