#ifndef ACCSTEER_TEXT_HPP
#define ACCSTEER_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace accsteer {

/// Ingestion normalization: ASCII lowercase, every non-alphanumeric byte
/// becomes a space, runs of whitespace collapse to one space, ends trimmed.
/// Bytes >= 0x80 are kept as-is so UTF-8 words survive.
inline std::string normalize_transcript(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (!keep) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    }
    return out;
}

/// Normalize, then split on single spaces.
inline std::vector<std::string> tokenize(std::string_view text) {
    const std::string norm = normalize_transcript(text);
    std::vector<std::string> words;
    std::size_t start = 0;
    while (start < norm.size()) {
        auto end = norm.find(' ', start);
        if (end == std::string::npos)
            end = norm.size();
        words.emplace_back(norm.substr(start, end - start));
        start = end + 1;
    }
    return words;
}

} // namespace accsteer

#endif // ACCSTEER_TEXT_HPP
