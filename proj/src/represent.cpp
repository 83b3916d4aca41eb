#include "dizi/represent.hpp"

#include <cstdio>
#include <stdexcept>

#include "dizi/pitch.hpp"

namespace dizi {

std::string duration_token_text(const Rational& d) {
    bool binary = d.den == 1 || d.den == 2 || d.den == 4 || d.den == 8 || d.den == 16;
    if (!binary)
        return d.str();
    long long whole = d.num / d.den;
    long long rem = d.num % d.den;
    std::string out = std::to_string(whole);
    if (rem != 0) {
        long long digits = rem * (10000 / d.den); // exact: den divides 16
        char buf[8];
        std::snprintf(buf, sizeof(buf), "%04lld", digits);
        std::string frac(buf);
        while (!frac.empty() && frac.back() == '0')
            frac.pop_back();
        out += "." + frac;
    }
    return out;
}

std::string note_token(const NoteEvent& n, const KeySignature& key) {
    if (n.is_rest())
        return "R" + duration_token_text(n.duration);
    return degree_to_pitch(n.degree, n.accidental, n.octave_shift, key) +
           duration_token_text(n.duration);
}

TokenSequence tokenize(const Score& score, bool include_rests) {
    TokenSequence seq;
    seq.label = score.school;
    seq.source_title = score.title;
    seq.measure_begin = 0;
    seq.measure_end = static_cast<int>(score.measures.size());
    for (const auto& m : score.measures)
        for (const auto& n : m.notes)
            if (include_rests || !n.is_rest())
                seq.tokens.push_back(note_token(n, score.key));
    return seq;
}

std::vector<TokenSequence> segment(const Score& score, int window, bool include_rests) {
    if (window < 1)
        throw std::invalid_argument("segment window must be >= 1");
    std::vector<TokenSequence> out;
    size_t full = score.measures.size() / static_cast<size_t>(window);
    for (size_t w = 0; w < full; ++w) {
        TokenSequence seq;
        seq.label = score.school;
        seq.source_title = score.title;
        seq.measure_begin = static_cast<int>(w) * window;
        seq.measure_end = seq.measure_begin + window;
        for (int mi = seq.measure_begin; mi < seq.measure_end; ++mi)
            for (const auto& n : score.measures[mi].notes)
                if (include_rests || !n.is_rest())
                    seq.tokens.push_back(note_token(n, score.key));
        out.push_back(std::move(seq));
    }
    return out;
}

TaggedSequence tokenize_tagged(const Score& score) {
    TaggedSequence out;
    out.label = score.school;
    for (const auto& m : score.measures)
        for (const auto& n : m.notes) {
            out.tokens.push_back(note_token(n, score.key));
            out.tags.push_back(n.technique);
        }
    return out;
}

std::vector<TaggedSequence> segment_tagged(const Score& score, int window) {
    if (window < 1)
        throw std::invalid_argument("segment window must be >= 1");
    std::vector<TaggedSequence> out;
    size_t full = score.measures.size() / static_cast<size_t>(window);
    for (size_t w = 0; w < full; ++w) {
        TaggedSequence seq;
        seq.label = score.school;
        for (int mi = static_cast<int>(w) * window; mi < static_cast<int>(w + 1) * window; ++mi)
            for (const auto& n : score.measures[mi].notes) {
                seq.tokens.push_back(note_token(n, score.key));
                seq.tags.push_back(n.technique);
            }
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace dizi
