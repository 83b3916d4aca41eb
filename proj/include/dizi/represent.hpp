#pragma once

#include <string>
#include <vector>

#include "dizi/score.hpp"

namespace dizi {

// One token per note: chromatic pitch name + duration in quarter lengths,
// e.g. "C41" for a quarter Do in 1=C. Rests tokenize as "R" + duration.
// Durations with a power-of-two denominator are rendered as minimal decimals
// ("1", "0.5", "1.25"), triplet-family durations as "p/q" ("1/3").
struct TokenSequence {
    std::vector<std::string> tokens;
    School label = School::Other;
    std::string source_title;
    int measure_begin = 0; // inclusive, 0-based
    int measure_end = 0;   // exclusive
};

// Duration rendering shared by tokens and tagger features.
std::string duration_token_text(const Rational& d);

std::string note_token(const NoteEvent& n, const KeySignature& key);

// Rests carry rhythmic information and are kept by default; pass
// include_rests = false to drop them from the sequence.
TokenSequence tokenize(const Score& score, bool include_rests = true);

// Non-overlapping consecutive windows of exactly `window` measures; a
// trailing remainder shorter than the window is dropped.
std::vector<TokenSequence> segment(const Score& score, int window = 4, bool include_rests = true);

// Token/tag pairs for sequence labeling; tags are technique codes.
struct TaggedSequence {
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
    School label = School::Other;
};

TaggedSequence tokenize_tagged(const Score& score);
std::vector<TaggedSequence> segment_tagged(const Score& score, int window = 4);

} // namespace dizi
