#pragma once

#include <string>
#include <vector>

#include "dizi/score.hpp"

namespace dizi {

// Plain-text jianpu score format (".jp").
//
//   title: Morning on the River
//   school: South
//   key: 1=D
//   time: 2/4
//
//   5/ 5/ | 6 - |
//
// Headers come first, one per line; the body is a whitespace-separated token
// stream with "|" closing each measure. A note token is
//   [#|b] degree(0-7) octave-marks duration technique
// where octave marks are ' (up) or , (down), duration is "/" per halving with
// an optional dot (x3/2) or an explicit rational "{p/q}", and technique is
// "!" plus a registered code. A standalone "-" extends the previous note by
// one quarter. Degree 0 is a rest and admits no accidental, octave mark or
// technique. See docs/formats.md for the EBNF sketch.

struct ParseResult {
    std::optional<Score> score;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return score.has_value(); }
};

ParseResult parse_score(const std::string& source,
                        const TechniqueRegistry& registry = TechniqueRegistry::builtin());

// Canonical text form; parse_score(serialize_score(s)) is structurally s,
// and serializing again reproduces the same bytes.
std::string serialize_score(const Score& score);

// One diagnostic per measure whose duration sum breaks the time signature.
// First and last measures may be shorter (anacrusis / final), never longer.
std::vector<Diagnostic> validate_measures(const Score& score);

// Convenience for callers that treat parse failure as fatal (CLI, tests).
Score parse_score_or_throw(const std::string& source,
                           const TechniqueRegistry& registry = TechniqueRegistry::builtin());

} // namespace dizi
