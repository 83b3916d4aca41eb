#pragma once

#include <cstdint>
#include <vector>

#include "dizi/score.hpp"
#include "dizi/util.hpp"

namespace dizi {

// Synthetic two-school corpora for tests and demos, labeled North/South.
//
// Disjoint: the schools live an octave apart, so their token sets share
// nothing and a bag-of-tokens classifier can separate them perfectly.
// Gradient: both schools share one pitch vocabulary and differ by rhythm
// profile (eighth-heavy vs quarter/triplet-heavy), which leaves room for
// style transfer to move a piece gradually.
enum class SynthKind { Disjoint, Gradient };

struct SynthConfig {
    int pieces = 200; // total, split evenly between the schools
    int measures_per_piece = 4;
    SynthKind kind = SynthKind::Disjoint;
    uint64_t seed = 0;
};

std::vector<Score> make_style_corpus(const SynthConfig& config);

// A random valid score exercising the whole grammar: every key, several
// time signatures, rests, accidentals, octave marks, dotted and tuplet
// durations, techniques, anacrusis and short final measures.
struct RandomScoreConfig {
    int min_measures = 2;
    int max_measures = 12;
};

Score random_score(Rng& rng, const RandomScoreConfig& config = RandomScoreConfig{});

} // namespace dizi
