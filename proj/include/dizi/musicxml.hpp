#pragma once

#include <string>

#include "dizi/score.hpp"

namespace dizi {

// MusicXML 3.1 partwise export, single part. Playing techniques are written
// as lyric syllables (verse 1, placed below) carrying the technique short
// code. divisions is the LCM of all duration denominators in the score, so
// every emitted duration is an exact integer. Triplet-family durations
// (denominator 3, 6 or 12) carry a 3:2 time-modification.
//
// Throws std::invalid_argument on a duration outside the supported
// denominator set.
std::string export_musicxml(const Score& score);

} // namespace dizi
