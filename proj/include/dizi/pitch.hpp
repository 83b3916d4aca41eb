#pragma once

#include <optional>
#include <string>

#include "dizi/score.hpp"

namespace dizi {

// Chromatic pitch helpers. Absolute pitches are MIDI numbers (C4 = 60).
// Spelling always uses sharps (C#, never Db).

extern const int kMajorScaleOffsets[7]; // {0, 2, 4, 5, 7, 9, 11}

const char* pitch_class_name(int pc);                       // 0..11 -> "C".."B"
std::optional<int> pitch_class_from_name(const std::string& name); // accepts flat aliases

// MIDI of degree 1 with no marks, for the given key.
int key_base_midi(const KeySignature& key);

// tonic + major-scale offset + accidental + 12 * octave_shift
int degree_to_midi(int degree, int accidental, int octave_shift, const KeySignature& key);

std::string midi_name(int midi); // 60 -> "C4"

// degree_to_midi rendered as name+octave, e.g. "F#5"
std::string degree_to_pitch(int degree, int accidental, int octave_shift, const KeySignature& key);

// Canonical spelling of an absolute pitch relative to a key: scale tones get
// accidental 0, everything else is spelled as the scale tone below plus a
// sharp. Returns nullopt when the required octave_shift leaves -2..+2.
struct Spelling {
    int degree;
    int accidental;
    int octave_shift;
};
std::optional<Spelling> spell_midi(int midi, const KeySignature& key);

// Number of sharps (+) or flats (-) of the major key on this tonic, for
// MusicXML <fifths>. Picks the spelling with fewer accidentals.
int key_fifths(int tonic_pc);

} // namespace dizi
