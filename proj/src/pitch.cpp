#include "dizi/pitch.hpp"

#include <stdexcept>

namespace dizi {

const int kMajorScaleOffsets[7] = {0, 2, 4, 5, 7, 9, 11};

namespace {
const char* kSharpNames[12] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};
} // namespace

const char* pitch_class_name(int pc) {
    if (pc < 0 || pc > 11)
        throw std::invalid_argument("pitch class out of range");
    return kSharpNames[pc];
}

std::optional<int> pitch_class_from_name(const std::string& name) {
    if (name.empty())
        return std::nullopt;
    char letter = name[0];
    if (letter >= 'a' && letter <= 'g')
        letter = static_cast<char>(letter - 'a' + 'A');
    static const int kLetterPc[7] = {9, 11, 0, 2, 4, 5, 7}; // A..G
    if (letter < 'A' || letter > 'G')
        return std::nullopt;
    int pc = kLetterPc[letter - 'A'];
    if (name.size() == 1)
        return pc;
    if (name.size() == 2) {
        if (name[1] == '#')
            return (pc + 1) % 12;
        if (name[1] == 'b')
            return (pc + 11) % 12;
    }
    return std::nullopt;
}

int key_base_midi(const KeySignature& key) {
    return 12 * (key.reference_octave + 1) + key.tonic_pc;
}

int degree_to_midi(int degree, int accidental, int octave_shift, const KeySignature& key) {
    if (degree < 1 || degree > 7)
        throw std::invalid_argument("degree must be 1..7");
    return key_base_midi(key) + kMajorScaleOffsets[degree - 1] + accidental + 12 * octave_shift;
}

std::string midi_name(int midi) {
    int pc = ((midi % 12) + 12) % 12;
    int octave = (midi - pc) / 12 - 1;
    return std::string(kSharpNames[pc]) + std::to_string(octave);
}

std::string degree_to_pitch(int degree, int accidental, int octave_shift, const KeySignature& key) {
    return midi_name(degree_to_midi(degree, accidental, octave_shift, key));
}

std::optional<Spelling> spell_midi(int midi, const KeySignature& key) {
    int rel = midi - key_base_midi(key);
    int shift = rel >= 0 ? rel / 12 : -(((-rel) + 11) / 12);
    int within = rel - 12 * shift; // 0..11
    for (int d = 0; d < 7; ++d) {
        if (kMajorScaleOffsets[d] == within) {
            if (shift < -2 || shift > 2)
                return std::nullopt;
            return Spelling{d + 1, 0, shift};
        }
    }
    // chromatic step: spell as the scale tone below, sharpened
    for (int d = 0; d < 7; ++d) {
        if (kMajorScaleOffsets[d] == within - 1) {
            if (shift < -2 || shift > 2)
                return std::nullopt;
            return Spelling{d + 1, +1, shift};
        }
    }
    return std::nullopt; // unreachable: every 0..11 offset is scale or scale+1
}

int key_fifths(int tonic_pc) {
    // fifths of the major key, enharmonic flat spelling when it is shorter
    static const int kFifths[12] = {0, -5, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5};
    if (tonic_pc < 0 || tonic_pc > 11)
        throw std::invalid_argument("pitch class out of range");
    return kFifths[tonic_pc];
}

} // namespace dizi
