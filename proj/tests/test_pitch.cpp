#include <doctest.h>

#include <set>

#include "dizi/pitch.hpp"

using namespace dizi;

TEST_CASE("degree 1 of 1=C is C4 and friends") {
    KeySignature c{0, 4};
    CHECK(degree_to_pitch(1, 0, 0, c) == "C4");
    CHECK(degree_to_pitch(5, 0, 1, c) == "G5");
    KeySignature g{7, 4};
    CHECK(degree_to_pitch(7, 0, 0, g) == "F#5");
    CHECK(degree_to_midi(1, 0, 0, c) == 60);
}

namespace {

// Independent major-scale oracle: walk the whole/half step pattern from the
// tonic instead of using an offset table.
int scale_note_by_steps(int tonic_midi, int degree) {
    static const int steps[] = {2, 2, 1, 2, 2, 2}; // W W H W W W
    int midi = tonic_midi;
    for (int d = 1; d < degree; ++d)
        midi += steps[d - 1];
    return midi;
}

} // namespace

TEST_CASE("degree mapping matches the step-walking oracle for all 12 tonics") {
    for (int pc = 0; pc < 12; ++pc) {
        KeySignature key{pc, 4};
        int tonic = 12 * 5 + pc;
        for (int degree = 1; degree <= 7; ++degree)
            for (int shift = -1; shift <= 1; ++shift)
                for (int acc = -1; acc <= 1; ++acc)
                    CHECK(degree_to_midi(degree, acc, shift, key) ==
                          scale_note_by_steps(tonic, degree) + acc + 12 * shift);
    }
}

TEST_CASE("degree mapping is injective over (degree, octave shift) for a fixed key") {
    for (int pc = 0; pc < 12; ++pc) {
        KeySignature key{pc, 4};
        std::set<int> seen;
        for (int shift = -2; shift <= 2; ++shift)
            for (int degree = 1; degree <= 7; ++degree)
                CHECK(seen.insert(degree_to_midi(degree, 0, shift, key)).second);
    }
}

TEST_CASE("spell_midi produces the canonical sharp spelling") {
    KeySignature c{0, 4};
    for (int midi = 60 - 24; midi <= 60 + 24 + 11; ++midi) {
        auto sp = spell_midi(midi, c);
        REQUIRE(sp.has_value());
        CHECK((sp->accidental == 0 || sp->accidental == 1));
        CHECK(degree_to_midi(sp->degree, sp->accidental, sp->octave_shift, c) == midi);
    }
    CHECK(!spell_midi(60 + 36, c).has_value()); // would need an octave shift beyond +2
    auto cs = spell_midi(61, c);
    CHECK(cs->degree == 1);
    CHECK(cs->accidental == 1);
}

TEST_CASE("pitch names and key fifths") {
    CHECK(midi_name(60) == "C4");
    CHECK(midi_name(78) == "F#5");
    CHECK(midi_name(59) == "B3");
    CHECK(*pitch_class_from_name("C#") == 1);
    CHECK(*pitch_class_from_name("Db") == 1);
    CHECK(*pitch_class_from_name("bb") == 10);
    CHECK(!pitch_class_from_name("H").has_value());
    CHECK(key_fifths(0) == 0);   // C
    CHECK(key_fifths(7) == 1);   // G
    CHECK(key_fifths(5) == -1);  // F
    CHECK(key_fifths(6) == 6);   // F#
    CHECK(key_fifths(10) == -2); // Bb
}
