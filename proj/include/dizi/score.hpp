#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dizi/rational.hpp"

namespace dizi {

enum class School { North, South, Other };

const char* school_name(School s);
std::optional<School> school_from_name(const std::string& name);

// Movable-do key: "1=C" declares the tonic pitch class. reference_octave is
// the octave of degree 1 with no octave marks (C4 convention).
struct KeySignature {
    int tonic_pc = 0; // 0=C .. 11=B, chromatic
    int reference_octave = 4;

    bool operator==(const KeySignature&) const = default;
};

struct TimeSignature {
    int beats = 4;     // beats per measure, > 0
    int beat_unit = 4; // power of two

    // measure capacity in quarter lengths
    Rational quarters() const { return Rational(beats * 4, beat_unit); }
    bool operator==(const TimeSignature&) const = default;
};

// A registered playing technique: a short code used in score files and as a
// tagging state, plus a display name. Code "none" means no technique.
struct TechniqueInfo {
    std::string code;
    std::string name;
};

class TechniqueRegistry {
  public:
    // Seeded with the built-in inventory: none, tk, ft, tr, ua, la, po, br.
    static const TechniqueRegistry& builtin();

    TechniqueRegistry();

    void register_technique(const std::string& code, const std::string& name);
    bool has(const std::string& code) const;
    int index_of(const std::string& code) const; // -1 if absent
    const std::vector<TechniqueInfo>& entries() const { return entries_; }
    std::vector<std::string> codes() const;

  private:
    std::vector<TechniqueInfo> entries_;
};

// One note or rest. degree 0 is a rest and forces accidental = 0,
// octave_shift = 0, technique = "none".
struct NoteEvent {
    int degree = 0;            // 0 = rest, 1..7 = scale degree
    int accidental = 0;        // -1 flat, 0, +1 sharp
    int octave_shift = 0;      // -2..+2
    Rational duration{1};      // quarter lengths, > 0, den in {1,2,3,4,6,8,12,16}
    std::string technique = "none";

    bool is_rest() const { return degree == 0; }
    bool operator==(const NoteEvent&) const = default;
};

bool duration_denominator_supported(const Rational& d);

struct Measure {
    std::vector<NoteEvent> notes;

    Rational total_duration() const {
        Rational sum{0};
        for (const auto& n : notes)
            sum += n.duration;
        return sum;
    }
    bool operator==(const Measure&) const = default;
};

struct Score {
    std::string title;
    School school = School::Other;
    KeySignature key;
    TimeSignature time;
    std::vector<Measure> measures;

    size_t note_count() const {
        size_t n = 0;
        for (const auto& m : measures)
            n += m.notes.size();
        return n;
    }
    bool operator==(const Score&) const = default;
};

struct Diagnostic {
    int line = 0;   // 1-based
    int column = 0; // 1-based
    std::string message;

    std::string str() const {
        return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    }
};

} // namespace dizi
