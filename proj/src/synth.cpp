#include "dizi/synth.hpp"

#include <stdexcept>

namespace dizi {

namespace {

// Fill one 2/4 measure for the style corpora. Durations come in three moves
// (quarter, two eighths, a triplet of three 1/3 notes), so the remainder is
// always a multiple of 1/2 and the measure closes exactly.
struct StyleProfile {
    double p_quarter;
    double p_eighths; // pair of eighths
    double p_triplet;
    int octave_shift_base;
    bool shared_pitch_space;
};

int pick_degree(Rng& rng) { return 1 + static_cast<int>(rng.next_below(7)); }

void add_note(Measure& m, Rng& rng, int degree, int octave_shift, Rational dur, School school,
              bool eighth_like) {
    NoteEvent n;
    n.degree = degree;
    n.octave_shift = octave_shift;
    n.duration = dur;
    if (school == School::North) {
        bool first = m.notes.empty();
        if (first && rng.next_double() < 0.5)
            n.technique = "tk";
        else if (eighth_like && rng.next_double() < 0.25)
            n.technique = "tk";
        else if (dur == Rational(1) && rng.next_double() < 0.2)
            n.technique = "ft";
    } else {
        if (dur == Rational(1) && rng.next_double() < 0.4)
            n.technique = "tr";
        else if (eighth_like && rng.next_double() < 0.15)
            n.technique = "ua";
        else if (dur.den == 3 && rng.next_double() < 0.2)
            n.technique = "po";
    }
    m.notes.push_back(n);
}

Measure make_measure(Rng& rng, School school, const StyleProfile& prof) {
    Measure m;
    Rational remaining(2); // 2/4 time
    while (remaining > Rational(0)) {
        int octave = prof.octave_shift_base;
        if (prof.shared_pitch_space && rng.next_double() < 0.5)
            octave = 1;
        double x = rng.next_double();
        bool can_whole = remaining >= Rational(1);
        if (can_whole && x < prof.p_quarter) {
            add_note(m, rng, pick_degree(rng), octave, Rational(1), school, false);
            remaining -= Rational(1);
        } else if (can_whole && x < prof.p_quarter + prof.p_triplet) {
            int degree = pick_degree(rng);
            for (int i = 0; i < 3; ++i)
                add_note(m, rng, degree, octave, Rational(1, 3), school, false);
            remaining -= Rational(1);
        } else {
            add_note(m, rng, pick_degree(rng), octave, Rational(1, 2), school, true);
            remaining -= Rational(1, 2);
        }
    }
    return m;
}

} // namespace

std::vector<Score> make_style_corpus(const SynthConfig& config) {
    if (config.pieces < 2 || config.pieces % 2 != 0)
        throw std::invalid_argument("synthetic corpus size must be even and >= 2");
    if (config.measures_per_piece < 1)
        throw std::invalid_argument("measures per piece must be >= 1");

    std::vector<Score> out;
    out.reserve(config.pieces);
    int per_school = config.pieces / 2;
    for (int i = 0; i < config.pieces; ++i) {
        School school = i < per_school ? School::North : School::South;
        Rng rng(mix_seed(config.seed, static_cast<uint64_t>(i)));

        StyleProfile prof{};
        if (config.kind == SynthKind::Disjoint) {
            prof = {0.45, 0.45, 0.10, school == School::North ? 0 : 1, false};
        } else if (school == School::North) {
            prof = {0.25, 0.70, 0.05, 0, true};
        } else {
            prof = {0.45, 0.15, 0.40, 0, true};
        }

        Score s;
        s.title = std::string(school == School::North ? "north" : "south") + "_" +
                  std::to_string(i % per_school);
        s.school = school;
        s.key = {2, 4}; // 1=D
        s.time = {2, 4};
        for (int mi = 0; mi < config.measures_per_piece; ++mi)
            s.measures.push_back(make_measure(rng, school, prof));
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

// Duration palettes whose sums and remainders stay inside the supported
// denominator set: binary (den | 16) and mixed (den | 12).
const Rational kBinaryPalette[] = {
    {2, 1}, {3, 2}, {1, 1}, {3, 4}, {1, 2}, {3, 8}, {1, 4}, {3, 16}, {1, 8}, {1, 16},
};
const Rational kMixedPalette[] = {
    {1, 1}, {1, 2}, {1, 4}, {3, 2}, {1, 3}, {2, 3}, {1, 6}, {1, 12}, {5, 12},
};

NoteEvent random_note(Rng& rng, const TechniqueRegistry& registry, Rational dur) {
    NoteEvent n;
    n.duration = dur;
    if (rng.next_double() < 0.1) {
        n.degree = 0;
        return n;
    }
    n.degree = 1 + static_cast<int>(rng.next_below(7));
    double a = rng.next_double();
    if (a < 0.08)
        n.accidental = 1;
    else if (a < 0.15)
        n.accidental = -1;
    double o = rng.next_double();
    if (o < 0.15)
        n.octave_shift = 1;
    else if (o < 0.25)
        n.octave_shift = -1;
    else if (o < 0.28)
        n.octave_shift = 2;
    else if (o < 0.31)
        n.octave_shift = -2;
    if (rng.next_double() < 0.25) {
        const auto& entries = registry.entries();
        n.technique = entries[1 + rng.next_below(entries.size() - 1)].code;
    }
    return n;
}

Measure random_measure(Rng& rng, const TechniqueRegistry& registry, Rational capacity) {
    bool binary = rng.next_double() < 0.5;
    Measure m;
    Rational remaining = capacity;
    while (remaining > Rational(0)) {
        // close the measure with one exact note now and then, always when
        // nothing smaller fits
        std::vector<Rational> options;
        auto palette_size = binary ? std::size(kBinaryPalette) : std::size(kMixedPalette);
        const Rational* palette = binary ? kBinaryPalette : kMixedPalette;
        for (size_t i = 0; i < palette_size; ++i)
            if (palette[i] < remaining)
                options.push_back(palette[i]);
        if (options.empty() || rng.next_double() < 0.25) {
            m.notes.push_back(random_note(rng, registry, remaining));
            break;
        }
        Rational d = options[rng.next_below(options.size())];
        m.notes.push_back(random_note(rng, registry, d));
        remaining -= d;
    }
    return m;
}

} // namespace

Score random_score(Rng& rng, const RandomScoreConfig& config) {
    static const char* kWords[] = {"river", "moon", "bamboo", "spring", "lark",
                                   "harvest", "boat", "plum", "wind", "lantern"};
    const TechniqueRegistry& registry = TechniqueRegistry::builtin();

    Score s;
    s.title = std::string(kWords[rng.next_below(std::size(kWords))]) + " " +
              std::to_string(rng.next_below(100));
    s.school = static_cast<School>(rng.next_below(3));
    s.key.tonic_pc = static_cast<int>(rng.next_below(12));
    s.key.reference_octave = rng.next_double() < 0.8 ? 4 : 3 + static_cast<int>(rng.next_below(3));

    static const TimeSignature kTimes[] = {{2, 4}, {3, 4}, {4, 4}, {3, 8}, {6, 8}, {2, 2}};
    s.time = kTimes[rng.next_below(std::size(kTimes))];
    Rational capacity = s.time.quarters();

    int n_measures = config.min_measures +
                     static_cast<int>(rng.next_below(
                         static_cast<uint64_t>(config.max_measures - config.min_measures + 1)));
    for (int i = 0; i < n_measures; ++i) {
        bool edge = i == 0 || i == n_measures - 1;
        Rational cap = capacity;
        if (edge && rng.next_double() < 0.3)
            cap = capacity * Rational(1, 2);
        s.measures.push_back(random_measure(rng, registry, cap));
    }
    return s;
}

} // namespace dizi
