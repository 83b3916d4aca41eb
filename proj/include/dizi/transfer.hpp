#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dizi/classify.hpp"
#include "dizi/notation.hpp"
#include "dizi/tagger.hpp"

namespace dizi {

enum class MutationKind { RaisePitch, LowerPitch, SplitNote, MergeNotes };

const char* mutation_kind_name(MutationKind k);

// Split patterns: (1/2,1/2), (1/3,2/3), (2/3,1/3), (1/3,1/3,1/3).
const std::array<std::vector<Rational>, 4>& split_patterns();

struct Mutation {
    MutationKind kind = MutationKind::RaisePitch;
    int position = 0;       // flattened note index within the fragment
    int amount = 0;         // semitones (1 or 2) for raise/lower
    int split_pattern = -1; // index into split_patterns()

    std::string param_text() const;
};

struct TransferConfig {
    int iterations = 60;
    std::vector<int> checkpoints = {0, 20, 60};
    int window = 4;
    int range_low_midi = 62;  // D4, bottom of the playable range
    int range_high_midi = 88; // E6
    bool force = false;       // proceed when the classifier disagrees with the source label
    uint64_t seed = 0;
};

// Pitch mutations respell the note against the key (sharp spelling) and must
// stay inside the configured playable range and octave-mark range. Split
// keeps the pitch; only the first part keeps the technique tag. Merge takes
// the first note's pitch and technique and the summed duration; both notes
// must be in the same measure. Mutations never touch rests and never change
// a measure's total duration.
Result<Score> apply_mutation(const Score& fragment, const Mutation& m,
                             const TransferConfig& cfg = TransferConfig{});

// All valid mutations of the fragment, grouped by kind, in deterministic
// enumeration order (position ascending, then parameter).
std::array<std::vector<Mutation>, 4> enumerate_mutations(const Score& fragment,
                                                         const TransferConfig& cfg);

struct TraceEntry {
    int iteration = 0; // 1-based
    Mutation mutation;
    bool accepted = false;
    double p_before = 0;
    double p_after = 0;
};

struct MelodyTransferResult {
    Score piece;
    std::vector<TraceEntry> entries;
    std::map<int, Score> checkpoints; // iteration -> melody snapshot
    bool aborted = false;             // classifier disagreed with the source label, not forced
    std::string note;
    int initial_class = -1;
    double p_initial_start = 0;
    double p_initial_end = 0;
};

// Hill-climbing transfer: per iteration, one mutation is sampled (uniform
// over kinds with a valid instance, then uniform over that kind's valid
// position/parameter pairs), and kept only when the predicted label still
// equals the source label while that label's probability strictly drops.
MelodyTransferResult melody_transfer(const Score& piece, const ClassifierBundle& bundle,
                                     School source_label, const TransferConfig& cfg);

// Retags every note with the target-school model's decoded technique;
// melody, durations and rests are untouched (rests stay "none").
Score technique_transfer(const Score& piece, const CrfModel& target_tagger,
                         const RuleSet* rules = nullptr);

// Mean of per-window probability distributions; a score shorter than one
// window is classified as a single piece.
std::vector<double> classify_score(const Score& score, const ClassifierBundle& bundle, int window = 4);

struct StyleTransferResult {
    Score final_score;                // melody + transferred techniques
    std::map<int, Score> checkpoints; // checkpoint iteration -> full score
    std::vector<MelodyTransferResult> windows;
    int remainder_measures = 0;
    std::map<int, std::map<std::string, int>> technique_counts;
    std::map<int, double> p_source; // whole-score p(source school) per checkpoint
    std::string note;
    bool aborted = false;
};

// Per-window melody transfer over 4-measure segments (remainder measures
// pass through unchanged), then technique transfer with the target school's
// tagger over the reassembled score at every checkpoint.
StyleTransferResult run_style_transfer(const Score& score, School source, School target,
                                       const ClassifierBundle& bundle, const CrfModel& target_tagger,
                                       const RuleSet* rules, const TransferConfig& cfg);

// Line-oriented trace export (iteration, mutation, accepted, p_before,
// p_after per entry, plus checkpoint technique counts).
std::string format_transfer_trace(const StyleTransferResult& result, School source, School target,
                                  uint64_t seed);

} // namespace dizi
