#include "dizi/transfer.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "dizi/pitch.hpp"

namespace dizi {

const char* mutation_kind_name(MutationKind k) {
    switch (k) {
    case MutationKind::RaisePitch: return "raise";
    case MutationKind::LowerPitch: return "lower";
    case MutationKind::SplitNote: return "split";
    default: return "merge";
    }
}

const std::array<std::vector<Rational>, 4>& split_patterns() {
    static const std::array<std::vector<Rational>, 4> kPatterns = {{
        {Rational(1, 2), Rational(1, 2)},
        {Rational(1, 3), Rational(2, 3)},
        {Rational(2, 3), Rational(1, 3)},
        {Rational(1, 3), Rational(1, 3), Rational(1, 3)},
    }};
    return kPatterns;
}

std::string Mutation::param_text() const {
    switch (kind) {
    case MutationKind::RaisePitch:
    case MutationKind::LowerPitch:
        return "amount " + std::to_string(amount);
    case MutationKind::SplitNote: {
        std::string out = "pattern ";
        const auto& parts = split_patterns()[split_pattern];
        for (size_t i = 0; i < parts.size(); ++i)
            out += (i ? "," : "") + parts[i].str();
        return out;
    }
    default:
        return "";
    }
}

namespace {

struct NoteRef {
    int measure;
    int note;
};

std::vector<NoteRef> flatten(const Score& s) {
    std::vector<NoteRef> refs;
    for (size_t m = 0; m < s.measures.size(); ++m)
        for (size_t n = 0; n < s.measures[m].notes.size(); ++n)
            refs.push_back({static_cast<int>(m), static_cast<int>(n)});
    return refs;
}

bool pitch_shift_valid(const Score& s, const NoteEvent& note, int semitones,
                       const TransferConfig& cfg, Spelling* out) {
    if (note.is_rest())
        return false;
    int midi = degree_to_midi(note.degree, note.accidental, note.octave_shift, s.key) + semitones;
    if (midi < cfg.range_low_midi || midi > cfg.range_high_midi)
        return false;
    auto spelled = spell_midi(midi, s.key);
    if (!spelled)
        return false;
    if (out)
        *out = *spelled;
    return true;
}

bool split_valid(const NoteEvent& note, const std::vector<Rational>& parts) {
    if (note.is_rest())
        return false;
    for (const auto& frac : parts)
        if (!duration_denominator_supported(note.duration * frac))
            return false;
    return true;
}

} // namespace

Result<Score> apply_mutation(const Score& fragment, const Mutation& m, const TransferConfig& cfg) {
    std::vector<NoteRef> refs = flatten(fragment);
    if (m.position < 0 || static_cast<size_t>(m.position) >= refs.size())
        return Result<Score>::failure("mutation position out of bounds");
    NoteRef ref = refs[m.position];
    Score out = fragment;
    auto& notes = out.measures[ref.measure].notes;
    NoteEvent note = notes[ref.note];

    switch (m.kind) {
    case MutationKind::RaisePitch:
    case MutationKind::LowerPitch: {
        if (note.is_rest())
            return Result<Score>::failure("cannot shift the pitch of a rest");
        if (m.amount != 1 && m.amount != 2)
            return Result<Score>::failure("pitch shift must be 1 or 2 semitones");
        int delta = m.kind == MutationKind::RaisePitch ? m.amount : -m.amount;
        Spelling sp;
        if (!pitch_shift_valid(fragment, note, delta, cfg, &sp))
            return Result<Score>::failure("pitch leaves the playable range");
        note.degree = sp.degree;
        note.accidental = sp.accidental;
        note.octave_shift = sp.octave_shift;
        notes[ref.note] = note;
        return Result<Score>::success(std::move(out));
    }
    case MutationKind::SplitNote: {
        if (m.split_pattern < 0 || m.split_pattern >= 4)
            return Result<Score>::failure("unknown split pattern");
        const auto& parts = split_patterns()[m.split_pattern];
        if (!split_valid(note, parts))
            return Result<Score>::failure(
                "split leaves the supported duration denominator set");
        std::vector<NoteEvent> pieces;
        for (size_t i = 0; i < parts.size(); ++i) {
            NoteEvent part = note;
            part.duration = note.duration * parts[i];
            if (i > 0)
                part.technique = "none";
            pieces.push_back(part);
        }
        notes.erase(notes.begin() + ref.note);
        notes.insert(notes.begin() + ref.note, pieces.begin(), pieces.end());
        return Result<Score>::success(std::move(out));
    }
    default: {
        if (static_cast<size_t>(ref.note) + 1 >= notes.size())
            return Result<Score>::failure("merge needs a successor note in the same measure");
        NoteEvent next = notes[ref.note + 1];
        if (note.is_rest() || next.is_rest())
            return Result<Score>::failure("merge does not apply to rests");
        Rational sum = note.duration + next.duration;
        if (!duration_denominator_supported(sum))
            return Result<Score>::failure("merged duration leaves the supported denominator set");
        note.duration = sum; // keeps the first note's pitch and technique
        notes[ref.note] = note;
        notes.erase(notes.begin() + ref.note + 1);
        return Result<Score>::success(std::move(out));
    }
    }
}

std::array<std::vector<Mutation>, 4> enumerate_mutations(const Score& fragment,
                                                         const TransferConfig& cfg) {
    std::array<std::vector<Mutation>, 4> out;
    std::vector<NoteRef> refs = flatten(fragment);
    for (size_t pos = 0; pos < refs.size(); ++pos) {
        const NoteEvent& note = fragment.measures[refs[pos].measure].notes[refs[pos].note];
        if (note.is_rest())
            continue;
        for (int amount : {1, 2}) {
            if (pitch_shift_valid(fragment, note, amount, cfg, nullptr))
                out[0].push_back({MutationKind::RaisePitch, static_cast<int>(pos), amount, -1});
            if (pitch_shift_valid(fragment, note, -amount, cfg, nullptr))
                out[1].push_back({MutationKind::LowerPitch, static_cast<int>(pos), amount, -1});
        }
        for (int p = 0; p < 4; ++p)
            if (split_valid(note, split_patterns()[p]))
                out[2].push_back({MutationKind::SplitNote, static_cast<int>(pos), 0, p});
        const auto& notes = fragment.measures[refs[pos].measure].notes;
        if (static_cast<size_t>(refs[pos].note) + 1 < notes.size()) {
            const NoteEvent& next = notes[refs[pos].note + 1];
            if (!next.is_rest() && duration_denominator_supported(note.duration + next.duration))
                out[3].push_back({MutationKind::MergeNotes, static_cast<int>(pos), 0, -1});
        }
    }
    return out;
}

MelodyTransferResult melody_transfer(const Score& piece, const ClassifierBundle& bundle,
                                     School source_label, const TransferConfig& cfg) {
    MelodyTransferResult result;
    result.piece = piece;

    int initial = bundle.model.class_index(school_name(source_label));
    if (initial < 0)
        throw std::invalid_argument(std::string("classifier has no class '") +
                                    school_name(source_label) + "'");
    result.initial_class = initial;

    auto classify = [&](const Score& s) { return predict(bundle.model, bundle.pipeline.featurize(tokenize(s))); };

    Prediction pred = classify(piece);
    if (pred.label != initial) {
        if (!cfg.force) {
            result.aborted = true;
            result.note = std::string("classifier predicts ") +
                          bundle.model.class_names[pred.label] + " for a piece labeled " +
                          school_name(source_label);
            return result;
        }
        result.note = "forced: classifier initially disagrees with the source label";
    }
    double p_current = pred.probabilities[initial];
    result.p_initial_start = p_current;

    Rng rng(cfg.seed);
    auto at_checkpoint = [&](int iter) {
        return std::find(cfg.checkpoints.begin(), cfg.checkpoints.end(), iter) !=
               cfg.checkpoints.end();
    };
    if (at_checkpoint(0))
        result.checkpoints.emplace(0, result.piece);

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        auto groups = enumerate_mutations(result.piece, cfg);
        std::vector<int> kinds;
        for (int k = 0; k < 4; ++k)
            if (!groups[k].empty())
                kinds.push_back(k);
        if (kinds.empty()) {
            result.note = "no valid mutation available at iteration " + std::to_string(iter);
            break;
        }
        int kind = kinds[rng.next_below(kinds.size())];
        const Mutation& m = groups[kind][rng.next_below(groups[kind].size())];

        Result<Score> mutated = apply_mutation(result.piece, m, cfg);
        if (!mutated.ok())
            throw std::logic_error("enumerated mutation failed to apply: " + mutated.error);

        Prediction after = classify(*mutated.value);
        double p_new = after.probabilities[initial];
        bool accepted = after.label == initial && p_new < p_current;
        result.entries.push_back({iter, m, accepted, p_current, p_new});
        if (accepted) {
            result.piece = std::move(*mutated.value);
            p_current = p_new;
        }
        if (at_checkpoint(iter))
            result.checkpoints.emplace(iter, result.piece);
    }
    result.p_initial_end = p_current;
    return result;
}

Score technique_transfer(const Score& piece, const CrfModel& target_tagger, const RuleSet* rules) {
    Score out = piece;
    TokenSequence seq = tokenize(piece);
    if (seq.tokens.empty())
        return out;
    std::vector<std::string> tags = decode(target_tagger, seq.tokens, rules);
    size_t i = 0;
    for (auto& m : out.measures)
        for (auto& n : m.notes) {
            n.technique = n.is_rest() ? "none" : tags[i];
            ++i;
        }
    return out;
}

std::vector<double> classify_score(const Score& score, const ClassifierBundle& bundle, int window) {
    std::vector<TokenSequence> pieces = segment(score, window);
    if (pieces.empty())
        pieces.push_back(tokenize(score));
    std::vector<double> mean(bundle.model.n_classes, 0.0);
    for (const auto& piece : pieces) {
        Prediction pred = predict(bundle.model, bundle.pipeline.featurize(piece));
        for (int c = 0; c < bundle.model.n_classes; ++c)
            mean[c] += pred.probabilities[c];
    }
    for (double& x : mean)
        x /= static_cast<double>(pieces.size());
    return mean;
}

StyleTransferResult run_style_transfer(const Score& score, School source, School target,
                                       const ClassifierBundle& bundle, const CrfModel& target_tagger,
                                       const RuleSet* rules, const TransferConfig& cfg) {
    (void)target; // the target school is embodied by the tagger passed in
    StyleTransferResult result;

    int source_class = bundle.model.class_index(school_name(source));
    if (source_class < 0)
        throw std::invalid_argument(std::string("classifier has no class '") +
                                    school_name(source) + "'");
    {
        std::vector<double> dist = classify_score(score, bundle, cfg.window);
        int argmax = static_cast<int>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        if (argmax != source_class && !cfg.force) {
            result.aborted = true;
            result.note = std::string("classifier predicts ") + bundle.model.class_names[argmax] +
                          " for a score labeled " + school_name(source);
            return result;
        }
    }

    size_t full_windows = score.measures.size() / static_cast<size_t>(cfg.window);
    result.remainder_measures =
        static_cast<int>(score.measures.size() - full_windows * static_cast<size_t>(cfg.window));

    for (size_t w = 0; w < full_windows; ++w) {
        Score fragment = score;
        fragment.measures.assign(score.measures.begin() + static_cast<long>(w) * cfg.window,
                                 score.measures.begin() + static_cast<long>(w + 1) * cfg.window);
        TransferConfig wcfg = cfg;
        wcfg.seed = mix_seed(cfg.seed, w);
        wcfg.force = true; // the score-level label check already ran
        result.windows.push_back(melody_transfer(fragment, bundle, source, wcfg));
    }

    auto assemble = [&](int checkpoint) {
        Score out = score;
        out.measures.clear();
        for (const auto& wres : result.windows) {
            auto it = wres.checkpoints.find(checkpoint);
            const Score& frag = it != wres.checkpoints.end() ? it->second : wres.piece;
            out.measures.insert(out.measures.end(), frag.measures.begin(), frag.measures.end());
        }
        for (size_t m = full_windows * static_cast<size_t>(cfg.window); m < score.measures.size();
             ++m)
            out.measures.push_back(score.measures[m]);
        return out;
    };

    for (int c : cfg.checkpoints) {
        if (c > cfg.iterations)
            continue;
        Score melody = assemble(c);
        Score tagged = technique_transfer(melody, target_tagger, rules);
        std::map<std::string, int> counts;
        for (const auto& m : tagged.measures)
            for (const auto& n : m.notes)
                ++counts[n.technique];
        result.technique_counts.emplace(c, std::move(counts));
        result.p_source.emplace(c, classify_score(tagged, bundle, cfg.window)[source_class]);
        result.checkpoints.emplace(c, std::move(tagged));
    }

    Score final_melody = assemble(cfg.iterations);
    result.final_score = technique_transfer(final_melody, target_tagger, rules);
    return result;
}

std::string format_transfer_trace(const StyleTransferResult& result, School source, School target,
                                  uint64_t seed) {
    std::ostringstream out;
    out << "dizi-trace v1\n";
    out << "source " << school_name(source) << "\n";
    out << "target " << school_name(target) << "\n";
    out << "seed " << seed << "\n";
    out << "windows " << result.windows.size() << " remainder " << result.remainder_measures
        << "\n";
    if (!result.note.empty())
        out << "note " << result.note << "\n";
    for (size_t w = 0; w < result.windows.size(); ++w) {
        const auto& wres = result.windows[w];
        out << "window " << w << " p_start " << fmt_double(wres.p_initial_start) << " p_end "
            << fmt_double(wres.p_initial_end) << "\n";
        if (!wres.note.empty())
            out << "window_note " << wres.note << "\n";
        for (const auto& e : wres.entries) {
            out << "iter " << e.iteration << " " << mutation_kind_name(e.mutation.kind) << " pos "
                << e.mutation.position;
            std::string param = e.mutation.param_text();
            if (!param.empty())
                out << " " << param;
            out << " accepted " << (e.accepted ? 1 : 0) << " p_before " << fmt_double(e.p_before)
                << " p_after " << fmt_double(e.p_after) << "\n";
        }
    }
    for (const auto& [checkpoint, counts] : result.technique_counts) {
        out << "checkpoint " << checkpoint << " p_source ";
        auto it = result.p_source.find(checkpoint);
        out << fmt_double(it == result.p_source.end() ? 0.0 : it->second) << " techniques ";
        bool first = true;
        for (const auto& [code, count] : counts) {
            out << (first ? "" : ",") << code << "=" << count;
            first = false;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace dizi
