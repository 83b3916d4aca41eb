#include <doctest.h>

#include <sstream>

#include "dizi/musicxml.hpp"
#include "dizi/synth.hpp"
#include "dizi/transfer.hpp"
#include "support.hpp"

using namespace dizi;

namespace {

Score score_of(const std::string& text) {
    ParseResult res = parse_score(text);
    REQUIRE(res.ok());
    return *res.score;
}

// classifier bundle over the gradient corpus, built once
const ClassifierBundle& gradient_bundle() {
    static const ClassifierBundle bundle = [] {
        SynthConfig cfg;
        cfg.pieces = 100;
        cfg.kind = SynthKind::Gradient;
        cfg.seed = 5;
        std::vector<TokenSequence> pieces;
        for (const auto& s : make_style_corpus(cfg))
            for (auto& p : segment(s, 4))
                pieces.push_back(std::move(p));
        ClassifierBundle b;
        b.pipeline = FeaturePipeline::fit(Scheme::Tfidf, pieces, {});
        std::vector<LabeledVector> data;
        for (const auto& p : pieces)
            data.push_back({b.pipeline.featurize(p), p.label == School::North ? 0 : 1});
        b.model = train_classifier(data, {"North", "South"}, {});
        return b;
    }();
    return bundle;
}

Score north_piece(uint64_t seed) {
    SynthConfig cfg;
    cfg.pieces = 2;
    cfg.kind = SynthKind::Gradient;
    cfg.seed = seed;
    return make_style_corpus(cfg)[0]; // first half of the corpus is North
}

std::vector<Rational> measure_sums(const Score& s) {
    std::vector<Rational> out;
    for (const auto& m : s.measures)
        out.push_back(m.total_duration());
    return out;
}

} // namespace

TEST_CASE("splitting a quarter note by (1/3, 2/3) keeps pitch and total duration") {
    Score s = score_of("key: 1=C\ntime: 2/4\n\n1!tk 2\n");
    Mutation m{MutationKind::SplitNote, 0, 0, 1}; // pattern (1/3, 2/3)
    Result<Score> r = apply_mutation(s, m);
    REQUIRE(r.ok());
    const auto& notes = r.value->measures[0].notes;
    REQUIRE(notes.size() == 3);
    CHECK(notes[0].degree == 1);
    CHECK(notes[1].degree == 1);
    CHECK(notes[0].duration == Rational(1, 3));
    CHECK(notes[1].duration == Rational(2, 3));
    CHECK(notes[0].technique == "tk");   // first part keeps the tag
    CHECK(notes[1].technique == "none");
    CHECK(r.value->measures[0].total_duration() == s.measures[0].total_duration());
}

TEST_CASE("merging two quarters makes a half note at the first pitch") {
    Score s = score_of("key: 1=C\ntime: 2/4\n\n1 2\n");
    Result<Score> r = apply_mutation(s, {MutationKind::MergeNotes, 0, 0, -1});
    REQUIRE(r.ok());
    REQUIRE(r.value->measures[0].notes.size() == 1);
    CHECK(r.value->measures[0].notes[0].degree == 1); // C, the first note's pitch
    CHECK(r.value->measures[0].notes[0].duration == Rational(2));
}

TEST_CASE("raising C4 by two semitones lands on D4") {
    Score s = score_of("key: 1=C\ntime: 2/4\n\n1 2\n");
    TransferConfig wide;
    wide.range_low_midi = 0;
    wide.range_high_midi = 127;
    Result<Score> r = apply_mutation(s, {MutationKind::RaisePitch, 0, 2, -1}, wide);
    REQUIRE(r.ok());
    CHECK(r.value->measures[0].notes[0].degree == 2);
    CHECK(r.value->measures[0].notes[0].accidental == 0);

    // +1 instead lands on the sharpened degree
    r = apply_mutation(s, {MutationKind::RaisePitch, 0, 1, -1}, wide);
    REQUIRE(r.ok());
    CHECK(r.value->measures[0].notes[0].degree == 1);
    CHECK(r.value->measures[0].notes[0].accidental == 1);
}

TEST_CASE("invalid mutations are refused with a reason") {
    Score s = score_of("key: 1=C\ntime: 2/4\n\n1//// 2 | 3 0\n");
    // 1/16 halved twice leaves the denominator set
    CHECK(!apply_mutation(s, {MutationKind::SplitNote, 0, 0, 0}).ok());
    // merge across the barline
    CHECK(!apply_mutation(s, {MutationKind::MergeNotes, 1, 0, -1}).ok());
    // merge into a rest
    CHECK(!apply_mutation(s, {MutationKind::MergeNotes, 2, 0, -1}).ok());
    // rests take no pitch mutations
    CHECK(!apply_mutation(s, {MutationKind::RaisePitch, 3, 1, -1}).ok());
    // playable range stops a lowered bottom note
    TransferConfig tight;
    tight.range_low_midi = 60;
    tight.range_high_midi = 62;
    CHECK(!apply_mutation(s, {MutationKind::LowerPitch, 0, 2, -1}, tight).ok());
    CHECK(!apply_mutation(s, {MutationKind::RaisePitch, 1, 2, -1}, tight).ok());
    // out-of-bounds position
    CHECK(!apply_mutation(s, {MutationKind::RaisePitch, 99, 1, -1}).ok());
}

TEST_CASE("enumerated mutations all apply cleanly") {
    Score piece = north_piece(21);
    TransferConfig cfg;
    auto groups = enumerate_mutations(piece, cfg);
    size_t total = 0;
    for (const auto& g : groups) {
        total += g.size();
        for (const auto& m : g) {
            Result<Score> r = apply_mutation(piece, m, cfg);
            CHECK(r.ok());
            CHECK(measure_sums(*r.value) == measure_sums(piece));
        }
    }
    CHECK(total > 0);
}

TEST_CASE("zero iterations return the piece untouched with an empty trace") {
    Score piece = north_piece(22);
    TransferConfig cfg;
    cfg.iterations = 0;
    cfg.seed = 1;
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    CHECK(!r.aborted);
    CHECK(r.piece == piece);
    CHECK(r.entries.empty());
    CHECK(r.p_initial_start == r.p_initial_end);
}

TEST_CASE("accepted steps strictly descend in p(source) and never flip the label") {
    Score piece = north_piece(23);
    TransferConfig cfg;
    cfg.iterations = 60;
    cfg.seed = 99;
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    REQUIRE(!r.aborted);
    double last_accepted = r.p_initial_start;
    int accepted = 0;
    for (const auto& e : r.entries) {
        if (!e.accepted)
            continue;
        CHECK(e.p_after < e.p_before);
        CHECK(e.p_before == last_accepted);
        last_accepted = e.p_after;
        ++accepted;
    }
    CHECK(accepted > 0);
    CHECK(r.p_initial_end == last_accepted);
    CHECK(r.p_initial_end < r.p_initial_start);
}

TEST_CASE("rejected proposals leave the piece exactly as it was") {
    Score piece = north_piece(29);
    TransferConfig cfg;
    cfg.iterations = 40;
    cfg.seed = 3;
    cfg.checkpoints = {0, 40};
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    // replay the trace: apply only accepted mutations
    Score replay = piece;
    for (const auto& e : r.entries) {
        if (!e.accepted)
            continue;
        Result<Score> step = apply_mutation(replay, e.mutation, cfg);
        REQUIRE(step.ok());
        replay = std::move(*step.value);
    }
    CHECK(replay == r.piece);
}

TEST_CASE("measure totals survive any number of accepted mutations") {
    Score piece = north_piece(24);
    std::vector<Rational> before = measure_sums(piece);
    TransferConfig cfg;
    cfg.iterations = 60;
    cfg.seed = 7;
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    CHECK(measure_sums(r.piece) == before);
}

TEST_CASE("the trace's split/merge ledger reconciles with the output length") {
    Score piece = north_piece(25);
    TransferConfig cfg;
    cfg.iterations = 60;
    cfg.seed = 13;
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    long long net = 0;
    for (const auto& e : r.entries) {
        if (!e.accepted)
            continue;
        if (e.mutation.kind == MutationKind::SplitNote)
            net += static_cast<long long>(split_patterns()[e.mutation.split_pattern].size()) - 1;
        else if (e.mutation.kind == MutationKind::MergeNotes)
            net -= 1;
    }
    CHECK(static_cast<long long>(r.piece.note_count()) ==
          static_cast<long long>(piece.note_count()) + net);
}

TEST_CASE("melody transfer is bit-reproducible under a fixed seed") {
    Score piece = north_piece(26);
    TransferConfig cfg;
    cfg.iterations = 30;
    cfg.seed = 5;
    MelodyTransferResult a = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    MelodyTransferResult b = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    CHECK(a.piece == b.piece);
    REQUIRE(a.entries.size() == b.entries.size());
    for (size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].accepted == b.entries[i].accepted);
        CHECK(a.entries[i].p_after == b.entries[i].p_after);
        CHECK(a.entries[i].mutation.position == b.entries[i].mutation.position);
    }
}

TEST_CASE("most seeds lower p(source) within 60 iterations") {
    Score piece = north_piece(27);
    int lowered = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        TransferConfig cfg;
        cfg.iterations = 60;
        cfg.seed = seed;
        MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
        REQUIRE(!r.aborted);
        lowered += r.p_initial_end < r.p_initial_start;
    }
    CHECK(lowered >= 18); // 90% of 20 seeded trials
}

TEST_CASE("a piece with no valid mutation terminates early with a note") {
    // a single 1/16 note: splits leave the denominator set, there is nothing
    // to merge, and a one-semitone-wide range blocks every pitch shift
    Score piece = score_of("key: 1=D\ntime: 2/4\n\n1////\n");
    TransferConfig cfg;
    cfg.iterations = 10;
    cfg.seed = 2;
    cfg.force = true;
    cfg.range_low_midi = 62;
    cfg.range_high_midi = 62;
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::North, cfg);
    CHECK(r.entries.empty());
    CHECK(r.note.find("no valid mutation") != std::string::npos);
    CHECK(r.piece == piece);
}

TEST_CASE("a label mismatch aborts unless forced") {
    Score piece = north_piece(28);
    TransferConfig cfg;
    cfg.iterations = 5;
    cfg.seed = 1;
    // the piece is North; calling it South must trip the precondition
    MelodyTransferResult r = melody_transfer(piece, gradient_bundle(), School::South, cfg);
    CHECK(r.aborted);
    CHECK(!r.note.empty());
    cfg.force = true;
    MelodyTransferResult forced = melody_transfer(piece, gradient_bundle(), School::South, cfg);
    CHECK(!forced.aborted);
}

namespace {

CrfModel all_none_tagger() {
    SynthConfig cfg;
    cfg.pieces = 10;
    cfg.kind = SynthKind::Gradient;
    cfg.seed = 31;
    std::vector<TaggedSequence> seqs;
    for (const auto& s : make_style_corpus(cfg))
        for (auto& q : segment_tagged(s, 4)) {
            for (auto& t : q.tags)
                t = "none";
            seqs.push_back(std::move(q));
        }
    CrfConfig cc;
    cc.max_iters = 30;
    return train_crf(seqs, TechniqueRegistry::builtin().codes(), cc);
}

CrfModel south_tagger() {
    SynthConfig cfg;
    cfg.pieces = 60;
    cfg.kind = SynthKind::Gradient;
    cfg.seed = 32;
    std::vector<TaggedSequence> seqs;
    for (const auto& s : make_style_corpus(cfg)) {
        if (s.school != School::South)
            continue;
        for (auto& q : segment_tagged(s, 4))
            seqs.push_back(std::move(q));
    }
    CrfConfig cc;
    cc.max_iters = 60;
    return train_crf(seqs, TechniqueRegistry::builtin().codes(), cc);
}

} // namespace

TEST_CASE("a tagger trained on an all-none corpus tags everything none") {
    CrfModel tagger = all_none_tagger();
    Score piece = north_piece(33);
    Score out = technique_transfer(piece, tagger);
    for (const auto& m : out.measures)
        for (const auto& n : m.notes)
            CHECK(n.technique == "none");
}

TEST_CASE("technique transfer rewrites only the technique field") {
    CrfModel tagger = south_tagger();
    Score piece = north_piece(34);
    Score out = technique_transfer(piece, tagger);
    REQUIRE(out.measures.size() == piece.measures.size());
    for (size_t m = 0; m < out.measures.size(); ++m) {
        REQUIRE(out.measures[m].notes.size() == piece.measures[m].notes.size());
        for (size_t n = 0; n < out.measures[m].notes.size(); ++n) {
            NoteEvent a = piece.measures[m].notes[n], b = out.measures[m].notes[n];
            CHECK(a.degree == b.degree);
            CHECK(a.accidental == b.accidental);
            CHECK(a.octave_shift == b.octave_shift);
            CHECK(a.duration == b.duration);
            if (b.is_rest())
                CHECK(b.technique == "none");
        }
    }

    // both decoder variants are runnable: plain, and with rules
    RuleSet rules = parse_rules("when dur=1 boost tr 0.5\n", tagger.tags);
    Score with_rules = technique_transfer(piece, tagger, &rules);
    CHECK(with_rules.measures.size() == piece.measures.size());
}

TEST_CASE("whole-score transfer assembles windows, remainder and checkpoints") {
    SynthConfig sc;
    sc.pieces = 2;
    sc.kind = SynthKind::Gradient;
    sc.seed = 40;
    sc.measures_per_piece = 10; // 2 windows + 2 remainder measures
    Score score = make_style_corpus(sc)[0];
    CrfModel tagger = south_tagger();

    TransferConfig cfg;
    cfg.iterations = 20;
    cfg.checkpoints = {0, 10, 20};
    cfg.seed = 77;
    StyleTransferResult r = run_style_transfer(score, School::North, School::South,
                                               gradient_bundle(), tagger, nullptr, cfg);
    REQUIRE(!r.aborted);
    CHECK(r.windows.size() == 2);
    CHECK(r.remainder_measures == 2);
    REQUIRE(r.checkpoints.size() == 3);

    std::vector<Rational> before;
    for (const auto& m : score.measures)
        before.push_back(m.total_duration());
    for (const auto& [c, snapshot] : r.checkpoints) {
        CHECK(snapshot.measures.size() == score.measures.size());
        std::vector<Rational> after;
        for (const auto& m : snapshot.measures)
            after.push_back(m.total_duration());
        CHECK(after == before);
        // remainder measures pass through untouched (modulo technique tags)
        for (size_t i = 8; i < 10; ++i)
            for (size_t n = 0; n < snapshot.measures[i].notes.size(); ++n)
                CHECK(snapshot.measures[i].notes[n].duration ==
                      score.measures[i].notes[n].duration);
        // every checkpoint reparses and exports cleanly
        ParseResult reparsed = parse_score(serialize_score(snapshot));
        CHECK(reparsed.ok());
        CHECK(testsupport::check_xml_well_formed(export_musicxml(snapshot)).ok);
        CHECK(r.technique_counts.count(c) == 1);
    }

    // identity configuration: no iterations, tagging aside the melody is kept
    TransferConfig identity;
    identity.iterations = 0;
    identity.checkpoints = {0};
    identity.seed = 1;
    StyleTransferResult id = run_style_transfer(score, School::North, School::South,
                                                gradient_bundle(), tagger, nullptr, identity);
    REQUIRE(!id.aborted);
    Score melody_only = id.final_score;
    for (auto& m : melody_only.measures)
        for (auto& n : m.notes)
            n.technique = "none";
    Score original_plain = score;
    for (auto& m : original_plain.measures)
        for (auto& n : m.notes)
            n.technique = "none";
    CHECK(melody_only == original_plain);
}

TEST_CASE("the trace formatter emits one line per iteration") {
    SynthConfig sc;
    sc.pieces = 2;
    sc.kind = SynthKind::Gradient;
    sc.seed = 41;
    sc.measures_per_piece = 8;
    Score score = make_style_corpus(sc)[0];
    CrfModel tagger = south_tagger();
    TransferConfig cfg;
    cfg.iterations = 10;
    cfg.checkpoints = {0, 10};
    cfg.seed = 9;
    StyleTransferResult r = run_style_transfer(score, School::North, School::South,
                                               gradient_bundle(), tagger, nullptr, cfg);
    std::string trace = format_transfer_trace(r, School::North, School::South, cfg.seed);
    CHECK(trace.find("dizi-trace v1") == 0);
    size_t iter_lines = 0, pos = 0;
    while ((pos = trace.find("\niter ", pos)) != std::string::npos) {
        ++iter_lines;
        ++pos;
    }
    CHECK(iter_lines == 20); // 2 windows x 10 iterations
    CHECK(trace.find("checkpoint 0 ") != std::string::npos);
    CHECK(trace.find("p_before") != std::string::npos);
}
