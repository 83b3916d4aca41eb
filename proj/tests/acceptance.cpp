// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. argv[1] is the path to the dizi CLI binary (used by the determinism
// and conditional corpus checks).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "crf_oracle.hpp"
#include "dizi/classify.hpp"
#include "dizi/musicxml.hpp"
#include "dizi/notation.hpp"
#include "dizi/synth.hpp"
#include "dizi/tagger.hpp"
#include "dizi/transfer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace dizi;
using Clock = std::chrono::steady_clock;

namespace {

struct Harness {
    int failures = 0;

    void run(const std::string& name, const std::function<std::string()>& body) {
        std::string detail;
        try {
            detail = body(); // empty string means pass
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (detail.empty()) {
            std::cout << "[PASS] " << name << "\n";
        } else {
            std::cout << "[FAIL] " << name << ": " << detail << "\n";
            ++failures;
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string dizi_binary;

int run_cli(const std::string& args, const fs::path& stdout_file) {
    std::string cmd = dizi_binary + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
    return std::system(cmd.c_str());
}

std::vector<TokenSequence> segment_all(const std::vector<Score>& corpus, int window = 4) {
    std::vector<TokenSequence> out;
    for (const auto& s : corpus)
        for (auto& p : segment(s, window))
            out.push_back(std::move(p));
    return out;
}

ClassifierBundle train_bundle(const std::vector<TokenSequence>& pieces, Scheme scheme) {
    ClassifierBundle b;
    b.pipeline = FeaturePipeline::fit(scheme, pieces, {});
    std::vector<LabeledVector> data;
    for (const auto& p : pieces)
        data.push_back({b.pipeline.featurize(p), p.label == School::North ? 0 : 1});
    b.model = train_classifier(data, {"North", "South"}, {});
    return b;
}

std::string check_rel_error(double numeric, double analytic) {
    double rel = std::fabs(numeric - analytic) /
                 std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
    if (rel > 1e-4)
        return "relative error " + fmt_double(rel);
    return "";
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1)
        dizi_binary = argv[1];
    Harness h;

    h.run("notation round-trip: 500 random scores, byte-identical, < 10 s", [] {
        auto start = Clock::now();
        Rng rng(500500);
        for (int i = 0; i < 500; ++i) {
            Score s = random_score(rng);
            std::string first = serialize_score(s);
            ParseResult res = parse_score(first);
            if (!res.ok())
                return "score " + std::to_string(i) + " failed to reparse";
            if (!(*res.score == s))
                return "score " + std::to_string(i) + " changed structurally";
            if (serialize_score(*res.score) != first)
                return "score " + std::to_string(i) + " changed bytes";
        }
        double elapsed = seconds_since(start);
        if (elapsed >= 10.0)
            return "took " + fmt_double(elapsed) + " s";
        return std::string();
    });

    h.run("token fidelity: quarter-note degree 1 in 1=C tokenizes to C41", [] {
        Score s;
        s.key = {0, 4};
        s.time = {4, 4};
        s.measures.push_back({{{1, 0, 0, Rational(1), "none"}}});
        TokenSequence seq = tokenize(s);
        if (seq.tokens.size() != 1 || seq.tokens[0] != "C41")
            return "got '" + (seq.tokens.empty() ? "" : seq.tokens[0]) + "'";
        return std::string();
    });

    h.run("musicxml validity: 100 generated scores, notes 1:1, techniques as lyrics", [] {
        Rng rng(314);
        for (int i = 0; i < 100; ++i) {
            Score s = random_score(rng);
            std::string xml = export_musicxml(s);
            auto check = testsupport::check_xml_well_formed(xml);
            if (!check.ok)
                return "score " + std::to_string(i) + ": " + check.error;
            int notes = testsupport::count_elements(xml, "note");
            if (notes != static_cast<int>(s.note_count()))
                return "score " + std::to_string(i) + ": " + std::to_string(notes) +
                       " note elements for " + std::to_string(s.note_count()) + " events";
            int tagged = 0;
            for (const auto& m : s.measures)
                for (const auto& n : m.notes)
                    tagged += !n.is_rest() && n.technique != "none";
            if (testsupport::count_elements(xml, "lyric") != tagged)
                return "score " + std::to_string(i) + ": lyric count mismatch";
        }
        return std::string();
    });

    h.run("crf oracle equivalence: 200 random instances, Viterbi == enumeration, < 30 s", [] {
        auto start = Clock::now();
        Rng rng(4242);
        std::vector<std::string> vocab{"C41", "D40.5", "E41/3", "G52", "R1", "A40.25"};
        for (int trial = 0; trial < 200; ++trial) {
            int n_tags = 2 + static_cast<int>(rng.next_below(3));
            CrfModel model = testsupport::random_crf_model(rng, vocab, n_tags);
            size_t len = 1 + rng.next_below(6);
            std::vector<std::string> tokens;
            for (size_t t = 0; t < len; ++t)
                tokens.push_back(vocab[rng.next_below(vocab.size())]);
            auto viterbi = testsupport::tag_ids(model, decode(model, tokens));
            auto brute = testsupport::brute_force_decode(model, tokens);
            if (viterbi != brute)
                return "mismatch on trial " + std::to_string(trial);
        }
        double elapsed = seconds_since(start);
        if (elapsed >= 30.0)
            return "took " + fmt_double(elapsed) + " s";
        return std::string();
    });

    h.run("gradient checks: crf, classifier and embedding losses vs finite differences", [] {
        const double fd = 1e-6;

        // CRF conditional log-likelihood on a 3-token/3-tag toy instance
        {
            std::vector<TaggedSequence> data(1);
            data[0].tokens = {"C41", "D40.5", "C41"};
            data[0].tags = {"none", "tk", "tr"};
            CrfProblem prob = build_crf_problem(data, {"none", "tk", "tr"}, 0.1);
            Rng rng(6);
            std::vector<double> params(prob.n_params());
            for (double& p : params)
                p = rng.next_double() - 0.5;
            std::vector<double> grad = prob.gradient(params);
            for (size_t i = 0; i < params.size(); ++i) {
                double saved = params[i];
                params[i] = saved + fd;
                double up = prob.objective(params);
                params[i] = saved - fd;
                double down = prob.objective(params);
                params[i] = saved;
                std::string err = check_rel_error((up - down) / (2 * fd), grad[i]);
                if (!err.empty())
                    return "crf param " + std::to_string(i) + ": " + err;
            }
        }

        // log-linear classifier loss
        {
            Rng rng(7);
            std::vector<LabeledVector> data;
            for (int i = 0; i < 12; ++i) {
                FeatureVector x;
                x.dim = 3;
                for (int d = 0; d < 3; ++d)
                    x.entries.emplace_back(d, rng.next_double() * 2 - 1);
                data.push_back({x, i % 2});
            }
            std::vector<double> params(2 * 3 + 2);
            for (double& p : params)
                p = rng.next_double() - 0.5;
            std::vector<double> grad = classifier_gradient(data, 2, 3, params, 0.01);
            for (size_t i = 0; i < params.size(); ++i) {
                double saved = params[i];
                params[i] = saved + fd;
                double up = classifier_loss(data, 2, 3, params, 0.01);
                params[i] = saved - fd;
                double down = classifier_loss(data, 2, 3, params, 0.01);
                params[i] = saved;
                std::string err = check_rel_error((up - down) / (2 * fd), grad[i]);
                if (!err.empty())
                    return "classifier param " + std::to_string(i) + ": " + err;
            }
        }

        // negative-sampling embedding loss for one (center, context, negatives)
        {
            Rng rng(8);
            int dim = 5;
            auto rand_vec = [&] {
                std::vector<double> v(dim);
                for (double& x : v)
                    x = rng.next_double() - 0.5;
                return v;
            };
            std::vector<double> center = rand_vec(), context = rand_vec();
            std::vector<std::vector<double>> negatives{rand_vec(), rand_vec()};
            std::vector<double> g_center, g_context;
            std::vector<std::vector<double>> g_neg;
            ns_pair_gradient(center, context, negatives, g_center, g_context, g_neg);
            for (int i = 0; i < dim; ++i) {
                double saved = center[i];
                center[i] = saved + fd;
                double up = ns_pair_loss(center, context, negatives);
                center[i] = saved - fd;
                double down = ns_pair_loss(center, context, negatives);
                center[i] = saved;
                std::string err = check_rel_error((up - down) / (2 * fd), g_center[i]);
                if (!err.empty())
                    return "embedding center " + std::to_string(i) + ": " + err;
            }
        }
        return std::string();
    });

    h.run("classifier separability: 10-fold macro recall/F1 >= 95 for bow and tfidf, < 60 s", [] {
        auto start = Clock::now();
        SynthConfig sc;
        sc.pieces = 200; // 100 per class, disjoint token distributions
        sc.kind = SynthKind::Disjoint;
        sc.seed = 1;
        std::vector<TokenSequence> pieces = segment_all(make_style_corpus(sc));
        for (Scheme scheme : {Scheme::Bow, Scheme::Tfidf}) {
            CrossValidateConfig cfg;
            cfg.seed = 11;
            EvalReport report = cross_validate(pieces, scheme, 10, cfg);
            if (report.macro_recall < 95.0 || report.macro_f1 < 95.0)
                return std::string(scheme_name(scheme)) + ": recall " +
                       fmt_fixed(report.macro_recall, 2) + " f1 " + fmt_fixed(report.macro_f1, 2);
        }
        double elapsed = seconds_since(start);
        if (elapsed >= 60.0)
            return "took " + fmt_double(elapsed) + " s";
        return std::string();
    });

    h.run("transfer monotonicity: strict p-descent, stable label, 20 seeds x 60 iterations", [] {
        SynthConfig sc;
        sc.pieces = 100;
        sc.kind = SynthKind::Gradient;
        sc.seed = 5;
        std::vector<Score> corpus = make_style_corpus(sc);
        ClassifierBundle bundle = train_bundle(segment_all(corpus), Scheme::Tfidf);
        Score piece = corpus[0]; // a North piece
        for (uint64_t seed = 0; seed < 20; ++seed) {
            TransferConfig cfg;
            cfg.iterations = 60;
            cfg.seed = seed;
            MelodyTransferResult r = melody_transfer(piece, bundle, School::North, cfg);
            if (r.aborted)
                return "seed " + std::to_string(seed) + " aborted: " + r.note;
            double last = r.p_initial_start;
            Score replay = piece;
            for (const auto& e : r.entries) {
                if (!e.accepted)
                    continue;
                if (!(e.p_after < e.p_before) || e.p_before != last)
                    return "seed " + std::to_string(seed) + " iteration " +
                           std::to_string(e.iteration) + " breaks strict descent";
                last = e.p_after;
                Result<Score> step = apply_mutation(replay, e.mutation, cfg);
                if (!step.ok())
                    return "seed " + std::to_string(seed) + ": accepted mutation failed";
                replay = *step.value;
                Prediction pred = predict(bundle.model, bundle.pipeline.featurize(tokenize(replay)));
                if (bundle.model.class_names[pred.label] != "North")
                    return "seed " + std::to_string(seed) + " iteration " +
                           std::to_string(e.iteration) + " flipped the label";
            }
        }
        return std::string();
    });

    h.run("transfer structural soundness: exact measure sums, clean 0/20/60 exports", [] {
        SynthConfig sc;
        sc.pieces = 2;
        sc.kind = SynthKind::Gradient;
        sc.seed = 40;
        sc.measures_per_piece = 10;
        Score score = make_style_corpus(sc)[0];

        SynthConfig tc;
        tc.pieces = 100;
        tc.kind = SynthKind::Gradient;
        tc.seed = 5;
        std::vector<Score> corpus = make_style_corpus(tc);
        ClassifierBundle bundle = train_bundle(segment_all(corpus), Scheme::Tfidf);

        std::vector<TaggedSequence> south;
        for (const auto& s : corpus)
            if (s.school == School::South)
                for (auto& q : segment_tagged(s, 4))
                    south.push_back(std::move(q));
        CrfConfig cc;
        cc.max_iters = 60;
        CrfModel tagger = train_crf(south, TechniqueRegistry::builtin().codes(), cc);

        TransferConfig cfg;
        cfg.iterations = 60;
        cfg.checkpoints = {0, 20, 60};
        cfg.seed = 9;
        StyleTransferResult r =
            run_style_transfer(score, School::North, School::South, bundle, tagger, nullptr, cfg);
        if (r.aborted)
            return "aborted: " + r.note;
        if (r.checkpoints.size() != 3)
            return "expected 3 checkpoints, got " + std::to_string(r.checkpoints.size());
        for (const auto& [c, snapshot] : r.checkpoints) {
            if (snapshot.measures.size() != score.measures.size())
                return "checkpoint " + std::to_string(c) + " changed the measure count";
            for (size_t m = 0; m < snapshot.measures.size(); ++m)
                if (!(snapshot.measures[m].total_duration() == score.measures[m].total_duration()))
                    return "checkpoint " + std::to_string(c) + " measure " + std::to_string(m + 1) +
                           " changed its duration sum";
            ParseResult reparsed = parse_score(serialize_score(snapshot));
            if (!reparsed.ok())
                return "checkpoint " + std::to_string(c) + " does not reparse";
            auto xml = testsupport::check_xml_well_formed(export_musicxml(snapshot));
            if (!xml.ok)
                return "checkpoint " + std::to_string(c) + " export: " + xml.error;
        }
        return std::string();
    });

    h.run("tagger metrics: fixture scores accuracy 80.0 / oov 50.0; zero-OOV is undefined", [] {
        CrfModel model;
        model.tags = {"none", "tk", "tr"};
        model.transition.assign(9, 0.0);
        auto pin = [&](const std::string& token, const std::string& tag) {
            model.feature_index.emplace("w=" + token,
                                        static_cast<int>(model.feature_names.size()));
            model.feature_names.push_back("w=" + token);
            for (int k = 0; k < 3; ++k)
                model.emission.push_back(model.tags[k] == tag ? 10.0 : 0.0);
            model.train_tokens.insert(token);
        };
        pin("C41", "none");
        pin("D41", "tk");
        pin("E41", "tr");

        TaggedSequence test;
        test.tokens = {"C41", "D41", "E41", "X90.5", "Y90.5"};
        test.tags = {"none", "tk", "tr", "none", "tk"};
        TagEvalResult res = evaluate_tagger(model, nullptr, {test}, model.train_tokens);
        if (res.accuracy != 80.0)
            return "accuracy " + fmt_double(res.accuracy);
        if (!res.oov_accuracy || *res.oov_accuracy != 50.0)
            return std::string("oov accuracy ") +
                   (res.oov_accuracy ? fmt_double(*res.oov_accuracy) : "undefined");

        TaggedSequence in_vocab;
        in_vocab.tokens = {"C41", "D41"};
        in_vocab.tags = {"none", "tk"};
        TagEvalResult zero = evaluate_tagger(model, nullptr, {in_vocab}, model.train_tokens);
        if (zero.oov_accuracy.has_value())
            return "zero-OOV set reported " + fmt_double(*zero.oov_accuracy) +
                   " instead of undefined";
        return std::string();
    });

    h.run("determinism: cmd_eval and cmd_transfer are byte-identical across reruns", [] {
        if (dizi_binary.empty())
            return std::string("dizi binary path not supplied");
        fs::path tmp = fs::temp_directory_path() / "dizi_acceptance";
        fs::remove_all(tmp);
        fs::create_directories(tmp);

        fs::path corpus = tmp / "corpus";
        if (run_cli("synth --out " + corpus.string() + " --pieces 60 --kind gradient --seed 5",
                    tmp / "synth.log") != 0)
            return std::string("synth failed");
        if (run_cli("train --corpus " + corpus.string() + " --features tfidf --out " +
                        (tmp / "clf.model").string() + " --seed 5",
                    tmp / "train.log") != 0)
            return std::string("train failed");
        if (run_cli("tag-train --corpus " + corpus.string() + " --school South --out " +
                        (tmp / "tag.model").string() + " --seed 5 --iters 40",
                    tmp / "tagtrain.log") != 0)
            return std::string("tag-train failed");

        std::string eval_args =
            "eval --corpus " + corpus.string() + " --features tfidf --folds 10 --seed 7";
        if (run_cli(eval_args, tmp / "eval1.txt") != 0)
            return std::string("eval failed");
        if (run_cli(eval_args, tmp / "eval2.txt") != 0)
            return std::string("eval rerun failed");
        if (read_file(tmp / "eval1.txt") != read_file(tmp / "eval2.txt"))
            return std::string("eval outputs differ");

        // the same command twice: stdout and every produced file must match
        std::string transfer_args =
            "transfer --in " + (corpus / "north_0.jp").string() + " --classifier " +
            (tmp / "clf.model").string() + " --tagger " + (tmp / "tag.model").string() +
            " --source North --target South --iterations 60 --seed 3 --out-dir " +
            (tmp / "t1").string();
        if (run_cli(transfer_args, tmp / "transfer1.txt") != 0)
            return std::string("transfer failed");
        fs::copy(tmp / "t1", tmp / "t1_first_run", fs::copy_options::recursive);
        if (run_cli(transfer_args, tmp / "transfer2.txt") != 0)
            return std::string("transfer rerun failed");
        if (read_file(tmp / "transfer1.txt") != read_file(tmp / "transfer2.txt"))
            return std::string("transfer stdout differs");
        for (const auto& entry : fs::directory_iterator(tmp / "t1_first_run")) {
            fs::path other = tmp / "t1" / entry.path().filename();
            if (!fs::exists(other))
                return "missing " + other.string();
            if (read_file(entry.path()) != read_file(other))
                return entry.path().filename().string() + " differs between runs";
        }
        fs::remove_all(tmp);
        return std::string();
    });

    h.run("conditional corpus statistics (public corpus, when present)", [] {
        const char* env = std::getenv("DIZI_PAPER_CORPUS");
        if (!env || !fs::is_directory(env)) {
            std::cout << "  (skipped: DIZI_PAPER_CORPUS not set; expected totals are 28 songs / "
                         "19413 notes)\n";
            return std::string();
        }
        if (dizi_binary.empty())
            return std::string("dizi binary path not supplied");
        fs::path out = fs::temp_directory_path() / "dizi_stats.txt";
        if (run_cli("stats --corpus " + std::string(env), out) != 0)
            return std::string("stats failed");
        std::string text = read_file(out);
        long long songs = -1, notes = -1;
        std::istringstream in(text);
        std::string word;
        while (in >> word) {
            if (word == "songs")
                in >> songs;
            else if (word == "notes")
                in >> notes;
        }
        if (songs != 28 || notes != 19413)
            std::cout << "  warning: corpus totals " << songs << " songs / " << notes
                      << " notes differ from the published 28 / 19413 (the public corpus may "
                         "have grown)\n";
        return std::string();
    });

    std::cout << (h.failures == 0 ? "all criteria passed\n"
                                  : std::to_string(h.failures) + " criteria failed\n");
    return h.failures == 0 ? 0 : 1;
}
