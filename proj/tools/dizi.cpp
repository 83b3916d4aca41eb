// dizi: command-line front end for the jianpu toolkit. Subcommands cover
// corpus statistics, tokenization, MusicXML export, synthetic corpus
// generation, classifier training/evaluation, technique-tagger training/
// evaluation, and style transfer.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dizi/classify.hpp"
#include "dizi/musicxml.hpp"
#include "dizi/notation.hpp"
#include "dizi/synth.hpp"
#include "dizi/tagger.hpp"
#include "dizi/transfer.hpp"

namespace fs = std::filesystem;
using namespace dizi;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << content;
}

struct CorpusFile {
    fs::path path;
    Score score;
};

// All .jp files under dir (sorted by name for reproducibility). Unparseable
// files are reported to stderr; the run continues.
std::vector<CorpusFile> load_corpus(const fs::path& dir, int* failures = nullptr) {
    if (!fs::is_directory(dir))
        throw std::runtime_error(dir.string() + " is not a directory");
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".jp")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());

    std::vector<CorpusFile> out;
    for (const auto& p : paths) {
        ParseResult res = parse_score(read_file(p));
        if (!res.ok()) {
            if (failures)
                ++*failures;
            for (const auto& d : res.diagnostics)
                std::cerr << p.string() << ":" << d.str() << "\n";
            continue;
        }
        out.push_back({p, std::move(*res.score)});
    }
    return out;
}

std::vector<TokenSequence> corpus_pieces(const std::vector<CorpusFile>& corpus, int window) {
    std::vector<TokenSequence> pieces;
    for (const auto& f : corpus)
        for (auto& piece : segment(f.score, window))
            pieces.push_back(std::move(piece));
    return pieces;
}

School parse_school_arg(const std::string& name) {
    auto s = school_from_name(name);
    if (!s)
        throw std::runtime_error("unknown school '" + name + "' (North, South or Other)");
    return *s;
}

std::string corpus_default() {
    const char* env = std::getenv("DIZI_CORPUS");
    return env ? env : "";
}

int cmd_stats(const std::string& corpus_dir) {
    int failures = 0;
    std::vector<CorpusFile> corpus = load_corpus(corpus_dir, &failures);

    std::map<std::string, int> songs, notes;
    std::map<std::string, std::map<std::string, int>> techniques;
    size_t total_notes = 0;
    for (const auto& f : corpus) {
        std::string school = school_name(f.score.school);
        ++songs[school];
        notes[school] += static_cast<int>(f.score.note_count());
        total_notes += f.score.note_count();
        for (const auto& m : f.score.measures)
            for (const auto& n : m.notes)
                ++techniques[school][n.technique];
    }

    std::cout << "songs: " << corpus.size() << "   notes: " << total_notes << "\n";
    for (const auto& [school, count] : songs) {
        std::cout << "  " << school << ": " << count << " songs, " << notes[school] << " notes;";
        for (const auto& [code, n] : techniques[school])
            std::cout << " " << code << "=" << n;
        std::cout << "\n";
    }

    std::cout << "\ndizi-stats v1\n";
    std::cout << "songs " << corpus.size() << "\n";
    std::cout << "notes " << total_notes << "\n";
    std::cout << "unparseable " << failures << "\n";
    for (const auto& [school, count] : songs) {
        std::cout << "school " << school << " songs " << count << " notes " << notes[school]
                  << "\n";
        for (const auto& [code, n] : techniques[school])
            std::cout << "technique " << school << " " << code << " " << n << "\n";
    }
    return 0;
}

int cmd_tokenize(const std::string& in, int window, bool whole, bool no_rests) {
    Score score = parse_score_or_throw(read_file(in));
    std::vector<TokenSequence> pieces;
    if (whole)
        pieces.push_back(tokenize(score, !no_rests));
    else
        pieces = segment(score, window, !no_rests);
    for (const auto& piece : pieces) {
        for (size_t i = 0; i < piece.tokens.size(); ++i)
            std::cout << (i ? " " : "") << piece.tokens[i];
        std::cout << "\n";
    }
    return 0;
}

int cmd_export(const std::string& in, const std::string& out) {
    Score score = parse_score_or_throw(read_file(in));
    write_file(out, export_musicxml(score));
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int pieces, int measures, const std::string& kind,
              uint64_t seed) {
    SynthConfig cfg;
    cfg.pieces = pieces;
    cfg.measures_per_piece = measures;
    cfg.seed = seed;
    if (kind == "disjoint")
        cfg.kind = SynthKind::Disjoint;
    else if (kind == "gradient")
        cfg.kind = SynthKind::Gradient;
    else
        throw std::runtime_error("unknown corpus kind '" + kind + "' (disjoint or gradient)");

    fs::create_directories(out_dir);
    std::vector<Score> corpus = make_style_corpus(cfg);
    for (const auto& s : corpus)
        write_file(fs::path(out_dir) / (s.title + ".jp"), serialize_score(s));
    std::cout << "wrote " << corpus.size() << " pieces to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_dir, const std::string& features, const std::string& out,
              int window, uint64_t seed, double l2, int iters, int dim) {
    auto scheme = scheme_from_name(features);
    if (!scheme)
        throw std::runtime_error("unknown feature scheme '" + features + "'");
    std::vector<TokenSequence> pieces = corpus_pieces(load_corpus(corpus_dir), window);
    if (pieces.empty())
        throw std::runtime_error("corpus yields no pieces");

    std::vector<School> classes;
    for (const auto& p : pieces)
        if (std::find(classes.begin(), classes.end(), p.label) == classes.end())
            classes.push_back(p.label);
    std::sort(classes.begin(), classes.end(),
              [](School a, School b) { return static_cast<int>(a) < static_cast<int>(b); });
    std::vector<std::string> class_names;
    for (School c : classes)
        class_names.push_back(school_name(c));

    EmbeddingConfig emb;
    emb.seed = seed;
    emb.dim = dim;
    ClassifierBundle bundle;
    bundle.pipeline = FeaturePipeline::fit(*scheme, pieces, emb);

    std::vector<LabeledVector> data;
    for (const auto& p : pieces) {
        int label = static_cast<int>(std::find(classes.begin(), classes.end(), p.label) -
                                     classes.begin());
        data.push_back({bundle.pipeline.featurize(p), label});
    }
    ClassifierConfig cc;
    cc.seed = seed;
    cc.l2 = l2;
    cc.max_iters = iters;
    bundle.model = train_classifier(data, class_names, cc);
    bundle.model.scheme_id = scheme_name(*scheme);

    std::ofstream f(out, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + out);
    bundle.save(f);
    std::cout << "trained " << scheme_name(*scheme) << " classifier on " << pieces.size()
              << " pieces; wrote " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& corpus_dir, const std::string& features, int folds, int window,
             uint64_t seed, double l2, int iters, int dim) {
    auto scheme = scheme_from_name(features);
    if (!scheme)
        throw std::runtime_error("unknown feature scheme '" + features + "'");
    std::vector<TokenSequence> pieces = corpus_pieces(load_corpus(corpus_dir), window);
    CrossValidateConfig cfg;
    cfg.seed = seed;
    cfg.classifier.l2 = l2;
    cfg.classifier.max_iters = iters;
    cfg.embedding.dim = dim;
    EvalReport report = cross_validate(pieces, *scheme, folds, cfg);
    std::cout << report.human_table() << "\n" << report.machine_lines();
    return 0;
}

int cmd_tag_train(const std::string& corpus_dir, const std::string& school_arg,
                  const std::string& out, int window, uint64_t seed, double l2, int iters) {
    School school = parse_school_arg(school_arg);
    std::vector<TaggedSequence> sequences;
    for (const auto& f : load_corpus(corpus_dir)) {
        if (f.score.school != school)
            continue;
        for (auto& seq : segment_tagged(f.score, window))
            sequences.push_back(std::move(seq));
    }
    if (sequences.empty())
        throw std::runtime_error(std::string("no ") + school_name(school) +
                                 " pieces in the corpus");
    CrfConfig cfg;
    cfg.seed = seed;
    cfg.l2 = l2;
    cfg.max_iters = iters;
    CrfModel model = train_crf(sequences, TechniqueRegistry::builtin().codes(), cfg);
    std::ofstream f(out, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + out);
    save_crf(model, f);
    std::cout << "trained " << school_name(school) << " tagger on " << sequences.size()
              << " sequences; wrote " << out << "\n";
    return 0;
}

int cmd_tag_eval(const std::string& model_path, const std::string& corpus_dir,
                 const std::string& school_arg, const std::string& rules_path, int window) {
    std::ifstream mf(model_path, std::ios::binary);
    if (!mf)
        throw std::runtime_error("cannot open " + model_path);
    CrfModel model = load_crf(mf);

    RuleSet rules;
    if (!rules_path.empty())
        rules = parse_rules(read_file(rules_path), model.tags);

    std::vector<TaggedSequence> sequences;
    for (const auto& f : load_corpus(corpus_dir)) {
        if (!school_arg.empty() && f.score.school != parse_school_arg(school_arg))
            continue;
        for (auto& seq : segment_tagged(f.score, window))
            sequences.push_back(std::move(seq));
    }
    TagEvalResult res =
        evaluate_tagger(model, rules.empty() ? nullptr : &rules, sequences, model.train_tokens);

    std::cout << "notes: " << res.total << "   accuracy: " << fmt_fixed(res.accuracy, 2) << "\n";
    std::cout << "oov notes: " << res.oov_total << "   oov accuracy: "
              << (res.oov_accuracy ? fmt_fixed(*res.oov_accuracy, 2) : std::string("undefined"))
              << "\n";
    std::cout << "\ndizi-tag-eval v1\n";
    std::cout << "total " << res.total << "\n";
    std::cout << "correct " << res.correct << "\n";
    std::cout << "accuracy " << fmt_double(res.accuracy) << "\n";
    std::cout << "oov_total " << res.oov_total << "\n";
    std::cout << "oov_correct " << res.oov_correct << "\n";
    std::cout << "oov_accuracy "
              << (res.oov_accuracy ? fmt_double(*res.oov_accuracy) : std::string("undefined"))
              << "\n";
    return 0;
}

int cmd_transfer(const std::string& in, const std::string& classifier_path,
                 const std::string& tagger_path, const std::string& rules_path,
                 const std::string& source, const std::string& target, int iterations,
                 uint64_t seed, const std::string& out_dir, bool force) {
    Score score = parse_score_or_throw(read_file(in));
    std::ifstream cf(classifier_path, std::ios::binary);
    if (!cf)
        throw std::runtime_error("cannot open " + classifier_path);
    ClassifierBundle bundle = ClassifierBundle::load(cf);
    std::ifstream tf(tagger_path, std::ios::binary);
    if (!tf)
        throw std::runtime_error("cannot open " + tagger_path);
    CrfModel tagger = load_crf(tf);
    RuleSet rules;
    if (!rules_path.empty())
        rules = parse_rules(read_file(rules_path), tagger.tags);

    TransferConfig cfg;
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.force = force;
    cfg.checkpoints = {0, iterations >= 20 ? 20 : iterations, iterations};

    StyleTransferResult result =
        run_style_transfer(score, parse_school_arg(source), parse_school_arg(target), bundle,
                           tagger, rules.empty() ? nullptr : &rules, cfg);
    if (result.aborted)
        throw std::runtime_error(result.note + " (use --force to transfer anyway)");

    fs::create_directories(out_dir);
    for (const auto& [checkpoint, snapshot] : result.checkpoints) {
        std::string base = "checkpoint_" + std::to_string(checkpoint);
        write_file(fs::path(out_dir) / (base + ".jp"), serialize_score(snapshot));
        write_file(fs::path(out_dir) / (base + ".musicxml"), export_musicxml(snapshot));
    }
    write_file(fs::path(out_dir) / "trace.txt",
               format_transfer_trace(result, parse_school_arg(source), parse_school_arg(target),
                                     seed));

    std::cout << "windows: " << result.windows.size()
              << "   remainder measures: " << result.remainder_measures << "\n";
    for (const auto& [checkpoint, counts] : result.technique_counts) {
        std::cout << "checkpoint " << checkpoint
                  << ": p_source=" << fmt_double(result.p_source.at(checkpoint)) << " techniques";
        for (const auto& [code, count] : counts)
            std::cout << " " << code << "=" << count;
        std::cout << "\n";
    }
    std::cout << "wrote checkpoints and trace to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dizi: jianpu score toolkit (notation, MusicXML, classification, tagging, "
                 "style transfer)"};
    app.require_subcommand(1);

    uint64_t seed = 0;

    // stats
    auto* stats = app.add_subcommand("stats", "corpus statistics per school");
    std::string stats_corpus = corpus_default();
    stats->add_option("--corpus", stats_corpus, "directory of .jp files")->required(corpus_default().empty());
    stats->add_option("--seed", seed, "unused; accepted for interface uniformity");

    // tokenize
    auto* tok = app.add_subcommand("tokenize", "print one token line per 4-measure piece");
    std::string tok_in;
    int tok_window = 4;
    bool tok_whole = false, tok_no_rests = false;
    tok->add_option("--in", tok_in, "input .jp file")->required();
    tok->add_option("--window", tok_window, "measures per piece (default 4)");
    tok->add_flag("--whole", tok_whole, "one sequence for the whole score");
    tok->add_flag("--no-rests", tok_no_rests, "drop rest tokens");
    tok->add_option("--seed", seed, "unused; accepted for interface uniformity");

    // export
    auto* exp = app.add_subcommand("export", "convert a .jp score to MusicXML");
    std::string exp_in, exp_out;
    exp->add_option("--in", exp_in, "input .jp file")->required();
    exp->add_option("--out", exp_out, "output .musicxml file")->required();
    exp->add_option("--seed", seed, "unused; accepted for interface uniformity");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic two-school corpus");
    std::string synth_out = "synth_corpus", synth_kind = "disjoint";
    int synth_pieces = 200, synth_measures = 4;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--pieces", synth_pieces, "total pieces (split evenly)");
    synth->add_option("--measures", synth_measures, "measures per piece");
    synth->add_option("--kind", synth_kind, "disjoint | gradient");
    synth->add_option("--seed", seed, "generator seed")->required();

    // train
    auto* train = app.add_subcommand("train", "train the school classifier");
    std::string train_corpus = corpus_default(), train_features = "tfidf", train_out = "classifier.model";
    int train_window = 4, train_iters = 500, train_dim = 32;
    double train_l2 = 1e-4;
    train->add_option("--corpus", train_corpus, "directory of .jp files")->required(corpus_default().empty());
    train->add_option("--features", train_features, "bow | tfidf | cbow | skipgram");
    train->add_option("--out", train_out, "model output path");
    train->add_option("--window", train_window, "measures per piece");
    train->add_option("--l2", train_l2, "L2 regularization");
    train->add_option("--iters", train_iters, "max optimizer iterations");
    train->add_option("--dim", train_dim, "embedding dimension (cbow/skipgram)");
    train->add_option("--seed", seed, "seed")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "cross-validated recall/F1 of the classifier");
    std::string eval_corpus = corpus_default(), eval_features = "tfidf";
    int eval_folds = 10, eval_window = 4, eval_iters = 500, eval_dim = 32;
    double eval_l2 = 1e-4;
    eval->add_option("--corpus", eval_corpus, "directory of .jp files")->required(corpus_default().empty());
    eval->add_option("--features", eval_features, "bow | tfidf | cbow | skipgram");
    eval->add_option("--folds", eval_folds, "number of folds (default 10)");
    eval->add_option("--window", eval_window, "measures per piece");
    eval->add_option("--l2", eval_l2, "L2 regularization");
    eval->add_option("--iters", eval_iters, "max optimizer iterations");
    eval->add_option("--dim", eval_dim, "embedding dimension (cbow/skipgram)");
    eval->add_option("--seed", seed, "fold shuffle seed")->required();

    // tag-train
    auto* tag_train = app.add_subcommand("tag-train", "train a per-school technique tagger");
    std::string tt_corpus = corpus_default(), tt_school, tt_out = "tagger.model";
    int tt_window = 4, tt_iters = 150;
    double tt_l2 = 0.05;
    tag_train->add_option("--corpus", tt_corpus, "directory of .jp files")->required(corpus_default().empty());
    tag_train->add_option("--school", tt_school, "school whose pieces to train on")->required();
    tag_train->add_option("--out", tt_out, "model output path");
    tag_train->add_option("--window", tt_window, "measures per piece");
    tag_train->add_option("--l2", tt_l2, "L2 regularization");
    tag_train->add_option("--iters", tt_iters, "max optimizer iterations");
    tag_train->add_option("--seed", seed, "seed")->required();

    // tag-eval
    auto* tag_eval = app.add_subcommand("tag-eval", "accuracy / OOV accuracy of a tagger");
    std::string te_model, te_corpus = corpus_default(), te_school, te_rules;
    int te_window = 4;
    tag_eval->add_option("--model", te_model, "trained tagger model")->required();
    tag_eval->add_option("--corpus", te_corpus, "directory of .jp files")->required(corpus_default().empty());
    tag_eval->add_option("--school", te_school, "restrict to one school");
    tag_eval->add_option("--rules", te_rules, "decode-time rules file");
    tag_eval->add_option("--window", te_window, "measures per piece");
    tag_eval->add_option("--seed", seed, "unused; accepted for interface uniformity");

    // transfer
    auto* transfer = app.add_subcommand("transfer", "classifier-guided style transfer");
    std::string tr_in, tr_classifier, tr_tagger, tr_rules, tr_source, tr_target,
        tr_out = "transfer_out";
    int tr_iterations = 60;
    bool tr_force = false;
    transfer->add_option("--in", tr_in, "input .jp file")->required();
    transfer->add_option("--classifier", tr_classifier, "trained classifier bundle")->required();
    transfer->add_option("--tagger", tr_tagger, "target school's tagger model")->required();
    transfer->add_option("--rules", tr_rules, "decode-time rules file");
    transfer->add_option("--source", tr_source, "source school")->required();
    transfer->add_option("--target", tr_target, "target school")->required();
    transfer->add_option("--iterations", tr_iterations, "mutation iterations (default 60)");
    transfer->add_option("--out-dir", tr_out, "output directory");
    transfer->add_flag("--force", tr_force, "proceed when the classifier disagrees");
    transfer->add_option("--seed", seed, "seed")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed())
            return cmd_stats(stats_corpus);
        if (tok->parsed())
            return cmd_tokenize(tok_in, tok_window, tok_whole, tok_no_rests);
        if (exp->parsed())
            return cmd_export(exp_in, exp_out);
        if (synth->parsed())
            return cmd_synth(synth_out, synth_pieces, synth_measures, synth_kind, seed);
        if (train->parsed())
            return cmd_train(train_corpus, train_features, train_out, train_window, seed, train_l2,
                             train_iters, train_dim);
        if (eval->parsed())
            return cmd_eval(eval_corpus, eval_features, eval_folds, eval_window, seed, eval_l2,
                            eval_iters, eval_dim);
        if (tag_train->parsed())
            return cmd_tag_train(tt_corpus, tt_school, tt_out, tt_window, seed, tt_l2, tt_iters);
        if (tag_eval->parsed())
            return cmd_tag_eval(te_model, te_corpus, te_school, te_rules, te_window);
        if (transfer->parsed())
            return cmd_transfer(tr_in, tr_classifier, tr_tagger, tr_rules, tr_source, tr_target,
                                tr_iterations, seed, tr_out, tr_force);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
