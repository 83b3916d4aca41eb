#include "dizi/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dizi/util.hpp"

namespace dizi {

namespace {

constexpr double kForbidden = -1e30;

double logsumexp(const std::vector<double>& xs) {
    double mx = *std::max_element(xs.begin(), xs.end());
    if (mx <= kForbidden)
        return kForbidden;
    double s = 0;
    for (double x : xs)
        s += std::exp(x - mx);
    return mx + std::log(s);
}

// token -> (pitch class text, duration text); rests are pitch class "R"
std::pair<std::string, std::string> split_token(const std::string& tok) {
    if (tok.empty())
        return {tok, ""};
    if (tok[0] == 'R')
        return {"R", tok.substr(1)};
    size_t i = 1;
    if (i < tok.size() && tok[i] == '#')
        ++i;
    std::string pc = tok.substr(0, i);
    if (i < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i])))
        ++i; // octave digit
    return {pc, tok.substr(i)};
}

} // namespace

const char* crf_feature_template() { return "w,w-1,w+1,pc,dur,first,last"; }

int CrfModel::tag_index(const std::string& tag) const {
    for (size_t i = 0; i < tags.size(); ++i)
        if (tags[i] == tag)
            return static_cast<int>(i);
    return -1;
}

std::vector<std::string> emission_features(const std::vector<std::string>& tokens, size_t t) {
    std::vector<std::string> out;
    out.reserve(8);
    out.push_back("w=" + tokens[t]);
    out.push_back("w-1=" + (t > 0 ? tokens[t - 1] : std::string("^")));
    out.push_back("w+1=" + (t + 1 < tokens.size() ? tokens[t + 1] : std::string("$")));
    auto [pc, dur] = split_token(tokens[t]);
    out.push_back("pc=" + pc);
    out.push_back("dur=" + dur);
    if (t == 0)
        out.push_back("first");
    if (t + 1 == tokens.size())
        out.push_back("last");
    return out;
}

CrfProblem build_crf_problem(const std::vector<TaggedSequence>& sequences,
                             const std::vector<std::string>& tags, double l2,
                             std::unordered_map<std::string, int>* feature_index_out,
                             std::vector<std::string>* feature_names_out) {
    CrfProblem prob;
    prob.n_tags = static_cast<int>(tags.size());
    prob.l2 = l2;
    std::unordered_map<std::string, int> findex;
    std::vector<std::string> fnames;

    auto tag_id = [&](const std::string& tag) {
        for (size_t i = 0; i < tags.size(); ++i)
            if (tags[i] == tag)
                return static_cast<int>(i);
        throw std::invalid_argument("unregistered technique tag '" + tag + "' in training data");
    };

    for (const auto& seq : sequences) {
        if (seq.tokens.empty())
            throw std::invalid_argument("empty sequence in training data");
        if (seq.tokens.size() != seq.tags.size())
            throw std::invalid_argument("token/tag length mismatch in training data");
        std::vector<std::vector<int>> feats(seq.tokens.size());
        std::vector<int> gold(seq.tokens.size());
        for (size_t t = 0; t < seq.tokens.size(); ++t) {
            for (const auto& f : emission_features(seq.tokens, t)) {
                auto it = findex.find(f);
                int id;
                if (it == findex.end()) {
                    id = static_cast<int>(fnames.size());
                    findex.emplace(f, id);
                    fnames.push_back(f);
                } else {
                    id = it->second;
                }
                feats[t].push_back(id);
            }
            gold[t] = tag_id(seq.tags[t]);
        }
        prob.features.push_back(std::move(feats));
        prob.gold.push_back(std::move(gold));
    }
    prob.n_feats = static_cast<int>(fnames.size());
    if (feature_index_out)
        *feature_index_out = std::move(findex);
    if (feature_names_out)
        *feature_names_out = std::move(fnames);
    return prob;
}

namespace {

// emission score matrix for one sequence under given parameters
std::vector<double> emission_scores(const std::vector<std::vector<int>>& feats, int n_tags,
                                    const double* emit) {
    size_t T = feats.size();
    std::vector<double> scores(T * n_tags, 0.0);
    for (size_t t = 0; t < T; ++t)
        for (int f : feats[t])
            for (int k = 0; k < n_tags; ++k)
                scores[t * n_tags + k] += emit[static_cast<size_t>(f) * n_tags + k];
    return scores;
}

struct ForwardBackward {
    std::vector<double> alpha, beta; // T x K, log space
    double log_z = 0;
};

ForwardBackward run_forward_backward(const std::vector<double>& emit_scores, size_t T, int K,
                                     const double* trans) {
    ForwardBackward fb;
    fb.alpha.assign(T * K, 0.0);
    fb.beta.assign(T * K, 0.0);
    std::vector<double> buf(K);
    for (int k = 0; k < K; ++k)
        fb.alpha[k] = emit_scores[k];
    for (size_t t = 1; t < T; ++t)
        for (int j = 0; j < K; ++j) {
            for (int i = 0; i < K; ++i)
                buf[i] = fb.alpha[(t - 1) * K + i] + trans[static_cast<size_t>(i) * K + j];
            fb.alpha[t * K + j] = emit_scores[t * K + j] + logsumexp(buf);
        }
    for (int k = 0; k < K; ++k)
        buf[k] = fb.alpha[(T - 1) * K + k];
    fb.log_z = logsumexp(buf);

    for (size_t t = T - 1; t-- > 0;)
        for (int i = 0; i < K; ++i) {
            for (int j = 0; j < K; ++j)
                buf[j] = trans[static_cast<size_t>(i) * K + j] + emit_scores[(t + 1) * K + j] +
                         fb.beta[(t + 1) * K + j];
            fb.beta[t * K + i] = logsumexp(buf);
        }
    return fb;
}

} // namespace

double CrfProblem::objective(const std::vector<double>& params) const {
    const double* emit = params.data();
    const double* trans = params.data() + static_cast<size_t>(n_feats) * n_tags;
    double ll = 0;
    for (size_t s = 0; s < features.size(); ++s) {
        const auto& feats = features[s];
        const auto& y = gold[s];
        size_t T = feats.size();
        std::vector<double> scores = emission_scores(feats, n_tags, emit);
        double path = 0;
        for (size_t t = 0; t < T; ++t) {
            path += scores[t * n_tags + y[t]];
            if (t > 0)
                path += trans[static_cast<size_t>(y[t - 1]) * n_tags + y[t]];
        }
        ForwardBackward fb = run_forward_backward(scores, T, n_tags, trans);
        ll += path - fb.log_z;
    }
    double reg = 0;
    for (double w : params)
        reg += w * w;
    return ll - 0.5 * l2 * reg;
}

std::vector<double> CrfProblem::gradient(const std::vector<double>& params) const {
    std::vector<double> grad(params.size(), 0.0);
    const double* emit = params.data();
    const double* trans = params.data() + static_cast<size_t>(n_feats) * n_tags;
    double* g_emit = grad.data();
    double* g_trans = grad.data() + static_cast<size_t>(n_feats) * n_tags;

    for (size_t s = 0; s < features.size(); ++s) {
        const auto& feats = features[s];
        const auto& y = gold[s];
        size_t T = feats.size();
        int K = n_tags;
        std::vector<double> scores = emission_scores(feats, K, emit);
        ForwardBackward fb = run_forward_backward(scores, T, K, trans);

        // empirical counts
        for (size_t t = 0; t < T; ++t) {
            for (int f : feats[t])
                g_emit[static_cast<size_t>(f) * K + y[t]] += 1.0;
            if (t > 0)
                g_trans[static_cast<size_t>(y[t - 1]) * K + y[t]] += 1.0;
        }
        // expected counts
        for (size_t t = 0; t < T; ++t)
            for (int k = 0; k < K; ++k) {
                double marginal = std::exp(fb.alpha[t * K + k] + fb.beta[t * K + k] - fb.log_z);
                for (int f : feats[t])
                    g_emit[static_cast<size_t>(f) * K + k] -= marginal;
            }
        for (size_t t = 0; t + 1 < T; ++t)
            for (int i = 0; i < K; ++i)
                for (int j = 0; j < K; ++j) {
                    double pair = std::exp(fb.alpha[t * K + i] +
                                           trans[static_cast<size_t>(i) * K + j] +
                                           scores[(t + 1) * K + j] + fb.beta[(t + 1) * K + j] -
                                           fb.log_z);
                    g_trans[static_cast<size_t>(i) * K + j] -= pair;
                }
    }
    for (size_t i = 0; i < params.size(); ++i)
        grad[i] -= l2 * params[i];
    return grad;
}

CrfModel train_crf(const std::vector<TaggedSequence>& sequences,
                   const std::vector<std::string>& tags, const CrfConfig& config) {
    if (sequences.empty())
        throw std::invalid_argument("empty training set");
    CrfModel model;
    model.tags = tags;
    model.config = config;
    CrfProblem prob = build_crf_problem(sequences, tags, config.l2, &model.feature_index,
                                        &model.feature_names);
    for (const auto& seq : sequences)
        for (const auto& tok : seq.tokens)
            model.train_tokens.insert(tok);

    std::vector<double> params(prob.n_params(), 0.0);
    if (config.max_iters > 0) {
        double obj = prob.objective(params);
        double step = 0.1;
        for (int iter = 0; iter < config.max_iters; ++iter) {
            std::vector<double> grad = prob.gradient(params);
            double gmax = 0, gsq = 0;
            for (double g : grad) {
                gmax = std::max(gmax, std::fabs(g));
                gsq += g * g;
            }
            if (gmax < config.tol)
                break;
            step = std::min(step * 2.0, 1e3);
            std::vector<double> trial(params.size());
            while (true) {
                for (size_t i = 0; i < params.size(); ++i)
                    trial[i] = params[i] + step * grad[i];
                double trial_obj = prob.objective(trial);
                if (trial_obj >= obj + 1e-4 * step * gsq || step < 1e-12) {
                    params.swap(trial);
                    obj = trial_obj;
                    break;
                }
                step *= 0.5;
            }
        }
    }

    int K = prob.n_tags;
    model.emission.assign(params.begin(), params.begin() + static_cast<size_t>(prob.n_feats) * K);
    model.transition.assign(params.begin() + static_cast<size_t>(prob.n_feats) * K, params.end());
    return model;
}

namespace {

// per-position scores with rule effects applied; throws if a position ends up
// with no allowed tag
std::vector<double> scored_lattice(const CrfModel& model, const std::vector<std::string>& tokens,
                                   const RuleSet* rules) {
    size_t T = tokens.size();
    int K = model.n_tags();
    std::vector<double> scores(T * K, 0.0);
    for (size_t t = 0; t < T; ++t)
        for (const auto& f : emission_features(tokens, t)) {
            auto it = model.feature_index.find(f);
            if (it == model.feature_index.end())
                continue;
            for (int k = 0; k < K; ++k)
                scores[t * K + k] += model.emission[static_cast<size_t>(it->second) * K + k];
        }
    if (rules) {
        for (size_t t = 0; t < T; ++t) {
            for (const auto& rule : rules->rules) {
                bool match = true;
                for (const auto& atom : rule.atoms) {
                    switch (atom.kind) {
                    case RuleAtom::Any: break;
                    case RuleAtom::First: match = match && t == 0; break;
                    case RuleAtom::Last: match = match && t + 1 == T; break;
                    case RuleAtom::TokenEq: match = match && tokens[t] == atom.arg; break;
                    case RuleAtom::TokenPrefix:
                        match = match && starts_with(tokens[t], atom.arg);
                        break;
                    case RuleAtom::DurEq:
                        match = match && split_token(tokens[t]).second == atom.arg;
                        break;
                    case RuleAtom::PrevEq:
                        match = match && (t > 0 ? tokens[t - 1] : std::string("^")) == atom.arg;
                        break;
                    case RuleAtom::NextEq:
                        match = match &&
                                (t + 1 < T ? tokens[t + 1] : std::string("$")) == atom.arg;
                        break;
                    }
                    if (!match)
                        break;
                }
                if (!match)
                    continue;
                if (rule.is_forbid) {
                    for (int tag : rule.tags)
                        scores[t * K + tag] = kForbidden;
                } else {
                    for (int tag : rule.tags)
                        if (scores[t * K + tag] > kForbidden / 2)
                            scores[t * K + tag] += rule.bonus;
                }
            }
            bool any_allowed = false;
            for (int k = 0; k < K; ++k)
                any_allowed = any_allowed || scores[t * K + k] > kForbidden / 2;
            if (!any_allowed)
                throw std::runtime_error("rules forbid every tag at note " + std::to_string(t + 1));
        }
    }
    return scores;
}

} // namespace

std::vector<std::string> decode(const CrfModel& model, const std::vector<std::string>& tokens,
                                const RuleSet* rules) {
    if (tokens.empty())
        throw std::invalid_argument("cannot decode an empty sequence");
    size_t T = tokens.size();
    int K = model.n_tags();
    std::vector<double> scores = scored_lattice(model, tokens, rules);

    std::vector<double> delta(T * K, 0.0);
    std::vector<int> back(T * K, 0);
    for (int k = 0; k < K; ++k)
        delta[k] = scores[k];
    for (size_t t = 1; t < T; ++t)
        for (int j = 0; j < K; ++j) {
            double best = -1e300;
            int arg = 0;
            for (int i = 0; i < K; ++i) {
                double v = delta[(t - 1) * K + i] + model.transition[static_cast<size_t>(i) * K + j];
                if (v > best) { // strict: ties keep the lowest index
                    best = v;
                    arg = i;
                }
            }
            delta[t * K + j] = best + scores[t * K + j];
            back[t * K + j] = arg;
        }

    int last = 0;
    double best = -1e300;
    for (int k = 0; k < K; ++k)
        if (delta[(T - 1) * K + k] > best) {
            best = delta[(T - 1) * K + k];
            last = k;
        }
    std::vector<int> path(T);
    path[T - 1] = last;
    for (size_t t = T - 1; t > 0; --t)
        path[t - 1] = back[t * K + path[t]];

    std::vector<std::string> out;
    out.reserve(T);
    for (int k : path)
        out.push_back(model.tags[k]);
    return out;
}

std::vector<std::vector<double>> tag_marginals(const CrfModel& model,
                                               const std::vector<std::string>& tokens) {
    if (tokens.empty())
        throw std::invalid_argument("cannot compute marginals of an empty sequence");
    size_t T = tokens.size();
    int K = model.n_tags();
    std::vector<double> scores = scored_lattice(model, tokens, nullptr);
    ForwardBackward fb = run_forward_backward(scores, T, K, model.transition.data());
    std::vector<std::vector<double>> out(T, std::vector<double>(K));
    for (size_t t = 0; t < T; ++t)
        for (int k = 0; k < K; ++k)
            out[t][k] = std::exp(fb.alpha[t * K + k] + fb.beta[t * K + k] - fb.log_z);
    return out;
}

double path_score(const CrfModel& model, const std::vector<std::string>& tokens,
                  const std::vector<int>& path, const RuleSet* rules) {
    size_t T = tokens.size();
    int K = model.n_tags();
    std::vector<double> scores = scored_lattice(model, tokens, rules);
    double s = 0;
    for (size_t t = 0; t < T; ++t) {
        s += scores[t * K + path[t]];
        if (t > 0)
            s += model.transition[static_cast<size_t>(path[t - 1]) * K + path[t]];
    }
    return s;
}

RuleSet parse_rules(const std::string& text, const std::vector<std::string>& tags) {
    RuleSet out;
    auto tag_id = [&](const std::string& code) {
        for (size_t i = 0; i < tags.size(); ++i)
            if (tags[i] == code)
                return static_cast<int>(i);
        throw std::runtime_error("rule references unknown tag '" + code + "'");
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        auto fail = [&](const std::string& msg) {
            throw std::runtime_error("rules line " + std::to_string(line_no) + ": " + msg);
        };
        std::vector<std::string> words = split_ws(t);
        if (words.size() < 3 || words[0] != "when")
            fail("expected 'when <predicate> forbid <tags>' or 'when <predicate> boost <tag> <score>'");

        size_t verb_pos = 0;
        for (size_t i = 1; i < words.size(); ++i)
            if (words[i] == "forbid" || words[i] == "boost") {
                verb_pos = i;
                break;
            }
        if (verb_pos == 0)
            fail("missing 'forbid' or 'boost'");

        Rule rule;
        std::string pred;
        for (size_t i = 1; i < verb_pos; ++i)
            pred += (i > 1 ? " " : "") + words[i];
        // atoms joined by '&'
        size_t pos = 0;
        while (pos <= pred.size()) {
            size_t amp = pred.find('&', pos);
            std::string atom_text =
                trim(amp == std::string::npos ? pred.substr(pos) : pred.substr(pos, amp - pos));
            if (atom_text.empty())
                fail("empty predicate atom");
            RuleAtom atom;
            if (atom_text == "any")
                atom.kind = RuleAtom::Any;
            else if (atom_text == "first")
                atom.kind = RuleAtom::First;
            else if (atom_text == "last")
                atom.kind = RuleAtom::Last;
            else if (starts_with(atom_text, "token="))
                atom = {RuleAtom::TokenEq, atom_text.substr(6)};
            else if (starts_with(atom_text, "token_prefix="))
                atom = {RuleAtom::TokenPrefix, atom_text.substr(13)};
            else if (starts_with(atom_text, "dur="))
                atom = {RuleAtom::DurEq, atom_text.substr(4)};
            else if (starts_with(atom_text, "prev="))
                atom = {RuleAtom::PrevEq, atom_text.substr(5)};
            else if (starts_with(atom_text, "next="))
                atom = {RuleAtom::NextEq, atom_text.substr(5)};
            else
                fail("unknown predicate atom '" + atom_text + "'");
            rule.atoms.push_back(atom);
            if (amp == std::string::npos)
                break;
            pos = amp + 1;
        }

        if (words[verb_pos] == "forbid") {
            if (verb_pos + 1 >= words.size())
                fail("'forbid' needs a tag list");
            rule.is_forbid = true;
            std::string list;
            for (size_t i = verb_pos + 1; i < words.size(); ++i)
                list += words[i];
            size_t p = 0;
            while (p <= list.size()) {
                size_t comma = list.find(',', p);
                std::string code =
                    trim(comma == std::string::npos ? list.substr(p) : list.substr(p, comma - p));
                if (!code.empty())
                    rule.tags.push_back(tag_id(code));
                if (comma == std::string::npos)
                    break;
                p = comma + 1;
            }
            if (rule.tags.empty())
                fail("'forbid' needs at least one tag");
            std::vector<int> uniq = rule.tags;
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            if (uniq.size() == tags.size())
                fail("rule forbids every registered tag");
        } else {
            if (verb_pos + 2 >= words.size())
                fail("'boost' needs a tag and a score");
            rule.is_forbid = false;
            rule.tags.push_back(tag_id(words[verb_pos + 1]));
            try {
                rule.bonus = std::stod(words[verb_pos + 2]);
            } catch (...) {
                fail("bad boost score '" + words[verb_pos + 2] + "'");
            }
        }
        out.rules.push_back(std::move(rule));
    }
    return out;
}

TagEvalResult evaluate_tagger(const CrfModel& model, const RuleSet* rules,
                              const std::vector<TaggedSequence>& test,
                              const std::unordered_set<std::string>& train_vocab) {
    if (test.empty())
        throw std::invalid_argument("empty test set");
    TagEvalResult res;
    for (const auto& seq : test) {
        std::vector<std::string> predicted = decode(model, seq.tokens, rules);
        for (size_t t = 0; t < seq.tokens.size(); ++t) {
            bool correct = predicted[t] == seq.tags[t];
            ++res.total;
            res.correct += correct;
            if (!train_vocab.count(seq.tokens[t])) {
                ++res.oov_total;
                res.oov_correct += correct;
            }
        }
    }
    res.accuracy = res.total > 0 ? 100.0 * res.correct / res.total : 0.0;
    if (res.oov_total > 0)
        res.oov_accuracy = 100.0 * res.oov_correct / res.oov_total;
    return res;
}

void save_crf(const CrfModel& model, std::ostream& out) {
    int K = model.n_tags();
    out << "dizi-crf v1\n";
    out << "template " << model.feature_template << "\n";
    out << "tags " << K << "\n";
    for (const auto& t : model.tags)
        out << "tag " << t << "\n";
    out << "l2 " << fmt_double(model.config.l2) << "\n";
    out << "iters " << model.config.max_iters << "\n";
    out << "seed " << model.config.seed << "\n";
    for (int i = 0; i < K; ++i) {
        out << "t";
        for (int j = 0; j < K; ++j)
            out << " " << fmt_double(model.transition[static_cast<size_t>(i) * K + j]);
        out << "\n";
    }
    out << "feats " << model.feature_names.size() << "\n";
    for (size_t f = 0; f < model.feature_names.size(); ++f) {
        out << "f " << model.feature_names[f];
        for (int k = 0; k < K; ++k)
            out << " " << fmt_double(model.emission[f * K + k]);
        out << "\n";
    }
    std::vector<std::string> toks(model.train_tokens.begin(), model.train_tokens.end());
    std::sort(toks.begin(), toks.end());
    out << "tokens " << toks.size() << "\n";
    for (const auto& t : toks)
        out << "k " << t << "\n";
}

CrfModel load_crf(std::istream& in) {
    auto need = [&](const std::string& kw) {
        std::string t;
        if (!(in >> t) || t != kw)
            throw std::runtime_error("malformed CRF model: expected '" + kw + "'");
    };
    need("dizi-crf");
    need("v1");
    CrfModel model;
    need("template");
    in >> model.feature_template;
    if (model.feature_template != crf_feature_template())
        throw std::runtime_error("CRF model uses feature template '" + model.feature_template +
                                 "', this build expects '" + crf_feature_template() + "'");
    need("tags");
    int K;
    in >> K;
    for (int i = 0; i < K; ++i) {
        need("tag");
        std::string t;
        in >> t;
        model.tags.push_back(t);
    }
    need("l2");
    in >> model.config.l2;
    need("iters");
    in >> model.config.max_iters;
    need("seed");
    in >> model.config.seed;
    model.transition.resize(static_cast<size_t>(K) * K);
    for (int i = 0; i < K; ++i) {
        need("t");
        for (int j = 0; j < K; ++j)
            in >> model.transition[static_cast<size_t>(i) * K + j];
    }
    need("feats");
    size_t nf;
    in >> nf;
    model.emission.resize(nf * K);
    for (size_t f = 0; f < nf; ++f) {
        need("f");
        std::string name;
        in >> name;
        model.feature_index.emplace(name, static_cast<int>(f));
        model.feature_names.push_back(name);
        for (int k = 0; k < K; ++k)
            in >> model.emission[f * K + k];
    }
    need("tokens");
    size_t nt;
    in >> nt;
    for (size_t i = 0; i < nt; ++i) {
        need("k");
        std::string t;
        in >> t;
        model.train_tokens.insert(t);
    }
    if (!in)
        throw std::runtime_error("malformed CRF model: truncated");
    return model;
}

} // namespace dizi
