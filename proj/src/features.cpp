#include "dizi/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dizi {

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end())
        return it->second;
    int idx = static_cast<int>(tokens_.size());
    index_.emplace(token, idx);
    tokens_.push_back(token);
    df_.push_back(0);
    return idx;
}

int Vocabulary::index_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

Vocabulary build_vocabulary(const std::vector<TokenSequence>& corpus) {
    if (corpus.empty())
        throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
    Vocabulary vocab;
    for (const auto& piece : corpus) {
        std::vector<int> seen;
        for (const auto& tok : piece.tokens) {
            int idx = vocab.add(tok);
            if (std::find(seen.begin(), seen.end(), idx) == seen.end())
                seen.push_back(idx);
        }
        for (int idx : seen)
            vocab.bump_doc_frequency(idx);
    }
    return vocab;
}

double FeatureVector::l2_norm() const {
    double s = 0;
    for (const auto& e : entries)
        s += e.second * e.second;
    return std::sqrt(s);
}

void FeatureVector::l2_normalize() {
    double n = l2_norm();
    if (n == 0)
        return;
    for (auto& e : entries)
        e.second /= n;
}

FeatureVector FeatureVector::from_dense(const std::vector<double>& values) {
    FeatureVector out;
    out.dim = static_cast<int>(values.size());
    out.entries.reserve(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        out.entries.emplace_back(static_cast<int>(i), values[i]);
    return out;
}

namespace {

std::map<int, int> count_in_vocab(const TokenSequence& piece, const Vocabulary& vocab) {
    std::map<int, int> counts;
    for (const auto& tok : piece.tokens) {
        int idx = vocab.index_of(tok);
        if (idx >= 0)
            ++counts[idx];
    }
    return counts;
}

} // namespace

FeatureVector bow_vector(const TokenSequence& piece, const Vocabulary& vocab) {
    FeatureVector out;
    out.dim = static_cast<int>(vocab.size());
    for (const auto& [idx, count] : count_in_vocab(piece, vocab))
        out.entries.emplace_back(idx, static_cast<double>(count));
    return out;
}

FeatureVector tfidf_vector(const TokenSequence& piece, const Vocabulary& vocab, int n_docs) {
    if (n_docs < 1)
        throw std::invalid_argument("tfidf_vector needs n_docs >= 1");
    FeatureVector out;
    out.dim = static_cast<int>(vocab.size());
    if (piece.tokens.empty())
        return out;
    double len = static_cast<double>(piece.tokens.size());
    for (const auto& [idx, count] : count_in_vocab(piece, vocab)) {
        double tf = count / len;
        double idf = std::log((1.0 + n_docs) / (1.0 + vocab.doc_frequency(idx)));
        double w = tf * idf;
        if (w != 0)
            out.entries.emplace_back(idx, w);
    }
    out.l2_normalize();
    return out;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(const double* a, const double* b, int n) {
    double s = 0;
    for (int i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

// Cumulative unigram^0.75 table for negative sampling.
struct NegativeSampler {
    std::vector<double> cumulative;

    explicit NegativeSampler(const std::vector<long long>& counts) {
        cumulative.resize(counts.size());
        double acc = 0;
        for (size_t i = 0; i < counts.size(); ++i) {
            acc += std::pow(static_cast<double>(counts[i]), 0.75);
            cumulative[i] = acc;
        }
    }

    int sample(Rng& rng) const {
        double x = rng.next_double() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
        if (it == cumulative.end())
            --it;
        return static_cast<int>(it - cumulative.begin());
    }
};

// One SGD step on the negative-sampling objective for hidden vector h and
// target/negative output rows. Returns the pair loss; grad_h accumulates the
// gradient wrt h (caller applies it to the input side).
double ns_step(double* h, double* target_out, const std::vector<double*>& negative_out, int dim,
               double lr, std::vector<double>& grad_h) {
    std::fill(grad_h.begin(), grad_h.end(), 0.0);
    double loss = 0;

    double s = dot(h, target_out, dim);
    double sig = sigmoid(s);
    loss -= std::log(std::max(sig, 1e-12));
    double g = sig - 1.0; // dL/ds
    for (int i = 0; i < dim; ++i) {
        grad_h[i] += g * target_out[i];
        target_out[i] -= lr * g * h[i];
    }
    for (double* neg : negative_out) {
        double sn = dot(h, neg, dim);
        double sign = sigmoid(sn);
        loss -= std::log(std::max(1.0 - sign, 1e-12));
        for (int i = 0; i < dim; ++i) {
            grad_h[i] += sign * neg[i];
            neg[i] -= lr * sign * h[i];
        }
    }
    return loss;
}

} // namespace

double ns_pair_loss(const std::vector<double>& center_vec, const std::vector<double>& context_vec,
                    const std::vector<std::vector<double>>& negative_vecs) {
    int dim = static_cast<int>(center_vec.size());
    double loss = -std::log(std::max(sigmoid(dot(center_vec.data(), context_vec.data(), dim)), 1e-12));
    for (const auto& neg : negative_vecs)
        loss -= std::log(std::max(1.0 - sigmoid(dot(center_vec.data(), neg.data(), dim)), 1e-12));
    return loss;
}

void ns_pair_gradient(const std::vector<double>& center_vec, const std::vector<double>& context_vec,
                      const std::vector<std::vector<double>>& negative_vecs,
                      std::vector<double>& g_center, std::vector<double>& g_context,
                      std::vector<std::vector<double>>& g_negatives) {
    int dim = static_cast<int>(center_vec.size());
    g_center.assign(dim, 0.0);
    g_context.assign(dim, 0.0);
    g_negatives.assign(negative_vecs.size(), std::vector<double>(dim, 0.0));

    double g = sigmoid(dot(center_vec.data(), context_vec.data(), dim)) - 1.0;
    for (int i = 0; i < dim; ++i) {
        g_center[i] += g * context_vec[i];
        g_context[i] += g * center_vec[i];
    }
    for (size_t k = 0; k < negative_vecs.size(); ++k) {
        double gn = sigmoid(dot(center_vec.data(), negative_vecs[k].data(), dim));
        for (int i = 0; i < dim; ++i) {
            g_center[i] += gn * negative_vecs[k][i];
            g_negatives[k][i] += gn * center_vec[i];
        }
    }
}

EmbeddingModel train_embeddings(const std::vector<TokenSequence>& corpus, EmbeddingMode mode,
                                const EmbeddingConfig& config) {
    if (config.window < 1 || config.negatives < 1 || config.dim < 1)
        throw std::invalid_argument("bad embedding hyperparameters");
    EmbeddingModel model;
    model.mode = mode;
    model.config = config;
    model.vocab = build_vocabulary(corpus);
    size_t v = model.vocab.size();
    if (v < 2)
        throw std::invalid_argument("embedding training needs a vocabulary of at least 2 tokens");
    int dim = config.dim;

    std::vector<long long> counts(v, 0);
    std::vector<std::vector<int>> sequences;
    for (const auto& piece : corpus) {
        std::vector<int> ids;
        ids.reserve(piece.tokens.size());
        for (const auto& tok : piece.tokens) {
            int idx = model.vocab.index_of(tok);
            ids.push_back(idx);
            ++counts[idx];
        }
        sequences.push_back(std::move(ids));
    }

    Rng rng(config.seed);
    model.input.resize(v * dim);
    model.output.assign(v * dim, 0.0);
    for (auto& x : model.input)
        x = (rng.next_double() - 0.5) / dim;

    NegativeSampler sampler(counts);
    std::vector<double> grad_h(dim), hidden(dim);
    std::vector<double*> negatives;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.learning_rate *
                    std::max(1.0 - static_cast<double>(epoch) / config.epochs, 1e-4);
        double epoch_loss = 0;
        long long pairs = 0;

        for (const auto& ids : sequences) {
            int n = static_cast<int>(ids.size());
            for (int t = 0; t < n; ++t) {
                int lo = std::max(0, t - config.window);
                int hi = std::min(n - 1, t + config.window);

                if (mode == EmbeddingMode::SkipGram) {
                    for (int c = lo; c <= hi; ++c) {
                        if (c == t)
                            continue;
                        double* center = &model.input[static_cast<size_t>(ids[t]) * dim];
                        double* target = &model.output[static_cast<size_t>(ids[c]) * dim];
                        negatives.clear();
                        for (int k = 0; k < config.negatives; ++k) {
                            int neg = sampler.sample(rng);
                            if (neg == ids[c])
                                continue;
                            negatives.push_back(&model.output[static_cast<size_t>(neg) * dim]);
                        }
                        epoch_loss += ns_step(center, target, negatives, dim, lr, grad_h);
                        ++pairs;
                        for (int i = 0; i < dim; ++i)
                            center[i] -= lr * grad_h[i];
                    }
                } else {
                    if (hi - lo < 1)
                        continue;
                    std::fill(hidden.begin(), hidden.end(), 0.0);
                    int ctx = 0;
                    for (int c = lo; c <= hi; ++c) {
                        if (c == t)
                            continue;
                        const double* in = &model.input[static_cast<size_t>(ids[c]) * dim];
                        for (int i = 0; i < dim; ++i)
                            hidden[i] += in[i];
                        ++ctx;
                    }
                    if (ctx == 0)
                        continue;
                    for (int i = 0; i < dim; ++i)
                        hidden[i] /= ctx;
                    double* target = &model.output[static_cast<size_t>(ids[t]) * dim];
                    negatives.clear();
                    for (int k = 0; k < config.negatives; ++k) {
                        int neg = sampler.sample(rng);
                        if (neg == ids[t])
                            continue;
                        negatives.push_back(&model.output[static_cast<size_t>(neg) * dim]);
                    }
                    epoch_loss += ns_step(hidden.data(), target, negatives, dim, lr, grad_h);
                    ++pairs;
                    for (int c = lo; c <= hi; ++c) {
                        if (c == t)
                            continue;
                        double* in = &model.input[static_cast<size_t>(ids[c]) * dim];
                        for (int i = 0; i < dim; ++i)
                            in[i] -= lr * grad_h[i];
                    }
                }
            }
        }
        model.epoch_losses.push_back(pairs > 0 ? epoch_loss / pairs : 0.0);
    }
    return model;
}

FeatureVector embed_piece(const TokenSequence& piece, const EmbeddingModel& model) {
    int dim = model.config.dim;
    std::vector<double> mean(dim, 0.0);
    int hits = 0;
    for (const auto& tok : piece.tokens) {
        int idx = model.vocab.index_of(tok);
        if (idx < 0)
            continue;
        const double* row = model.input_row(idx);
        for (int i = 0; i < dim; ++i)
            mean[i] += row[i];
        ++hits;
    }
    if (hits > 0)
        for (double& x : mean)
            x /= hits;
    return FeatureVector::from_dense(mean);
}

const char* scheme_name(Scheme s) {
    switch (s) {
    case Scheme::Bow: return "bow";
    case Scheme::Tfidf: return "tfidf";
    case Scheme::Cbow: return "cbow";
    default: return "skipgram";
    }
}

std::optional<Scheme> scheme_from_name(const std::string& name) {
    if (name == "bow")
        return Scheme::Bow;
    if (name == "tfidf")
        return Scheme::Tfidf;
    if (name == "cbow")
        return Scheme::Cbow;
    if (name == "skipgram")
        return Scheme::SkipGram;
    return std::nullopt;
}

int FeaturePipeline::dim() const {
    if (scheme == Scheme::Cbow || scheme == Scheme::SkipGram)
        return embedding ? embedding->config.dim : 0;
    return static_cast<int>(vocab.size());
}

FeatureVector FeaturePipeline::featurize(const TokenSequence& piece) const {
    switch (scheme) {
    case Scheme::Bow:
        return bow_vector(piece, vocab);
    case Scheme::Tfidf:
        return tfidf_vector(piece, vocab, n_docs);
    default:
        if (!embedding)
            throw std::logic_error("embedding scheme without a trained embedding model");
        return embed_piece(piece, *embedding);
    }
}

FeaturePipeline FeaturePipeline::fit(Scheme scheme, const std::vector<TokenSequence>& corpus,
                                     const EmbeddingConfig& embedding_config) {
    FeaturePipeline p;
    p.scheme = scheme;
    p.vocab = build_vocabulary(corpus);
    p.n_docs = static_cast<int>(corpus.size());
    if (scheme == Scheme::Cbow || scheme == Scheme::SkipGram)
        p.embedding = train_embeddings(
            corpus, scheme == Scheme::Cbow ? EmbeddingMode::Cbow : EmbeddingMode::SkipGram,
            embedding_config);
    return p;
}

void FeaturePipeline::save(std::ostream& out) const {
    out << "dizi-features v1\n";
    out << "scheme " << scheme_name(scheme) << "\n";
    out << "ndocs " << n_docs << "\n";
    out << "vocab " << vocab.size() << "\n";
    for (size_t i = 0; i < vocab.size(); ++i)
        out << vocab.token(static_cast<int>(i)) << " " << vocab.doc_frequency(static_cast<int>(i))
            << "\n";
    out << "embedding " << (embedding ? 1 : 0) << "\n";
    if (embedding) {
        const auto& m = *embedding;
        out << "mode " << (m.mode == EmbeddingMode::Cbow ? "cbow" : "skipgram") << "\n";
        out << "dim " << m.config.dim << "\n";
        out << "window " << m.config.window << "\n";
        out << "negatives " << m.config.negatives << "\n";
        out << "epochs " << m.config.epochs << "\n";
        out << "lr " << fmt_double(m.config.learning_rate) << "\n";
        out << "seed " << m.config.seed << "\n";
        out << "vectors " << m.vocab.size() << "\n";
        for (size_t i = 0; i < m.vocab.size(); ++i) {
            out << m.vocab.token(static_cast<int>(i));
            const double* row = m.input_row(static_cast<int>(i));
            for (int d = 0; d < m.config.dim; ++d)
                out << " " << fmt_double(row[d]);
            out << "\n";
        }
    }
}

namespace {

[[noreturn]] void bad_model(const std::string& what) {
    throw std::runtime_error("malformed model file: " + what);
}

std::string expect_word(std::istream& in, const std::string& what) {
    std::string w;
    if (!(in >> w))
        bad_model("missing " + what);
    return w;
}

long long expect_int(std::istream& in, const std::string& what) {
    long long x;
    if (!(in >> x))
        bad_model("missing " + what);
    return x;
}

void expect_keyword(std::istream& in, const std::string& kw) {
    if (expect_word(in, kw) != kw)
        bad_model("expected '" + kw + "'");
}

} // namespace

FeaturePipeline FeaturePipeline::load(std::istream& in) {
    expect_keyword(in, "dizi-features");
    expect_keyword(in, "v1");
    FeaturePipeline p;
    expect_keyword(in, "scheme");
    auto sch = scheme_from_name(expect_word(in, "scheme name"));
    if (!sch)
        bad_model("unknown scheme");
    p.scheme = *sch;
    expect_keyword(in, "ndocs");
    p.n_docs = static_cast<int>(expect_int(in, "ndocs"));
    expect_keyword(in, "vocab");
    long long v = expect_int(in, "vocab size");
    for (long long i = 0; i < v; ++i) {
        std::string tok = expect_word(in, "token");
        long long df = expect_int(in, "doc frequency");
        int idx = p.vocab.add(tok);
        for (long long k = 0; k < df; ++k)
            p.vocab.bump_doc_frequency(idx);
    }
    expect_keyword(in, "embedding");
    long long has_emb = expect_int(in, "embedding flag");
    if (has_emb) {
        EmbeddingModel m;
        expect_keyword(in, "mode");
        std::string mode = expect_word(in, "mode");
        m.mode = mode == "cbow" ? EmbeddingMode::Cbow : EmbeddingMode::SkipGram;
        expect_keyword(in, "dim");
        m.config.dim = static_cast<int>(expect_int(in, "dim"));
        expect_keyword(in, "window");
        m.config.window = static_cast<int>(expect_int(in, "window"));
        expect_keyword(in, "negatives");
        m.config.negatives = static_cast<int>(expect_int(in, "negatives"));
        expect_keyword(in, "epochs");
        m.config.epochs = static_cast<int>(expect_int(in, "epochs"));
        expect_keyword(in, "lr");
        std::string lr = expect_word(in, "lr");
        m.config.learning_rate = std::strtod(lr.c_str(), nullptr);
        expect_keyword(in, "seed");
        m.config.seed = static_cast<uint64_t>(expect_int(in, "seed"));
        expect_keyword(in, "vectors");
        long long n = expect_int(in, "vector count");
        m.input.resize(static_cast<size_t>(n) * m.config.dim);
        for (long long i = 0; i < n; ++i) {
            std::string tok = expect_word(in, "token");
            int idx = m.vocab.add(tok);
            for (int d = 0; d < m.config.dim; ++d) {
                std::string x = expect_word(in, "vector component");
                m.input[static_cast<size_t>(idx) * m.config.dim + d] =
                    std::strtod(x.c_str(), nullptr);
            }
        }
        m.output.assign(m.input.size(), 0.0);
        p.embedding = std::move(m);
    }
    return p;
}

} // namespace dizi
