#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "dizi/represent.hpp"
#include "dizi/util.hpp"

namespace dizi {

// Token <-> index association with per-token document frequency.
// Index order is first-seen, so building is deterministic.
class Vocabulary {
  public:
    Vocabulary() = default;

    int add(const std::string& token); // returns index, inserting if new
    int index_of(const std::string& token) const; // -1 if absent
    size_t size() const { return tokens_.size(); }
    const std::string& token(int index) const { return tokens_[index]; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int doc_frequency(int index) const { return df_[index]; }
    void bump_doc_frequency(int index) { ++df_[index]; }

  private:
    std::unordered_map<std::string, int> index_;
    std::vector<std::string> tokens_;
    std::vector<int> df_;
};

Vocabulary build_vocabulary(const std::vector<TokenSequence>& corpus);

// Sparse vector: (index, weight) entries sorted by index, zero weights
// omitted. Dense embeddings use the same shape with every index present.
struct FeatureVector {
    int dim = 0;
    std::vector<std::pair<int, double>> entries;

    double l2_norm() const;
    void l2_normalize();
    static FeatureVector from_dense(const std::vector<double>& values);
};

FeatureVector bow_vector(const TokenSequence& piece, const Vocabulary& vocab);

// weight(t) = (count(t) / piece length) * ln((1 + n_docs) / (1 + df(t))),
// then the whole vector is L2-normalized.
FeatureVector tfidf_vector(const TokenSequence& piece, const Vocabulary& vocab, int n_docs);

enum class EmbeddingMode { Cbow, SkipGram };

struct EmbeddingConfig {
    int dim = 32;
    int window = 4;
    int negatives = 5;
    int epochs = 30;
    double learning_rate = 0.025; // linearly decayed per epoch
    uint64_t seed = 0;
};

// Word2vec-style embeddings trained with the negative-sampling objective.
// Training is single-threaded and bit-reproducible under a fixed seed.
struct EmbeddingModel {
    EmbeddingMode mode = EmbeddingMode::Cbow;
    EmbeddingConfig config;
    Vocabulary vocab;
    std::vector<double> input;  // |V| x dim, row-major
    std::vector<double> output; // |V| x dim
    std::vector<double> epoch_losses; // mean loss per epoch, recorded during training

    const double* input_row(int index) const { return &input[static_cast<size_t>(index) * config.dim]; }
};

EmbeddingModel train_embeddings(const std::vector<TokenSequence>& corpus, EmbeddingMode mode,
                                const EmbeddingConfig& config);

// Mean of input vectors of in-vocabulary tokens; zero vector if none.
FeatureVector embed_piece(const TokenSequence& piece, const EmbeddingModel& model);

// Negative-sampling loss and gradient for a single (center, context,
// negatives) triple, exposed for gradient checking. Parameters are the
// concatenation of the referenced input row and the context/negative output
// rows; see the test suite for the layout.
double ns_pair_loss(const std::vector<double>& center_vec, const std::vector<double>& context_vec,
                    const std::vector<std::vector<double>>& negative_vecs);
void ns_pair_gradient(const std::vector<double>& center_vec, const std::vector<double>& context_vec,
                      const std::vector<std::vector<double>>& negative_vecs,
                      std::vector<double>& g_center, std::vector<double>& g_context,
                      std::vector<std::vector<double>>& g_negatives);

// Feature scheme bound to everything needed to featurize a piece.
enum class Scheme { Bow, Tfidf, Cbow, SkipGram };

const char* scheme_name(Scheme s);
std::optional<Scheme> scheme_from_name(const std::string& name);

struct FeaturePipeline {
    Scheme scheme = Scheme::Tfidf;
    Vocabulary vocab;
    int n_docs = 0;
    std::optional<EmbeddingModel> embedding;

    int dim() const;
    FeatureVector featurize(const TokenSequence& piece) const;

    static FeaturePipeline fit(Scheme scheme, const std::vector<TokenSequence>& corpus,
                               const EmbeddingConfig& embedding_config);

    void save(std::ostream& out) const;
    static FeaturePipeline load(std::istream& in);
};

} // namespace dizi
