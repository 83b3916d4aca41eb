#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dizi/features.hpp"

namespace dizi {

struct ClassifierConfig {
    double l2 = 1e-4;     // excludes the bias
    int max_iters = 500;
    double tol = 1e-7;    // stop when the gradient max-norm falls below this
    uint64_t seed = 0;
};

// Multinomial logistic regression over sparse features. The loss is averaged
// per example, so duplicating the training set leaves the optimum unchanged.
struct ClassifierModel {
    int n_classes = 0;
    int dim = 0;
    std::vector<double> weights; // n_classes x dim, row-major
    std::vector<double> bias;    // n_classes
    std::vector<std::string> class_names;
    std::string scheme_id;
    ClassifierConfig config;

    int class_index(const std::string& name) const;
};

struct LabeledVector {
    FeatureVector x;
    int label = 0;
};

ClassifierModel train_classifier(const std::vector<LabeledVector>& data,
                                 const std::vector<std::string>& class_names,
                                 const ClassifierConfig& config);

struct Prediction {
    int label = 0;
    std::vector<double> probabilities; // sums to 1
};

Prediction predict(const ClassifierModel& model, const FeatureVector& x);

// Loss and gradient of the averaged, L2-regularized objective at the given
// parameters, exposed for gradient checking. Layout: weights then bias.
double classifier_loss(const std::vector<LabeledVector>& data, int n_classes, int dim,
                       const std::vector<double>& params, double l2);
std::vector<double> classifier_gradient(const std::vector<LabeledVector>& data, int n_classes,
                                        int dim, const std::vector<double>& params, double l2);

struct FoldMetrics {
    double macro_recall = 0; // 0..100
    double macro_f1 = 0;
};

struct EvalReport {
    Scheme scheme;
    int folds = 0;
    uint64_t seed = 0;
    std::vector<FoldMetrics> per_fold;
    double macro_recall = 0; // mean over folds
    double macro_f1 = 0;
    std::vector<std::vector<long long>> confusion; // [true][predicted], all folds pooled
    std::vector<std::string> class_names;

    std::string human_table() const;
    std::string machine_lines() const;
};

struct CrossValidateConfig {
    ClassifierConfig classifier;
    EmbeddingConfig embedding;
    uint64_t seed = 0;
};

// Stratified k-fold cross validation. Vocabulary, document frequencies and
// embeddings are rebuilt per fold from that fold's training pieces only.
EvalReport cross_validate(const std::vector<TokenSequence>& corpus, Scheme scheme, int folds,
                          const CrossValidateConfig& config);

// Classification metrics on one evaluation set, scale 0..100.
struct SetMetrics {
    std::vector<double> recall;    // per class
    std::vector<double> precision; // per class
    std::vector<double> f1;        // per class
    double macro_recall = 0;
    double macro_f1 = 0;
};
SetMetrics compute_metrics(const std::vector<std::vector<long long>>& confusion);

// Pipeline + model in one file.
struct ClassifierBundle {
    FeaturePipeline pipeline;
    ClassifierModel model;

    void save(std::ostream& out) const;
    static ClassifierBundle load(std::istream& in);
};

} // namespace dizi
