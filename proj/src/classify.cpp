#include "dizi/classify.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dizi {

int ClassifierModel::class_index(const std::string& name) const {
    for (size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name)
            return static_cast<int>(i);
    return -1;
}

namespace {

void softmax_inplace(std::vector<double>& scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0;
    for (double& s : scores) {
        s = std::exp(s - mx);
        sum += s;
    }
    for (double& s : scores)
        s /= sum;
}

std::vector<double> class_scores(const FeatureVector& x, int n_classes, int dim,
                                 const std::vector<double>& params) {
    std::vector<double> scores(n_classes);
    const double* bias = params.data() + static_cast<size_t>(n_classes) * dim;
    for (int c = 0; c < n_classes; ++c) {
        double s = bias[c];
        const double* w = params.data() + static_cast<size_t>(c) * dim;
        for (const auto& e : x.entries)
            s += w[e.first] * e.second;
        scores[c] = s;
    }
    return scores;
}

} // namespace

double classifier_loss(const std::vector<LabeledVector>& data, int n_classes, int dim,
                       const std::vector<double>& params, double l2) {
    double loss = 0;
    for (const auto& ex : data) {
        std::vector<double> scores = class_scores(ex.x, n_classes, dim, params);
        double mx = *std::max_element(scores.begin(), scores.end());
        double lse = 0;
        for (double s : scores)
            lse += std::exp(s - mx);
        lse = mx + std::log(lse);
        loss += lse - scores[ex.label];
    }
    loss /= static_cast<double>(data.size());
    double reg = 0;
    for (size_t i = 0; i < static_cast<size_t>(n_classes) * dim; ++i)
        reg += params[i] * params[i];
    return loss + 0.5 * l2 * reg;
}

std::vector<double> classifier_gradient(const std::vector<LabeledVector>& data, int n_classes,
                                        int dim, const std::vector<double>& params, double l2) {
    std::vector<double> grad(params.size(), 0.0);
    double* gbias = grad.data() + static_cast<size_t>(n_classes) * dim;
    for (const auto& ex : data) {
        std::vector<double> p = class_scores(ex.x, n_classes, dim, params);
        softmax_inplace(p);
        for (int c = 0; c < n_classes; ++c) {
            double coeff = p[c] - (c == ex.label ? 1.0 : 0.0);
            double* gw = grad.data() + static_cast<size_t>(c) * dim;
            for (const auto& e : ex.x.entries)
                gw[e.first] += coeff * e.second;
            gbias[c] += coeff;
        }
    }
    double inv_n = 1.0 / static_cast<double>(data.size());
    for (double& g : grad)
        g *= inv_n;
    for (size_t i = 0; i < static_cast<size_t>(n_classes) * dim; ++i)
        grad[i] += l2 * params[i];
    return grad;
}

ClassifierModel train_classifier(const std::vector<LabeledVector>& data,
                                 const std::vector<std::string>& class_names,
                                 const ClassifierConfig& config) {
    if (data.empty())
        throw std::invalid_argument("empty training set");
    int n_classes = static_cast<int>(class_names.size());
    std::set<int> present;
    int dim = data.front().x.dim;
    for (const auto& ex : data) {
        if (ex.x.dim != dim)
            throw std::invalid_argument("inconsistent feature dimensions in training set");
        if (ex.label < 0 || ex.label >= n_classes)
            throw std::invalid_argument("label outside the class set");
        present.insert(ex.label);
    }
    if (present.size() < 2)
        throw std::invalid_argument("training set must contain at least 2 classes");

    std::vector<double> params(static_cast<size_t>(n_classes) * dim + n_classes, 0.0);
    double step = 1.0;
    double loss = classifier_loss(data, n_classes, dim, params, config.l2);
    for (int iter = 0; iter < config.max_iters; ++iter) {
        std::vector<double> grad = classifier_gradient(data, n_classes, dim, params, config.l2);
        double gmax = 0, gsq = 0;
        for (double g : grad) {
            gmax = std::max(gmax, std::fabs(g));
            gsq += g * g;
        }
        if (gmax < config.tol)
            break;

        // backtracking line search on the descent direction -grad
        step = std::min(step * 2.0, 1e4);
        std::vector<double> trial(params.size());
        while (true) {
            for (size_t i = 0; i < params.size(); ++i)
                trial[i] = params[i] - step * grad[i];
            double trial_loss = classifier_loss(data, n_classes, dim, trial, config.l2);
            if (trial_loss <= loss - 1e-4 * step * gsq || step < 1e-12) {
                params.swap(trial);
                loss = trial_loss;
                break;
            }
            step *= 0.5;
        }
    }

    ClassifierModel model;
    model.n_classes = n_classes;
    model.dim = dim;
    model.weights.assign(params.begin(), params.begin() + static_cast<size_t>(n_classes) * dim);
    model.bias.assign(params.begin() + static_cast<size_t>(n_classes) * dim, params.end());
    model.class_names = class_names;
    model.config = config;
    return model;
}

Prediction predict(const ClassifierModel& model, const FeatureVector& x) {
    if (x.dim != model.dim)
        throw std::invalid_argument("feature dimension " + std::to_string(x.dim) +
                                    " does not match model dimension " + std::to_string(model.dim));
    std::vector<double> params = model.weights;
    params.insert(params.end(), model.bias.begin(), model.bias.end());
    std::vector<double> p = class_scores(x, model.n_classes, model.dim, params);
    softmax_inplace(p);
    Prediction out;
    out.probabilities = std::move(p);
    out.label = 0;
    for (int c = 1; c < model.n_classes; ++c)
        if (out.probabilities[c] > out.probabilities[out.label])
            out.label = c;
    return out;
}

SetMetrics compute_metrics(const std::vector<std::vector<long long>>& confusion) {
    int k = static_cast<int>(confusion.size());
    SetMetrics m;
    m.recall.resize(k);
    m.precision.resize(k);
    m.f1.resize(k);
    int counted = 0;
    for (int c = 0; c < k; ++c) {
        long long tp = confusion[c][c];
        long long actual = 0, predicted = 0;
        for (int j = 0; j < k; ++j) {
            actual += confusion[c][j];
            predicted += confusion[j][c];
        }
        m.recall[c] = actual > 0 ? 100.0 * tp / actual : 0.0;
        m.precision[c] = predicted > 0 ? 100.0 * tp / predicted : 0.0;
        m.f1[c] = (m.recall[c] + m.precision[c]) > 0
                      ? 2.0 * m.precision[c] * m.recall[c] / (m.precision[c] + m.recall[c])
                      : 0.0;
        if (actual > 0) {
            m.macro_recall += m.recall[c];
            m.macro_f1 += m.f1[c];
            ++counted;
        }
    }
    if (counted > 0) {
        m.macro_recall /= counted;
        m.macro_f1 /= counted;
    }
    return m;
}

EvalReport cross_validate(const std::vector<TokenSequence>& corpus, Scheme scheme, int folds,
                          const CrossValidateConfig& config) {
    if (folds < 2)
        throw std::invalid_argument("cross validation needs at least 2 folds");
    if (corpus.size() < static_cast<size_t>(folds))
        throw std::invalid_argument("corpus smaller than the number of folds");

    // class set in first-seen order of School enum values, named for reports
    std::vector<School> classes;
    for (const auto& piece : corpus)
        if (std::find(classes.begin(), classes.end(), piece.label) == classes.end())
            classes.push_back(piece.label);
    std::sort(classes.begin(), classes.end(),
              [](School a, School b) { return static_cast<int>(a) < static_cast<int>(b); });
    if (classes.size() < 2)
        throw std::invalid_argument("cross validation needs at least 2 classes");
    auto class_of = [&](School s) {
        return static_cast<int>(std::find(classes.begin(), classes.end(), s) - classes.begin());
    };

    // stratified fold assignment from a seeded shuffle within each class
    std::vector<int> fold_of(corpus.size(), -1);
    Rng rng(config.seed);
    for (size_t c = 0; c < classes.size(); ++c) {
        std::vector<size_t> members;
        for (size_t i = 0; i < corpus.size(); ++i)
            if (corpus[i].label == classes[c])
                members.push_back(i);
        if (members.size() < 2)
            throw std::invalid_argument("class " + std::string(school_name(classes[c])) +
                                        " has too few pieces for stratification");
        rng.shuffle(members);
        for (size_t k = 0; k < members.size(); ++k)
            fold_of[members[k]] = static_cast<int>(k % static_cast<size_t>(folds));
    }

    EvalReport report;
    report.scheme = scheme;
    report.folds = folds;
    report.seed = config.seed;
    for (const auto& c : classes)
        report.class_names.push_back(school_name(c));
    report.confusion.assign(classes.size(), std::vector<long long>(classes.size(), 0));

    for (int f = 0; f < folds; ++f) {
        std::vector<TokenSequence> train, test;
        for (size_t i = 0; i < corpus.size(); ++i)
            (fold_of[i] == f ? test : train).push_back(corpus[i]);
        if (test.empty())
            continue;

        EmbeddingConfig emb = config.embedding;
        emb.seed = mix_seed(config.seed, static_cast<uint64_t>(f));
        FeaturePipeline pipeline = FeaturePipeline::fit(scheme, train, emb);

        std::vector<LabeledVector> train_vecs;
        train_vecs.reserve(train.size());
        for (const auto& piece : train)
            train_vecs.push_back({pipeline.featurize(piece), class_of(piece.label)});
        ClassifierModel model = train_classifier(train_vecs, report.class_names, config.classifier);

        std::vector<std::vector<long long>> fold_confusion(
            classes.size(), std::vector<long long>(classes.size(), 0));
        for (const auto& piece : test) {
            Prediction pred = predict(model, pipeline.featurize(piece));
            ++fold_confusion[class_of(piece.label)][pred.label];
            ++report.confusion[class_of(piece.label)][pred.label];
        }
        SetMetrics m = compute_metrics(fold_confusion);
        report.per_fold.push_back({m.macro_recall, m.macro_f1});
    }

    for (const auto& fm : report.per_fold) {
        report.macro_recall += fm.macro_recall;
        report.macro_f1 += fm.macro_f1;
    }
    if (!report.per_fold.empty()) {
        report.macro_recall /= report.per_fold.size();
        report.macro_f1 /= report.per_fold.size();
    }
    return report;
}

std::string EvalReport::human_table() const {
    std::ostringstream out;
    out << "scheme: " << scheme_name(scheme) << "   folds: " << folds << "   seed: " << seed
        << "\n";
    out << "fold   recall       f1\n";
    for (size_t f = 0; f < per_fold.size(); ++f)
        out << "  " << f << (f < 10 ? "    " : "   ") << fmt_fixed(per_fold[f].macro_recall, 2)
            << "    " << fmt_fixed(per_fold[f].macro_f1, 2) << "\n";
    out << "macro  " << fmt_fixed(macro_recall, 2) << "    " << fmt_fixed(macro_f1, 2) << "\n";
    out << "confusion (rows = true, cols = predicted):\n";
    for (size_t i = 0; i < confusion.size(); ++i) {
        out << "  " << class_names[i] << ":";
        for (long long v : confusion[i])
            out << " " << v;
        out << "\n";
    }
    return out.str();
}

std::string EvalReport::machine_lines() const {
    std::ostringstream out;
    out << "dizi-eval v1\n";
    out << "scheme " << scheme_name(scheme) << "\n";
    out << "folds " << folds << "\n";
    out << "seed " << seed << "\n";
    for (size_t f = 0; f < per_fold.size(); ++f)
        out << "fold " << f << " recall " << fmt_double(per_fold[f].macro_recall) << " f1 "
            << fmt_double(per_fold[f].macro_f1) << "\n";
    out << "macro recall " << fmt_double(macro_recall) << " f1 " << fmt_double(macro_f1) << "\n";
    for (size_t i = 0; i < confusion.size(); ++i)
        for (size_t j = 0; j < confusion[i].size(); ++j)
            out << "confusion " << class_names[i] << " " << class_names[j] << " " << confusion[i][j]
                << "\n";
    return out.str();
}

void ClassifierBundle::save(std::ostream& out) const {
    out << "dizi-classifier v1\n";
    pipeline.save(out);
    out << "model\n";
    out << "classes " << model.n_classes << "\n";
    for (const auto& name : model.class_names)
        out << "class " << name << "\n";
    out << "dim " << model.dim << "\n";
    out << "l2 " << fmt_double(model.config.l2) << "\n";
    out << "seed " << model.config.seed << "\n";
    for (int c = 0; c < model.n_classes; ++c) {
        out << "w";
        for (int d = 0; d < model.dim; ++d)
            out << " " << fmt_double(model.weights[static_cast<size_t>(c) * model.dim + d]);
        out << "\n";
    }
    out << "b";
    for (double b : model.bias)
        out << " " << fmt_double(b);
    out << "\n";
}

ClassifierBundle ClassifierBundle::load(std::istream& in) {
    std::string w;
    if (!(in >> w) || w != "dizi-classifier")
        throw std::runtime_error("malformed model file: expected 'dizi-classifier'");
    in >> w; // version
    ClassifierBundle bundle;
    bundle.pipeline = FeaturePipeline::load(in);
    auto need = [&](const std::string& kw) {
        std::string t;
        if (!(in >> t) || t != kw)
            throw std::runtime_error("malformed model file: expected '" + kw + "'");
    };
    need("model");
    need("classes");
    in >> bundle.model.n_classes;
    for (int c = 0; c < bundle.model.n_classes; ++c) {
        need("class");
        std::string name;
        in >> name;
        bundle.model.class_names.push_back(name);
    }
    need("dim");
    in >> bundle.model.dim;
    need("l2");
    in >> bundle.model.config.l2;
    need("seed");
    in >> bundle.model.config.seed;
    bundle.model.weights.resize(static_cast<size_t>(bundle.model.n_classes) * bundle.model.dim);
    for (int c = 0; c < bundle.model.n_classes; ++c) {
        need("w");
        for (int d = 0; d < bundle.model.dim; ++d)
            in >> bundle.model.weights[static_cast<size_t>(c) * bundle.model.dim + d];
    }
    need("b");
    bundle.model.bias.resize(bundle.model.n_classes);
    for (int c = 0; c < bundle.model.n_classes; ++c)
        in >> bundle.model.bias[c];
    if (!in)
        throw std::runtime_error("malformed model file: truncated");
    bundle.model.scheme_id = scheme_name(bundle.pipeline.scheme);
    return bundle;
}

} // namespace dizi
