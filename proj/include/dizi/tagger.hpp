#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dizi/represent.hpp"

namespace dizi {

struct CrfConfig {
    double l2 = 0.05;
    int max_iters = 150;
    double tol = 1e-6;
    uint64_t seed = 0;
};

// The emission feature template, recorded in model files; loading a model
// built with a different template is refused.
const char* crf_feature_template();

// Linear-chain CRF over note tokens. States are technique tags; emission
// features are the local template (current/previous/next token identity,
// pitch class, duration text, first/last flags) plus a dense tag-pair
// transition matrix.
struct CrfModel {
    std::vector<std::string> tags; // state set, index order fixed ("none" first)
    std::vector<double> transition; // K x K, [from * K + to]
    std::unordered_map<std::string, int> feature_index;
    std::vector<std::string> feature_names;
    std::vector<double> emission; // n_feats x K
    std::unordered_set<std::string> train_tokens; // tokens seen in training, for OOV accounting
    std::string feature_template = crf_feature_template();
    CrfConfig config;

    int n_tags() const { return static_cast<int>(tags.size()); }
    int tag_index(const std::string& tag) const;
};

// Feature strings fired at one position of a token sequence.
std::vector<std::string> emission_features(const std::vector<std::string>& tokens, size_t t);

// Training-time view with features and tags resolved to ids; exposed so the
// regularized conditional log-likelihood can be gradient-checked directly.
// Parameter layout: emission (n_feats x K) then transition (K x K).
struct CrfProblem {
    int n_tags = 0;
    int n_feats = 0;
    double l2 = 0;
    std::vector<std::vector<std::vector<int>>> features; // [seq][pos] -> feature ids
    std::vector<std::vector<int>> gold;                  // [seq][pos] -> tag id

    size_t n_params() const {
        return static_cast<size_t>(n_feats) * n_tags + static_cast<size_t>(n_tags) * n_tags;
    }
    double objective(const std::vector<double>& params) const;
    std::vector<double> gradient(const std::vector<double>& params) const;
};

CrfProblem build_crf_problem(const std::vector<TaggedSequence>& sequences,
                             const std::vector<std::string>& tags, double l2,
                             std::unordered_map<std::string, int>* feature_index_out = nullptr,
                             std::vector<std::string>* feature_names_out = nullptr);

CrfModel train_crf(const std::vector<TaggedSequence>& sequences,
                   const std::vector<std::string>& tags, const CrfConfig& config);

// Declarative decode-time constraints: `when <predicate> forbid <tags>` or
// `when <predicate> boost <tag> <score>`, one per line.
struct RuleAtom {
    enum Kind { Any, First, Last, TokenEq, TokenPrefix, DurEq, PrevEq, NextEq };
    Kind kind = Any;
    std::string arg;
};

struct Rule {
    std::vector<RuleAtom> atoms; // conjunction
    bool is_forbid = true;
    std::vector<int> tags;
    double bonus = 0;
};

struct RuleSet {
    std::vector<Rule> rules;

    bool empty() const { return rules.empty(); }
};

// Throws std::runtime_error on syntax errors, unknown tags, or a single rule
// that forbids every registered tag.
RuleSet parse_rules(const std::string& text, const std::vector<std::string>& tags);

// Viterbi max-score path. Rules make forbidden (position, tag) pairs
// unreachable and add boost scores before maximization. Ties resolve toward
// the lowest tag index, settled from the end of the sequence. Throws when
// rules forbid every tag at some position.
std::vector<std::string> decode(const CrfModel& model, const std::vector<std::string>& tokens,
                                const RuleSet* rules = nullptr);

// Position-wise posteriors p(tag | tokens); each row sums to 1.
std::vector<std::vector<double>> tag_marginals(const CrfModel& model,
                                               const std::vector<std::string>& tokens);

// Path score under the model (+ rule bonuses when given), for property tests.
double path_score(const CrfModel& model, const std::vector<std::string>& tokens,
                  const std::vector<int>& path, const RuleSet* rules = nullptr);

struct TagEvalResult {
    double accuracy = 0;                 // 0..100
    std::optional<double> oov_accuracy;  // empty when the test set has no OOV notes
    long long total = 0;
    long long correct = 0;
    long long oov_total = 0;
    long long oov_correct = 0;
};

TagEvalResult evaluate_tagger(const CrfModel& model, const RuleSet* rules,
                              const std::vector<TaggedSequence>& test,
                              const std::unordered_set<std::string>& train_vocab);

void save_crf(const CrfModel& model, std::ostream& out);
CrfModel load_crf(std::istream& in);

} // namespace dizi
