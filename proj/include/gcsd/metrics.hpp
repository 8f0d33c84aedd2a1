#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gcsd/corpus.hpp"
#include "gcsd/tensor.hpp"
#include "gcsd/vocab.hpp"

namespace gcsd {

// LCS-based F1 (harmonic mean); 0 on empty input by convention.
double rouge_l(const std::vector<int>& hyp, const std::vector<int>& ref);

// Sentence-level BLEU-n: geometric mean of modified k-gram precisions times
// brevity penalty min(1, e^{1-|ref|/|hyp|}). With smoothing on, zero match
// counts take add-one smoothing on numerator and denominator (the reward
// path needs a nonzero signal on short candidates). Returns 0 when the
// hypothesis has no n-grams.
double bleu_n(const std::vector<int>& hyp, const std::vector<int>& ref, int n, bool smoothed);

// Unique n-grams across all texts / total n-gram count.
double distinct_n(const std::vector<std::vector<int>>& texts, int n);

// BERTScore-shaped greedy matching over an embedding table: precision is the
// mean over hyp tokens of the best cosine against any ref token (clamped to
// [0,1]), recall symmetric, F1 harmonic.
double semantic_similarity(const std::vector<int>& hyp, const std::vector<int>& ref,
                           const Tensor& embeddings);

struct MetricReport {
    double rouge_l = 0.0;
    double bleu2 = 0.0;
    double bleu4 = 0.0;
    double semantic = 0.0;
    double distinct2 = 0.0;
    int n_examples = 0;
};

std::string metric_report_to_json(const MetricReport& r);

struct EvalExample {
    std::string session_id;
    int turn = 0;
    std::vector<int> context_ids;   // serialized context, encoded
    std::vector<int> reference_ids; // reference response text, specials stripped
    int addressee = 1;              // most recent human speaker
};

// Generates hypothesis token ids (already special-stripped) for one example.
using ResponseGenerator = std::function<std::vector<int>(const EvalExample&)>;

std::vector<EvalExample> build_eval_examples(const std::vector<Session>& corpus, const Vocab& vocab,
                                             int max_context_tokens);

// Scores every assistant turn of the corpus with the supplied generator.
// Overlap metrics are means over examples; distinct-2 pools the generated
// set. Per-example rows can be captured through `details`.
MetricReport evaluate_with_generator(const std::vector<EvalExample>& examples, const Vocab& vocab,
                                     const Tensor& embeddings, const ResponseGenerator& generate,
                                     std::vector<std::string>* details_jsonl = nullptr);

std::vector<int> strip_special_tokens(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace gcsd
