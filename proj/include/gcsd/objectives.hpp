#pragma once

#include <cstdint>
#include <vector>

#include "gcsd/tape.hpp"
#include "gcsd/vocab.hpp"

namespace gcsd {

struct SFTLossWeights {
    double gamma1 = 1.0;  // generation
    double gamma2 = 0.5;  // attention supervision
    double gamma3 = 0.1;  // smoothness
    void validate() const;
};

// eta is a distribution over the supervised sequence: 1/|positions| at each
// keyword position, 0 elsewhere. lambda_j = exp(kappa * eta_j).
struct KeywordTargets {
    std::vector<int> positions;
    std::vector<double> eta;
    double kappa = 1.0;

    std::vector<double> lambda() const;
};

KeywordTargets make_keyword_targets(const std::vector<int>& positions, int seq_len, double kappa);

// Mean masked cross entropy over the rows of logits; targets[r] is the token
// row r should predict, mask[r] selects the assistant-response rows.
ag::Var generation_loss(ag::Tape& t, ag::Var logits, const std::vector<int>& targets,
                        const std::vector<uint8_t>& mask);

// Frequency-rank keyword picker: rarest corpus tokens first, stop tokens
// (punctuation, whitespace, specials) excluded, ties broken by earliest
// position. Picks max(1, ceil(k_fraction * len)) positions; if everything is
// stopped, falls back to position 0.
std::vector<int> extract_keywords(const std::vector<int>& response_ids,
                                  const std::vector<int64_t>& corpus_freq, double k_fraction,
                                  const std::vector<uint8_t>& stop_mask);

// Token frequency table and stop mask helpers shared by training and tests.
std::vector<int64_t> token_frequencies(const std::vector<std::vector<int>>& token_seqs, int vocab_size);
std::vector<uint8_t> build_stop_mask(const Vocab& vocab);

// Eq. 7 reduction: mean the final-layer head maps, mean over the supervised
// query rows, drop the virtual-prompt column when present, then the
// lambda-weighted squared error against eta.
ag::Var csfal(ag::Tape& t, const std::vector<ag::Var>& final_layer_heads,
              const std::vector<int>& query_rows, int key_col_offset, const KeywordTargets& targets);

// gamma1 * l_gen + gamma2 * l_csfal + gamma3 * l_smooth; throws NonFinite on
// any non-finite component.
ag::Var sft_loss(ag::Tape& t, ag::Var l_gen, ag::Var l_csfal, ag::Var l_smooth,
                 const SFTLossWeights& w);

}  // namespace gcsd
