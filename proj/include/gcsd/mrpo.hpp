#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcsd/model.hpp"
#include "gcsd/tape.hpp"
#include "gcsd/vocab.hpp"

namespace gcsd {

struct RewardWeights {
    double bleu4 = 0.25;
    double semantic = 0.35;
    double distinct2 = 0.20;
    double structure = 0.20;
    void validate() const;  // must sum to 1
};

struct RewardBreakdown {
    double bleu4 = 0.0;
    double semantic = 0.0;
    double distinct2 = 0.0;
    double structure = 0.0;
    double total = 0.0;
};

struct MRPOConfig {
    int group_size = 8;
    double beta = 0.04;
    double learning_rate = 1e-3;
    int steps = 200;
    int max_new = 32;
    double temperature = 0.6;
    double top_p = 0.95;
    double grad_clip = 1.0;
    uint64_t seed = 0;
    void validate() const;
};

// 1 iff the candidate opens with [Assistant], terminates with <|im_end|>
// (or ran to max_len), and carries no [Human_i] / <|im_start|> / stray
// <|im_end|> in its body.
int structure_reward(const std::vector<int>& candidate, const Vocab& vocab, int max_len = -1);

// BLEU-4 (smoothed), embedding semantic similarity, candidate Distinct-2 and
// the binary structure check, combined with the reward weights. Specials are
// stripped before the text metrics.
RewardBreakdown composite_reward(const std::vector<int>& candidate,
                                 const std::vector<int>& reference, const RewardWeights& w,
                                 const Tensor& embeddings, const Vocab& vocab, int max_len = -1);

// (R_i - mean) / (std_pop + 1e-8), one value per candidate; outcome-level
// credit broadcast to every token.
std::vector<double> group_advantages(const std::vector<double>& rewards);

// k3 estimator per token: r - log r - 1 with r = exp(logp_ref - logp_policy).
std::vector<double> kl_estimate(const std::vector<double>& logp_policy,
                                const std::vector<double>& logp_ref);

// J = mean_i (1/|o_i|) sum_t [ exp(logp - logp_old) * A_i - beta * kl_t ],
// with the KL term rebuilt from logp_ref on the tape so its gradient flows
// through the policy log-probs.
ag::Var mrpo_objective(ag::Tape& t, const std::vector<ag::Var>& logp_theta,
                       const std::vector<std::vector<double>>& logp_old,
                       const std::vector<std::vector<double>>& logp_ref,
                       const std::vector<double>& advantages, double beta);

struct MrpoPrompt {
    std::vector<int> context_ids;
    Tensor soft_prompt;              // rows == 0 means no prompt conditioning
    std::vector<int> reference_ids;  // ground-truth continuation, terminator included
};

struct RewardTraceRow {
    int step = 0;
    double mean_total = 0.0;
    double mean_bleu4 = 0.0;
    double mean_sem = 0.0;
    double mean_dist2 = 0.0;
    double struct_rate = 0.0;
    double mean_kl = 0.0;
};

std::string trace_row_to_json(const RewardTraceRow& r);

struct MrpoResult {
    ModelParams params;
    std::vector<RewardTraceRow> trace;
};

// Algorithm: freeze pi_ref at the SFT parameters, then per step sample a
// prompt, draw G candidates, score them against the prompt's reference, and
// ascend the objective. Rewards use the frozen reference embeddings so the
// reward scale cannot drift with the policy.
MrpoResult run_mrpo(const ModelParams& params_sft, const std::vector<MrpoPrompt>& prompts,
                    const MRPOConfig& cfg, const RewardWeights& w, const Vocab& vocab);

}  // namespace gcsd
