#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcsd/corpus.hpp"
#include "gcsd/model.hpp"
#include "gcsd/tape.hpp"
#include "gcsd/tensor.hpp"

namespace gcsd {

// Per-elder dynamic features feeding the soft prompt generator.
struct ParticipantState {
    int speaker_index = 1;         // human slot, 1-based
    double cognitive_score = 0.5;  // in [0,1], carried from configuration
    double engagement = 0.0;       // fraction of the last W turns spoken
    std::vector<double> history;   // mean token embedding of prior utterances
};

constexpr int kEngagementWindow = 8;

// MLP with a single-position attention block in the middle:
//   L1 = GELU(x W1 + b1)
//   A  = softmax((L1 Wq)(L1 Wk)^T / sqrt(dk)) (L1 Wv)   [1x1 softmax == 1]
//   L2 = GELU(A W2 + b2)
//   P  = tanh(L2 Wout + bout)
struct SoftPromptNetParams {
    Tensor w1, b1;        // d_in x h1, 1 x h1
    Tensor wq, wk, wv;    // h1 x h1 (d_k = h1)
    Tensor w2, b2;        // h1 x h2, 1 x h2
    Tensor w_out, b_out;  // h2 x d_prompt, 1 x d_prompt

    int d_in() const { return w1.rows; }
    int d_prompt() const { return w_out.cols; }
};

std::vector<ParamRef> param_refs(SoftPromptNetParams& p);
SoftPromptNetParams zeros_like(const SoftPromptNetParams& p);
SoftPromptNetParams init_softprompt_net(int d_in, int h1, int h2, int d_prompt, uint64_t seed);
int64_t softnet_param_count(int d_in, int h1, int h2, int d_prompt);

struct SoftNetVars {
    ag::Var w1, b1, wq, wk, wv, w2, b2, w_out, b_out;
};

SoftNetVars bind_softnet(ag::Tape& t, const SoftPromptNetParams& p, SoftPromptNetParams* grads);

// [one-hot(max_humans) | cognitive_score | engagement | history]; the
// history block is d_model wide (zeros when the participant has not spoken).
Tensor featurize(const ParticipantState& state, int max_humans, int d_model);

ag::Var soft_prompt_forward(ag::Tape& t, const SoftNetVars& nv, ag::Var x);
Tensor soft_prompt_forward(const SoftPromptNetParams& net, const Tensor& x);

// ||p_t - p_prev||^2; p_prev enters as data (the previous prompt is already
// fixed when the current one is produced).
ag::Var smoothness_loss(ag::Tape& t, ag::Var p_t, Tensor p_prev);
double smoothness_loss(const Tensor& p_t, const Tensor& p_prev);

// Recomputes engagement over the trailing window of kEngagementWindow turns
// ending at turn_index (1-based) and the history embedding over the
// participant's utterances up to and including turn_index.
ParticipantState update_state(ParticipantState state, const Session& session, int turn_index,
                              const Tensor& tok_emb, const Vocab& vocab);

struct SoftPromptTraceEntry {
    std::string session;
    int participant = 0;
    int turn = 0;
    std::vector<double> p_soft;
};

std::string trace_entry_to_json(const SoftPromptTraceEntry& e);

}  // namespace gcsd
