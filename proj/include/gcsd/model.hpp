#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcsd/tape.hpp"
#include "gcsd/tensor.hpp"
#include "gcsd/vocab.hpp"

namespace gcsd {

struct ModelConfig {
    int d_model = 128;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 0;  // 0 -> 4 * d_model
    int max_seq = 512;
    int vocab_size = 0;
    uint64_t init_seed = 0;

    int ff() const { return d_ff > 0 ? d_ff : 4 * d_model; }
    int head_dim() const { return d_model / n_heads; }
    void validate() const;
};

struct LayerParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor w1, b1, w2, b2;
};

// Token embeddings double as the output projection (tied weights); there is
// no separate lm_head tensor anywhere.
struct ModelParams {
    ModelConfig cfg;
    Tensor tok_emb;  // vocab_size x d_model
    Tensor pos_emb;  // max_seq x d_model
    std::vector<LayerParams> layers;
    Tensor lnf_g, lnf_b;
};

struct ParamRef {
    std::string name;
    Tensor* tensor;
    bool decay;  // 2-D weights decay; gains and biases do not
};

std::vector<ParamRef> param_refs(ModelParams& p);

// Zero tensors with the same shapes; used as gradient accumulators.
ModelParams zeros_like(const ModelParams& p);

ModelParams init_model(const ModelConfig& cfg);

int64_t param_count(const ModelConfig& cfg);

// FNV-1a over the raw FP64 bit patterns of every parameter, in ref order.
uint64_t params_checksum(const ModelParams& p);

// Per layer, per head causal attention probabilities.
struct AttentionMap {
    std::vector<std::vector<Tensor>> probs;  // [layer][head], (T+off) x (T+off)
};

struct ForwardResult {
    Tensor logits;  // (T + off) x vocab_size
    AttentionMap attn;
};

// --- tape-based graph (training path) -------------------------------------

struct ModelVars {
    ag::Var tok_emb, pos_emb, lnf_g, lnf_b;
    struct L {
        ag::Var ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::vector<L> layers;
};

// grads == nullptr binds parameters as constants (no-gradient graph).
ModelVars bind_model(ag::Tape& t, const ModelParams& p, ModelParams* grads);

struct ModelGraph {
    ag::Var logits;
    std::vector<std::vector<ag::Var>> attn;  // [layer][head]
    int offset = 0;                          // 1 when a soft prompt row is present
};

struct ForwardOptions {
    bool last_row_logits = false;  // project only the final row through the head
};

// Builds the forward graph. The soft prompt (1 x d_model), when present,
// occupies row 0 as a virtual token embedding; real tokens then use
// positions 1..T. Throws SequenceTooLong past max_seq.
ModelGraph model_forward(ag::Tape& t, const ModelVars& mv, const ModelConfig& cfg,
                         const std::vector<int>& ids, std::optional<ag::Var> soft_prompt,
                         const ForwardOptions& opts = {});

// --- no-gradient entry points ----------------------------------------------

ForwardResult forward(const ModelParams& p, const std::vector<int>& ids,
                      const Tensor* soft_prompt = nullptr);

// log_probs[t] = log softmax(logits at position t)[ids[t+1]]; length len-1.
std::vector<double> log_probs(const ModelParams& p, const std::vector<int>& ids,
                              const Tensor* soft_prompt = nullptr);

struct SampleParams {
    double temperature = 0.6;
    double top_p = 0.95;
    int max_new = 64;
    uint64_t seed = 0;
};

// Autoregressive nucleus sampling; stops after emitting <|im_end|> or at
// max_new tokens (or when the context window is exhausted). Returns only
// the generated ids, terminator included.
std::vector<int> sample_response(const ModelParams& p, const std::vector<int>& context,
                                 const Tensor* soft_prompt, const SampleParams& sp, const Vocab& vocab);

// Nucleus filter: smallest probability-sorted prefix with cumulative mass
// >= top_p, renormalized. Exposed for tests.
std::vector<std::pair<int, double>> nucleus_filter(const std::vector<double>& probs, double top_p);

}  // namespace gcsd
