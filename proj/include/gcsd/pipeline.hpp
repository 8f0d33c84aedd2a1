#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gcsd/checkpoint.hpp"
#include "gcsd/corpus.hpp"
#include "gcsd/dpsm.hpp"
#include "gcsd/metrics.hpp"
#include "gcsd/model.hpp"
#include "gcsd/mrpo.hpp"
#include "gcsd/objectives.hpp"
#include "gcsd/optim.hpp"
#include "gcsd/pgss.hpp"

namespace gcsd {

struct DpsmConfig {
    int h1 = 512;
    int h2 = 256;
    int max_humans = 8;
    uint64_t init_seed = 0;
    double default_cognitive_score = 0.5;
};

struct SftConfig {
    SFTLossWeights gammas;
    int epochs_sim = 1;
    int epochs_real = 1;
    int grad_accum = 16;  // micro-batch 1, accumulated
    LrSchedule schedule;  // peak 5e-5, floor 1e-7, warmup 5%
    double weight_decay = 0.01;
    double grad_clip = 1.0;
    double kappa = 1.0;
    double k_fraction = 0.2;
};

struct EvalSettings {
    double temperature = 0.6;
    double top_p = 0.95;
    int max_new = 64;
    uint64_t seed = 0;
};

struct Paths {
    std::string sim_corpus = "sim.jsonl";
    std::string real_corpus = "real.jsonl";
    std::string test_corpus = "test.jsonl";
    std::string checkpoint_dir = ".";
    std::string loss_log;   // JSONL per optimizer step, empty = off
    std::string trace_log;  // MRPO reward trace JSONL, empty = off
};

struct TrainConfig {
    ModelConfig model;  // vocab_size filled from data
    DpsmConfig dpsm;
    SftConfig sft;
    MRPOConfig mrpo;
    RewardWeights rewards;
    EvalSettings eval;
    uint64_t seed = 0;
    Paths paths;
    std::optional<ScenarioConfig> scenario;  // overrides for `simulate`

    void validate() const;
    uint64_t hash() const;
};

TrainConfig train_config_from_json(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

// One supervised pair: the serialized context and one assistant response.
struct SftExample {
    int session_index = 0;
    int utterance_index = 0;  // assistant utterance within the session
    std::vector<int> context_ids;
    std::vector<int> response_ids;  // [Assistant] text <|im_end|>
    std::vector<int> keyword_positions;  // within response_ids
    int addressee = 1;
    int context_turn = 0;  // last context turn, for state updates
};

std::vector<SftExample> build_sft_examples(const std::vector<Session>& corpus, const Vocab& vocab,
                                           const SftConfig& cfg);

struct StepLossRow {
    int64_t step = 0;
    double l_gen = 0.0, l_csfal = 0.0, l_smooth = 0.0, l_total = 0.0;
};

std::string loss_row_to_json(const StepLossRow& r);

struct SftPhaseResult {
    int64_t steps = 0;
    std::vector<StepLossRow> losses;
    std::vector<SoftPromptTraceEntry> trace;
};

// One SFT stage over one corpus: teacher forcing with the per-addressee soft
// prompt in the graph, joint loss per the gamma weights, gradient
// accumulation to the effective batch, AdamW on the warmup+cosine schedule.
SftPhaseResult sft_phase(const std::vector<Session>& corpus, const Vocab& vocab, ModelParams& params,
                         SoftPromptNetParams& net, const TrainConfig& cfg, int epochs,
                         uint64_t stage_seed);

struct TwoStageResult {
    Checkpoint checkpoint;
    int64_t sim_steps = 0;
    int64_t real_steps = 0;
};

// Continued training on simulated data, then fine-tuning on real data.
// skip_sim reproduces the no-continued-training ablation.
TwoStageResult train_two_stage(const std::vector<Session>& sim, const std::vector<Session>& real,
                               const TrainConfig& cfg, bool skip_sim = false);

// Mean smoothness gap ||P_t - P_{t-1}||^2 across a corpus, first prompt
// compared against zero, mirroring the training-time regularizer.
double mean_soft_prompt_gap(const std::vector<Session>& corpus, const ModelParams& params,
                            const SoftPromptNetParams& net, const DpsmConfig& dcfg,
                            const Vocab& vocab, std::vector<SoftPromptTraceEntry>* trace = nullptr);

// Prompts for the MRPO phase, one per assistant turn.
std::vector<MrpoPrompt> build_mrpo_prompts(const std::vector<Session>& corpus, const Vocab& vocab,
                                           const ModelParams& params, const SoftPromptNetParams& net,
                                           const DpsmConfig& dcfg, int max_new);

// Seeded sampling evaluation of every assistant turn in the test corpus.
MetricReport evaluate_corpus(const Checkpoint& ckpt, const std::vector<Session>& test,
                             const EvalSettings& settings, const DpsmConfig& dcfg,
                             std::vector<std::string>* details_jsonl = nullptr);

// Interactive loop: `/as <i> <text>` adds a human turn and generates the
// assistant reply, `/seed <n>` reseeds, `/quit` writes the transcript.
int chat_repl(const Checkpoint& ckpt, const DpsmConfig& dcfg, std::istream& in, std::ostream& out,
              const std::string& transcript_path, const EvalSettings& settings);

}  // namespace gcsd
