#include "gcsd/mrpo.hpp"

#include <cmath>

#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/metrics.hpp"
#include "gcsd/optim.hpp"
#include "gcsd/rng.hpp"

namespace gcsd {

void RewardWeights::validate() const {
    if (bleu4 < 0 || semantic < 0 || distinct2 < 0 || structure < 0)
        throw ConfigError("reward weights must be >= 0");
    double sum = bleu4 + semantic + distinct2 + structure;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("reward weights must sum to 1");
}

void MRPOConfig::validate() const {
    if (group_size < 2) throw ConfigError("mrpo group_size must be >= 2");
    if (beta < 0) throw ConfigError("mrpo beta must be >= 0");
    if (learning_rate <= 0) throw ConfigError("mrpo learning_rate must be > 0");
    if (steps < 0 || max_new < 1) throw ConfigError("mrpo steps/max_new");
}

int structure_reward(const std::vector<int>& candidate, const Vocab& vocab, int max_len) {
    if (candidate.empty()) return 0;
    if (candidate.front() != vocab.assistant_id()) return 0;
    bool terminated = candidate.back() == vocab.im_end_id() ||
                      (max_len > 0 && static_cast<int>(candidate.size()) >= max_len);
    if (!terminated) return 0;
    for (size_t i = 0; i < candidate.size(); ++i) {
        int id = candidate[i];
        if (id == vocab.im_start_id()) return 0;
        if (id == vocab.im_end_id() && i + 1 != candidate.size()) return 0;
        if (i > 0 && id == vocab.assistant_id()) return 0;
        if (vocab.is_special(id) && id != vocab.assistant_id() && id != vocab.im_end_id() &&
            id > Vocab::kUnk)
            return 0;  // any [Human_i] in the body
    }
    return 1;
}

RewardBreakdown composite_reward(const std::vector<int>& candidate,
                                 const std::vector<int>& reference, const RewardWeights& w,
                                 const Tensor& embeddings, const Vocab& vocab, int max_len) {
    if (reference.empty()) throw EmptyReference();
    w.validate();
    RewardBreakdown r;
    std::vector<int> cand = strip_special_tokens(candidate, vocab);
    std::vector<int> ref = strip_special_tokens(reference, vocab);
    r.bleu4 = bleu_n(cand, ref, 4, /*smoothed=*/true);
    r.semantic = semantic_similarity(cand, ref, embeddings);
    r.distinct2 = distinct_n({cand}, 2);
    r.structure = structure_reward(candidate, vocab, max_len);
    r.total = w.bleu4 * r.bleu4 + w.semantic * r.semantic + w.distinct2 * r.distinct2 +
              w.structure * r.structure;
    return r;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    const size_t g = rewards.size();
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    double std_pop = std::sqrt(var / static_cast<double>(g));
    std::vector<double> adv(g);
    for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / (std_pop + 1e-8);
    return adv;
}

std::vector<double> kl_estimate(const std::vector<double>& logp_policy,
                                const std::vector<double>& logp_ref) {
    if (logp_policy.size() != logp_ref.size()) throw LengthMismatch("kl_estimate");
    std::vector<double> kl(logp_policy.size());
    for (size_t t = 0; t < kl.size(); ++t) {
        double d = logp_ref[t] - logp_policy[t];
        kl[t] = std::exp(d) - d - 1.0;
    }
    return kl;
}

ag::Var mrpo_objective(ag::Tape& t, const std::vector<ag::Var>& logp_theta,
                       const std::vector<std::vector<double>>& logp_old,
                       const std::vector<std::vector<double>>& logp_ref,
                       const std::vector<double>& advantages, double beta) {
    const size_t g = logp_theta.size();
    if (logp_old.size() != g || logp_ref.size() != g || advantages.size() != g)
        throw ShapeMismatch("mrpo_objective group sizes");
    std::vector<ag::Var> per_candidate;
    for (size_t i = 0; i < g; ++i) {
        const Tensor& lp = t.val(logp_theta[i]);
        int n = lp.rows;
        if (lp.cols != 1 || n != static_cast<int>(logp_old[i].size()) ||
            n != static_cast<int>(logp_ref[i].size()))
            throw ShapeMismatch("mrpo_objective token lengths");
        Tensor neg_old(n, 1), ref(n, 1);
        for (int k = 0; k < n; ++k) {
            neg_old.v[k] = -logp_old[i][k];
            ref.v[k] = logp_ref[i][k];
        }
        ag::Var ratio = ag::exp_t(t, ag::add_const(t, logp_theta[i], neg_old));
        ag::Var term = ag::affine(t, ratio, advantages[i], 0.0);
        if (beta != 0.0) {
            // kl = exp(d) - d - 1 with d = logp_ref - logp_theta, on-tape
            ag::Var d = ag::add_const(t, ag::affine(t, logp_theta[i], -1.0, 0.0), ref);
            ag::Var kl = ag::affine(t, ag::sub(t, ag::exp_t(t, d), d), 1.0, -1.0);
            term = ag::sub(t, term, ag::affine(t, kl, beta, 0.0));
        }
        per_candidate.push_back(ag::mean_all(t, term));
    }
    std::vector<double> w(g, 1.0 / static_cast<double>(g));
    return ag::weighted_sum(t, per_candidate, w);
}

std::string trace_row_to_json(const RewardTraceRow& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["mean_total"] = r.mean_total;
    j["mean_bleu4"] = r.mean_bleu4;
    j["mean_sem"] = r.mean_sem;
    j["mean_dist2"] = r.mean_dist2;
    j["struct_rate"] = r.struct_rate;
    j["mean_kl"] = r.mean_kl;
    return j.dump();
}

MrpoResult run_mrpo(const ModelParams& params_sft, const std::vector<MrpoPrompt>& prompts,
                    const MRPOConfig& cfg, const RewardWeights& w, const Vocab& vocab) {
    cfg.validate();
    w.validate();
    if (prompts.empty()) throw DataError("run_mrpo needs prompts");

    MrpoResult out;
    out.params = params_sft;            // policy starts from the SFT weights
    const ModelParams& pi_ref = params_sft;  // frozen reference

    ModelParams grads = zeros_like(out.params);
    auto prefs = param_refs(out.params);
    auto grefs = param_refs(grads);
    AdamWConfig ocfg;
    ocfg.weight_decay = 0.0;
    AdamW opt(ocfg);

    for (int step = 0; step < cfg.steps; ++step) {
        Rng prompt_rng(derive_seed(cfg.seed, 0x70726F6D, step));
        const MrpoPrompt& prompt = prompts[prompt_rng.uniform_int(static_cast<int>(prompts.size()))];
        const Tensor* soft = prompt.soft_prompt.rows > 0 ? &prompt.soft_prompt : nullptr;

        std::vector<std::vector<int>> cands(cfg.group_size);
        std::vector<RewardBreakdown> rewards(cfg.group_size);
        std::vector<double> totals(cfg.group_size);
        for (int i = 0; i < cfg.group_size; ++i) {
            SampleParams sp;
            sp.temperature = cfg.temperature;
            sp.top_p = cfg.top_p;
            sp.max_new = cfg.max_new;
            sp.seed = derive_seed(cfg.seed, step, i);
            cands[i] = sample_response(out.params, prompt.context_ids, soft, sp, vocab);
            if (cands[i].empty()) cands[i].push_back(vocab.im_end_id());  // window exhausted
            rewards[i] = composite_reward(cands[i], prompt.reference_ids, w, pi_ref.tok_emb, vocab,
                                          cfg.max_new);
            totals[i] = rewards[i].total;
        }
        std::vector<double> adv = group_advantages(totals);

        ag::Tape t;
        ModelVars mv = bind_model(t, out.params, &grads);
        std::vector<ag::Var> lp_theta;
        std::vector<std::vector<double>> lp_old(cfg.group_size), lp_ref(cfg.group_size);
        const int C = static_cast<int>(prompt.context_ids.size());
        const int off = soft ? 1 : 0;
        for (int i = 0; i < cfg.group_size; ++i) {
            std::vector<int> full = prompt.context_ids;
            full.insert(full.end(), cands[i].begin(), cands[i].end());
            std::optional<ag::Var> soft_var;
            if (soft) soft_var = t.const_ref(soft);
            ModelGraph g = model_forward(t, mv, out.params.cfg, full, soft_var);
            int r0 = off + C - 1;
            ag::Var rows = ag::slice_rows(t, g.logits, r0, r0 + static_cast<int>(cands[i].size()));
            ag::Var lp = ag::gather_log_probs(t, rows, cands[i]);
            lp_theta.push_back(lp);

            const Tensor& lp_val = t.val(lp);
            lp_old[i].assign(lp_val.v.begin(), lp_val.v.end());  // pi_old == pi at sampling time

            std::vector<double> full_ref_lp = log_probs(pi_ref, full, soft);
            lp_ref[i].assign(full_ref_lp.begin() + (C - 1), full_ref_lp.end());
        }

        ag::Var objective = mrpo_objective(t, lp_theta, lp_old, lp_ref, adv, cfg.beta);
        ag::Var loss = ag::affine(t, objective, -1.0, 0.0);  // ascend J
        zero_grads(grefs);
        t.backward(loss);
        clip_grad_norm(grefs, cfg.grad_clip);
        opt.step(prefs, grefs, cfg.learning_rate);

        RewardTraceRow row;
        row.step = step;
        double kl_sum = 0.0;
        int64_t kl_count = 0;
        for (int i = 0; i < cfg.group_size; ++i) {
            row.mean_total += rewards[i].total;
            row.mean_bleu4 += rewards[i].bleu4;
            row.mean_sem += rewards[i].semantic;
            row.mean_dist2 += rewards[i].distinct2;
            row.struct_rate += rewards[i].structure;
            for (double kl : kl_estimate(lp_old[i], lp_ref[i])) {
                kl_sum += kl;
                ++kl_count;
            }
        }
        row.mean_total /= cfg.group_size;
        row.mean_bleu4 /= cfg.group_size;
        row.mean_sem /= cfg.group_size;
        row.mean_dist2 /= cfg.group_size;
        row.struct_rate /= cfg.group_size;
        row.mean_kl = kl_count ? kl_sum / static_cast<double>(kl_count) : 0.0;
        out.trace.push_back(row);
    }
    return out;
}

}  // namespace gcsd
