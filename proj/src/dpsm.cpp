#include "gcsd/dpsm.hpp"

#include <cmath>

#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/rng.hpp"

namespace gcsd {

std::vector<ParamRef> param_refs(SoftPromptNetParams& p) {
    return {
        {"softnet.w1", &p.w1, true},    {"softnet.b1", &p.b1, false},
        {"softnet.wq", &p.wq, true},    {"softnet.wk", &p.wk, true},
        {"softnet.wv", &p.wv, true},    {"softnet.w2", &p.w2, true},
        {"softnet.b2", &p.b2, false},   {"softnet.w_out", &p.w_out, true},
        {"softnet.b_out", &p.b_out, false},
    };
}

SoftPromptNetParams zeros_like(const SoftPromptNetParams& p) {
    SoftPromptNetParams z;
    z.w1 = Tensor(p.w1.rows, p.w1.cols);
    z.b1 = Tensor(p.b1.rows, p.b1.cols);
    z.wq = Tensor(p.wq.rows, p.wq.cols);
    z.wk = Tensor(p.wk.rows, p.wk.cols);
    z.wv = Tensor(p.wv.rows, p.wv.cols);
    z.w2 = Tensor(p.w2.rows, p.w2.cols);
    z.b2 = Tensor(p.b2.rows, p.b2.cols);
    z.w_out = Tensor(p.w_out.rows, p.w_out.cols);
    z.b_out = Tensor(p.b_out.rows, p.b_out.cols);
    return z;
}

SoftPromptNetParams init_softprompt_net(int d_in, int h1, int h2, int d_prompt, uint64_t seed) {
    if (d_in < 1 || h1 < 1 || h2 < 1 || d_prompt < 1) throw ConfigError("soft net dims must be >= 1");
    SoftPromptNetParams p;
    p.w1 = Tensor(d_in, h1);
    p.b1 = Tensor(1, h1);
    p.wq = Tensor(h1, h1);
    p.wk = Tensor(h1, h1);
    p.wv = Tensor(h1, h1);
    p.w2 = Tensor(h1, h2);
    p.b2 = Tensor(1, h2);
    p.w_out = Tensor(h2, d_prompt);
    p.b_out = Tensor(1, d_prompt);
    Rng rng(seed);
    for (auto& ref : param_refs(p)) {
        if (!ref.decay) continue;  // biases stay zero
        for (double& x : ref.tensor->v) x = 0.02 * rng.gaussian();
    }
    return p;
}

int64_t softnet_param_count(int d_in, int h1, int h2, int d_prompt) {
    return static_cast<int64_t>(d_in) * h1 + h1 + 3LL * h1 * h1 + static_cast<int64_t>(h1) * h2 + h2 +
           static_cast<int64_t>(h2) * d_prompt + d_prompt;
}

SoftNetVars bind_softnet(ag::Tape& t, const SoftPromptNetParams& p, SoftPromptNetParams* grads) {
    auto bind = [&](const Tensor& v, Tensor* g) { return grads ? t.param(&v, g) : t.const_ref(&v); };
    SoftNetVars nv;
    nv.w1 = bind(p.w1, grads ? &grads->w1 : nullptr);
    nv.b1 = bind(p.b1, grads ? &grads->b1 : nullptr);
    nv.wq = bind(p.wq, grads ? &grads->wq : nullptr);
    nv.wk = bind(p.wk, grads ? &grads->wk : nullptr);
    nv.wv = bind(p.wv, grads ? &grads->wv : nullptr);
    nv.w2 = bind(p.w2, grads ? &grads->w2 : nullptr);
    nv.b2 = bind(p.b2, grads ? &grads->b2 : nullptr);
    nv.w_out = bind(p.w_out, grads ? &grads->w_out : nullptr);
    nv.b_out = bind(p.b_out, grads ? &grads->b_out : nullptr);
    return nv;
}

Tensor featurize(const ParticipantState& state, int max_humans, int d_model) {
    if (state.speaker_index < 1 || state.speaker_index > max_humans)
        throw IndexOutOfRange("speaker index " + std::to_string(state.speaker_index) + " of " +
                              std::to_string(max_humans));
    if (!state.history.empty() && static_cast<int>(state.history.size()) != d_model)
        throw DimensionMismatch("history vector");
    Tensor x(1, max_humans + 2 + d_model);
    x.v[state.speaker_index - 1] = 1.0;
    x.v[max_humans] = state.cognitive_score;
    x.v[max_humans + 1] = state.engagement;
    for (int j = 0; j < d_model && !state.history.empty(); ++j)
        x.v[max_humans + 2 + j] = state.history[j];
    return x;
}

ag::Var soft_prompt_forward(ag::Tape& t, const SoftNetVars& nv, ag::Var x) {
    const Tensor& X = t.val(x);
    if (X.rows != 1 || X.cols != t.val(nv.w1).rows) throw DimensionMismatch("soft prompt input");
    ag::Var l1 = ag::gelu(t, ag::add_rowvec(t, ag::matmul(t, x, nv.w1), nv.b1));
    // single-position attention: the 1x1 softmax is identically 1, kept in
    // the graph so the block matches its stated form
    int dk = t.val(nv.wq).cols;
    ag::Var q = ag::matmul(t, l1, nv.wq);
    ag::Var k = ag::matmul(t, l1, nv.wk);
    ag::Var v = ag::matmul(t, l1, nv.wv);
    ag::Var scores = ag::affine(t, ag::matmul_nt(t, q, k), 1.0 / std::sqrt(static_cast<double>(dk)), 0.0);
    ag::Var probs = ag::softmax_causal(t, scores);
    ag::Var att = ag::matmul(t, probs, v);
    ag::Var l2 = ag::gelu(t, ag::add_rowvec(t, ag::matmul(t, att, nv.w2), nv.b2));
    return ag::tanh_t(t, ag::add_rowvec(t, ag::matmul(t, l2, nv.w_out), nv.b_out));
}

Tensor soft_prompt_forward(const SoftPromptNetParams& net, const Tensor& x) {
    ag::Tape t;
    SoftNetVars nv = bind_softnet(t, net, nullptr);
    return t.val(soft_prompt_forward(t, nv, t.const_ref(&x)));
}

ag::Var smoothness_loss(ag::Tape& t, ag::Var p_t, Tensor p_prev) {
    return ag::sq_dist_const(t, p_t, std::move(p_prev));
}

double smoothness_loss(const Tensor& p_t, const Tensor& p_prev) {
    if (!p_t.same_shape(p_prev)) throw DimensionMismatch("smoothness_loss");
    double s = 0.0;
    for (size_t i = 0; i < p_t.v.size(); ++i) {
        double d = p_t.v[i] - p_prev.v[i];
        s += d * d;
    }
    return s;
}

ParticipantState update_state(ParticipantState state, const Session& session, int turn_index,
                              const Tensor& tok_emb, const Vocab& vocab) {
    int spoke = 0;
    int window_start = std::max(1, turn_index - kEngagementWindow + 1);
    std::vector<double> sum(tok_emb.cols, 0.0);
    int64_t token_count = 0;
    for (const auto& u : session.utterances) {
        if (u.turn > turn_index) break;
        if (u.speaker.human_index != state.speaker_index) continue;
        if (u.turn >= window_start) ++spoke;
        for (int id : vocab.encode(u.text)) {
            const double* row = tok_emb.row(id);
            for (int j = 0; j < tok_emb.cols; ++j) sum[j] += row[j];
            ++token_count;
        }
    }
    state.engagement = static_cast<double>(spoke) / kEngagementWindow;
    if (token_count > 0) {
        for (double& x : sum) x /= static_cast<double>(token_count);
        state.history = std::move(sum);
    } else {
        state.history.assign(tok_emb.cols, 0.0);
    }
    return state;
}

std::string trace_entry_to_json(const SoftPromptTraceEntry& e) {
    nlohmann::json j;
    j["session"] = e.session;
    j["participant"] = e.participant;
    j["turn"] = e.turn;
    j["p_soft"] = e.p_soft;
    return j.dump();
}

}  // namespace gcsd
