#include "gcsd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gcsd/errors.hpp"
#include "gcsd/rng.hpp"

namespace gcsd {

void ModelConfig::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || max_seq < 2 || vocab_size < 1)
        throw ConfigError("model dims must be >= 1");
    if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
}

std::vector<ParamRef> param_refs(ModelParams& p) {
    std::vector<ParamRef> refs;
    refs.push_back({"tok_emb", &p.tok_emb, true});
    refs.push_back({"pos_emb", &p.pos_emb, true});
    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto& L = p.layers[l];
        std::string pre = "layers." + std::to_string(l) + ".";
        refs.push_back({pre + "ln1_g", &L.ln1_g, false});
        refs.push_back({pre + "ln1_b", &L.ln1_b, false});
        refs.push_back({pre + "wq", &L.wq, true});
        refs.push_back({pre + "bq", &L.bq, false});
        refs.push_back({pre + "wk", &L.wk, true});
        refs.push_back({pre + "bk", &L.bk, false});
        refs.push_back({pre + "wv", &L.wv, true});
        refs.push_back({pre + "bv", &L.bv, false});
        refs.push_back({pre + "wo", &L.wo, true});
        refs.push_back({pre + "bo", &L.bo, false});
        refs.push_back({pre + "ln2_g", &L.ln2_g, false});
        refs.push_back({pre + "ln2_b", &L.ln2_b, false});
        refs.push_back({pre + "w1", &L.w1, true});
        refs.push_back({pre + "b1", &L.b1, false});
        refs.push_back({pre + "w2", &L.w2, true});
        refs.push_back({pre + "b2", &L.b2, false});
    }
    refs.push_back({"lnf_g", &p.lnf_g, false});
    refs.push_back({"lnf_b", &p.lnf_b, false});
    return refs;
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z;
    z.cfg = p.cfg;
    z.tok_emb = Tensor(p.tok_emb.rows, p.tok_emb.cols);
    z.pos_emb = Tensor(p.pos_emb.rows, p.pos_emb.cols);
    z.layers.resize(p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& a = p.layers[l];
        auto& b = z.layers[l];
        b.ln1_g = Tensor(a.ln1_g.rows, a.ln1_g.cols);
        b.ln1_b = Tensor(a.ln1_b.rows, a.ln1_b.cols);
        b.wq = Tensor(a.wq.rows, a.wq.cols);
        b.bq = Tensor(a.bq.rows, a.bq.cols);
        b.wk = Tensor(a.wk.rows, a.wk.cols);
        b.bk = Tensor(a.bk.rows, a.bk.cols);
        b.wv = Tensor(a.wv.rows, a.wv.cols);
        b.bv = Tensor(a.bv.rows, a.bv.cols);
        b.wo = Tensor(a.wo.rows, a.wo.cols);
        b.bo = Tensor(a.bo.rows, a.bo.cols);
        b.ln2_g = Tensor(a.ln2_g.rows, a.ln2_g.cols);
        b.ln2_b = Tensor(a.ln2_b.rows, a.ln2_b.cols);
        b.w1 = Tensor(a.w1.rows, a.w1.cols);
        b.b1 = Tensor(a.b1.rows, a.b1.cols);
        b.w2 = Tensor(a.w2.rows, a.w2.cols);
        b.b2 = Tensor(a.b2.rows, a.b2.cols);
    }
    z.lnf_g = Tensor(p.lnf_g.rows, p.lnf_g.cols);
    z.lnf_b = Tensor(p.lnf_b.rows, p.lnf_b.cols);
    return z;
}

ModelParams init_model(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    const int d = cfg.d_model, ff = cfg.ff();
    p.tok_emb = Tensor(cfg.vocab_size, d);
    p.pos_emb = Tensor(cfg.max_seq, d);
    p.layers.resize(cfg.n_layers);
    for (auto& L : p.layers) {
        L.ln1_g = Tensor(1, d);
        L.ln1_b = Tensor(1, d);
        L.wq = Tensor(d, d);
        L.bq = Tensor(1, d);
        L.wk = Tensor(d, d);
        L.bk = Tensor(1, d);
        L.wv = Tensor(d, d);
        L.bv = Tensor(1, d);
        L.wo = Tensor(d, d);
        L.bo = Tensor(1, d);
        L.ln2_g = Tensor(1, d);
        L.ln2_b = Tensor(1, d);
        L.w1 = Tensor(d, ff);
        L.b1 = Tensor(1, ff);
        L.w2 = Tensor(ff, d);
        L.b2 = Tensor(1, d);
    }
    p.lnf_g = Tensor(1, d);
    p.lnf_b = Tensor(1, d);

    Rng rng(cfg.init_seed);
    for (auto& ref : param_refs(p)) {
        bool is_gain = ref.name.size() >= 2 && ref.name.substr(ref.name.size() - 2) == "_g";
        bool is_bias = !ref.decay && !is_gain;
        if (is_gain) {
            std::fill(ref.tensor->v.begin(), ref.tensor->v.end(), 1.0);
        } else if (is_bias) {
            // zeros already
        } else {
            for (double& x : ref.tensor->v) x = 0.02 * rng.gaussian();
        }
    }
    return p;
}

int64_t param_count(const ModelConfig& cfg) {
    const int64_t d = cfg.d_model, ff = cfg.ff();
    int64_t per_layer = 2 * d                 // ln1
                        + 4 * (d * d + d)     // qkvo + biases
                        + 2 * d               // ln2
                        + d * ff + ff         // w1, b1
                        + ff * d + d;         // w2, b2
    return static_cast<int64_t>(cfg.vocab_size) * d + static_cast<int64_t>(cfg.max_seq) * d +
           cfg.n_layers * per_layer + 2 * d;
}

uint64_t params_checksum(const ModelParams& p) {
    uint64_t h = 1469598103934665603ULL;
    auto& mp = const_cast<ModelParams&>(p);
    for (const auto& ref : param_refs(mp)) {
        for (double x : ref.tensor->v) {
            uint64_t bits;
            static_assert(sizeof(bits) == sizeof(x));
            std::memcpy(&bits, &x, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xFF;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

ModelVars bind_model(ag::Tape& t, const ModelParams& p, ModelParams* grads) {
    auto bind = [&](const Tensor& v, Tensor* g) {
        return grads ? t.param(&v, g) : t.const_ref(&v);
    };
    ModelVars mv;
    mv.tok_emb = bind(p.tok_emb, grads ? &grads->tok_emb : nullptr);
    mv.pos_emb = bind(p.pos_emb, grads ? &grads->pos_emb : nullptr);
    mv.layers.resize(p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        const auto& L = p.layers[l];
        auto* G = grads ? &grads->layers[l] : nullptr;
        auto& B = mv.layers[l];
        B.ln1_g = bind(L.ln1_g, G ? &G->ln1_g : nullptr);
        B.ln1_b = bind(L.ln1_b, G ? &G->ln1_b : nullptr);
        B.wq = bind(L.wq, G ? &G->wq : nullptr);
        B.bq = bind(L.bq, G ? &G->bq : nullptr);
        B.wk = bind(L.wk, G ? &G->wk : nullptr);
        B.bk = bind(L.bk, G ? &G->bk : nullptr);
        B.wv = bind(L.wv, G ? &G->wv : nullptr);
        B.bv = bind(L.bv, G ? &G->bv : nullptr);
        B.wo = bind(L.wo, G ? &G->wo : nullptr);
        B.bo = bind(L.bo, G ? &G->bo : nullptr);
        B.ln2_g = bind(L.ln2_g, G ? &G->ln2_g : nullptr);
        B.ln2_b = bind(L.ln2_b, G ? &G->ln2_b : nullptr);
        B.w1 = bind(L.w1, G ? &G->w1 : nullptr);
        B.b1 = bind(L.b1, G ? &G->b1 : nullptr);
        B.w2 = bind(L.w2, G ? &G->w2 : nullptr);
        B.b2 = bind(L.b2, G ? &G->b2 : nullptr);
    }
    mv.lnf_g = bind(p.lnf_g, grads ? &grads->lnf_g : nullptr);
    mv.lnf_b = bind(p.lnf_b, grads ? &grads->lnf_b : nullptr);
    return mv;
}

ModelGraph model_forward(ag::Tape& t, const ModelVars& mv, const ModelConfig& cfg,
                         const std::vector<int>& ids, std::optional<ag::Var> soft_prompt,
                         const ForwardOptions& opts) {
    const int T = static_cast<int>(ids.size());
    const int off = soft_prompt.has_value() ? 1 : 0;
    if (T < 1) throw DataError("empty token sequence");
    if (T + off > cfg.max_seq) throw SequenceTooLong(T + off, cfg.max_seq);

    std::vector<int> pos_ids(T);
    for (int i = 0; i < T; ++i) pos_ids[i] = i + off;

    ag::Var x = ag::add(t, ag::embed_rows(t, mv.tok_emb, ids), ag::embed_rows(t, mv.pos_emb, pos_ids));
    if (off) x = ag::concat_rows(t, *soft_prompt, x);

    const int dh = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    ModelGraph g;
    g.offset = off;
    g.attn.resize(cfg.n_layers);

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& L = mv.layers[l];
        ag::Var h = ag::layer_norm(t, x, L.ln1_g, L.ln1_b);
        ag::Var q = ag::add_rowvec(t, ag::matmul(t, h, L.wq), L.bq);
        ag::Var k = ag::add_rowvec(t, ag::matmul(t, h, L.wk), L.bk);
        ag::Var v = ag::add_rowvec(t, ag::matmul(t, h, L.wv), L.bv);
        std::vector<ag::Var> head_ctx;
        for (int hh = 0; hh < cfg.n_heads; ++hh) {
            ag::Var qh = ag::slice_cols(t, q, hh * dh, (hh + 1) * dh);
            ag::Var kh = ag::slice_cols(t, k, hh * dh, (hh + 1) * dh);
            ag::Var vh = ag::slice_cols(t, v, hh * dh, (hh + 1) * dh);
            ag::Var scores = ag::affine(t, ag::matmul_nt(t, qh, kh), scale, 0.0);
            ag::Var probs = ag::softmax_causal(t, scores);
            g.attn[l].push_back(probs);
            head_ctx.push_back(ag::matmul(t, probs, vh));
        }
        ag::Var merged = cfg.n_heads == 1 ? head_ctx[0] : ag::concat_cols(t, head_ctx);
        x = ag::add(t, x, ag::add_rowvec(t, ag::matmul(t, merged, L.wo), L.bo));
        ag::Var h2 = ag::layer_norm(t, x, L.ln2_g, L.ln2_b);
        ag::Var ff = ag::add_rowvec(
            t, ag::matmul(t, ag::gelu(t, ag::add_rowvec(t, ag::matmul(t, h2, L.w1), L.b1)), L.w2),
            L.b2);
        x = ag::add(t, x, ff);
    }
    ag::Var xf = ag::layer_norm(t, x, mv.lnf_g, mv.lnf_b);
    if (opts.last_row_logits) {
        int rows = t.val(xf).rows;
        xf = ag::slice_rows(t, xf, rows - 1, rows);
    }
    g.logits = ag::matmul_nt(t, xf, mv.tok_emb);  // tied output head
    return g;
}

ForwardResult forward(const ModelParams& p, const std::vector<int>& ids, const Tensor* soft_prompt) {
    ag::Tape t;
    ModelVars mv = bind_model(t, p, nullptr);
    std::optional<ag::Var> soft;
    if (soft_prompt) soft = t.const_ref(soft_prompt);
    ModelGraph g = model_forward(t, mv, p.cfg, ids, soft);
    ForwardResult r;
    r.logits = t.val(g.logits);
    r.attn.probs.resize(g.attn.size());
    for (size_t l = 0; l < g.attn.size(); ++l)
        for (ag::Var hv : g.attn[l]) r.attn.probs[l].push_back(t.val(hv));
    return r;
}

namespace {

double row_log_softmax_at(const Tensor& logits, int row, int id) {
    const double* x = logits.row(row);
    double mx = x[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(x[j] - mx);
    return x[id] - (mx + std::log(sum));
}

}  // namespace

std::vector<double> log_probs(const ModelParams& p, const std::vector<int>& ids,
                              const Tensor* soft_prompt) {
    if (ids.size() < 2) throw DataError("log_probs needs at least 2 tokens");
    ForwardResult r = forward(p, ids, soft_prompt);
    int off = soft_prompt ? 1 : 0;
    std::vector<double> lp(ids.size() - 1);
    for (size_t tpos = 0; tpos + 1 < ids.size(); ++tpos)
        lp[tpos] = row_log_softmax_at(r.logits, static_cast<int>(tpos) + off, ids[tpos + 1]);
    return lp;
}

std::vector<std::pair<int, double>> nucleus_filter(const std::vector<double>& probs, double top_p) {
    std::vector<int> order(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });
    std::vector<std::pair<int, double>> kept;
    double cum = 0.0;
    for (int id : order) {
        kept.emplace_back(id, probs[id]);
        cum += probs[id];
        if (cum >= top_p) break;
    }
    double inv = 1.0 / cum;
    for (auto& [id, pr] : kept) pr *= inv;
    return kept;
}

std::vector<int> sample_response(const ModelParams& p, const std::vector<int>& context,
                                 const Tensor* soft_prompt, const SampleParams& sp, const Vocab& vocab) {
    if (context.empty()) throw DataError("sample_response needs a non-empty context");
    const int off = soft_prompt ? 1 : 0;
    Rng rng(sp.seed);
    std::vector<int> ids = context;
    std::vector<int> generated;

    for (int step = 0; step < sp.max_new; ++step) {
        if (static_cast<int>(ids.size()) + off + 1 > p.cfg.max_seq) break;  // window exhausted
        ag::Tape t;
        ModelVars mv = bind_model(t, p, nullptr);
        std::optional<ag::Var> soft;
        if (soft_prompt) soft = t.const_ref(soft_prompt);
        ForwardOptions opts;
        opts.last_row_logits = true;
        ModelGraph g = model_forward(t, mv, p.cfg, ids, soft, opts);
        const Tensor& logits = t.val(g.logits);  // 1 x V

        int next;
        if (sp.temperature < 1e-6) {
            next = 0;
            for (int j = 1; j < logits.cols; ++j)
                if (logits.v[j] > logits.v[next]) next = j;
        } else {
            double mx = logits.v[0];
            for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits.v[j]);
            std::vector<double> probs(logits.cols);
            double sum = 0.0;
            for (int j = 0; j < logits.cols; ++j) {
                probs[j] = std::exp((logits.v[j] - mx) / sp.temperature);
                sum += probs[j];
            }
            for (double& x : probs) x /= sum;
            auto kept = nucleus_filter(probs, sp.top_p);
            double u = rng.uniform01();
            double cum = 0.0;
            next = kept.back().first;
            for (const auto& [id, pr] : kept) {
                cum += pr;
                if (u < cum) {
                    next = id;
                    break;
                }
            }
        }
        ids.push_back(next);
        generated.push_back(next);
        if (next == vocab.im_end_id()) break;
    }
    return generated;
}

}  // namespace gcsd
