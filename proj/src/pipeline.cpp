#include "gcsd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/rng.hpp"

namespace gcsd {

using json = nlohmann::json;

void TrainConfig::validate() const {
    if (sft.schedule.warmup_fraction <= 0.0 || sft.schedule.warmup_fraction >= 1.0)
        throw ConfigError("warmup_fraction must be in (0,1)");
    if (sft.schedule.peak_lr <= 0.0 || sft.schedule.floor_lr <= 0.0)
        throw ConfigError("learning rates must be > 0");
    if (sft.grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
    if (sft.k_fraction <= 0.0 || sft.k_fraction > 1.0) throw ConfigError("k_fraction in (0,1]");
    sft.gammas.validate();
    mrpo.validate();
    rewards.validate();
    if (dpsm.max_humans < 1) throw ConfigError("max_humans must be >= 1");
}

uint64_t TrainConfig::hash() const {
    std::string canon = train_config_to_json(*this);
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

}  // namespace

TrainConfig train_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
    TrainConfig c;
    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.d_model = get_or(m, "d_model", c.model.d_model);
        c.model.n_layers = get_or(m, "n_layers", c.model.n_layers);
        c.model.n_heads = get_or(m, "n_heads", c.model.n_heads);
        c.model.d_ff = get_or(m, "d_ff", c.model.d_ff);
        c.model.max_seq = get_or(m, "max_seq", c.model.max_seq);
        c.model.init_seed = get_or(m, "init_seed", c.model.init_seed);
    }
    if (j.contains("dpsm")) {
        const auto& d = j["dpsm"];
        c.dpsm.h1 = get_or(d, "h1", c.dpsm.h1);
        c.dpsm.h2 = get_or(d, "h2", c.dpsm.h2);
        c.dpsm.max_humans = get_or(d, "max_humans", c.dpsm.max_humans);
        c.dpsm.init_seed = get_or(d, "init_seed", c.dpsm.init_seed);
        c.dpsm.default_cognitive_score =
            get_or(d, "default_cognitive_score", c.dpsm.default_cognitive_score);
    }
    if (j.contains("sft")) {
        const auto& s = j["sft"];
        c.sft.gammas.gamma1 = get_or(s, "gamma1", c.sft.gammas.gamma1);
        c.sft.gammas.gamma2 = get_or(s, "gamma2", c.sft.gammas.gamma2);
        c.sft.gammas.gamma3 = get_or(s, "gamma3", c.sft.gammas.gamma3);
        c.sft.epochs_sim = get_or(s, "epochs_sim", c.sft.epochs_sim);
        c.sft.epochs_real = get_or(s, "epochs_real", c.sft.epochs_real);
        c.sft.grad_accum = get_or(s, "grad_accum", c.sft.grad_accum);
        c.sft.schedule.peak_lr = get_or(s, "peak_lr", c.sft.schedule.peak_lr);
        c.sft.schedule.floor_lr = get_or(s, "floor_lr", c.sft.schedule.floor_lr);
        c.sft.schedule.warmup_fraction = get_or(s, "warmup_fraction", c.sft.schedule.warmup_fraction);
        c.sft.weight_decay = get_or(s, "weight_decay", c.sft.weight_decay);
        c.sft.grad_clip = get_or(s, "grad_clip", c.sft.grad_clip);
        c.sft.kappa = get_or(s, "kappa", c.sft.kappa);
        c.sft.k_fraction = get_or(s, "k_fraction", c.sft.k_fraction);
    }
    if (j.contains("mrpo")) {
        const auto& m = j["mrpo"];
        c.mrpo.group_size = get_or(m, "group_size", c.mrpo.group_size);
        c.mrpo.beta = get_or(m, "beta", c.mrpo.beta);
        c.mrpo.learning_rate = get_or(m, "learning_rate", c.mrpo.learning_rate);
        c.mrpo.steps = get_or(m, "steps", c.mrpo.steps);
        c.mrpo.max_new = get_or(m, "max_new", c.mrpo.max_new);
        c.mrpo.temperature = get_or(m, "temperature", c.mrpo.temperature);
        c.mrpo.top_p = get_or(m, "top_p", c.mrpo.top_p);
        c.mrpo.grad_clip = get_or(m, "grad_clip", c.mrpo.grad_clip);
        c.mrpo.seed = get_or(m, "seed", c.mrpo.seed);
    }
    if (j.contains("rewards")) {
        const auto& r = j["rewards"];
        c.rewards.bleu4 = get_or(r, "bleu4", c.rewards.bleu4);
        c.rewards.semantic = get_or(r, "semantic", c.rewards.semantic);
        c.rewards.distinct2 = get_or(r, "distinct2", c.rewards.distinct2);
        c.rewards.structure = get_or(r, "structure", c.rewards.structure);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        c.eval.temperature = get_or(e, "temperature", c.eval.temperature);
        c.eval.top_p = get_or(e, "top_p", c.eval.top_p);
        c.eval.max_new = get_or(e, "max_new", c.eval.max_new);
        c.eval.seed = get_or(e, "seed", c.eval.seed);
    }
    c.seed = get_or(j, "seed", c.seed);
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        c.paths.sim_corpus = get_or<std::string>(p, "sim_corpus", c.paths.sim_corpus);
        c.paths.real_corpus = get_or<std::string>(p, "real_corpus", c.paths.real_corpus);
        c.paths.test_corpus = get_or<std::string>(p, "test_corpus", c.paths.test_corpus);
        c.paths.checkpoint_dir = get_or<std::string>(p, "checkpoint_dir", c.paths.checkpoint_dir);
        c.paths.loss_log = get_or<std::string>(p, "loss_log", c.paths.loss_log);
        c.paths.trace_log = get_or<std::string>(p, "trace_log", c.paths.trace_log);
    }
    if (j.contains("pgss")) {
        const auto& g = j["pgss"];
        ScenarioConfig sc = default_scenario_config();
        sc.n_patients = get_or(g, "n_patients", sc.n_patients);
        sc.min_turns = get_or(g, "min_turns", sc.min_turns);
        sc.seed = get_or(g, "seed", sc.seed);
        if (g.contains("activity_categories"))
            sc.activity_categories = g["activity_categories"].get<std::vector<std::string>>();
        c.scenario = std::move(sc);
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return train_config_from_json(text);
}

std::string train_config_to_json(const TrainConfig& c) {
    json j;
    j["model"] = {{"d_model", c.model.d_model}, {"n_layers", c.model.n_layers},
                  {"n_heads", c.model.n_heads}, {"d_ff", c.model.d_ff},
                  {"max_seq", c.model.max_seq}, {"init_seed", c.model.init_seed}};
    j["dpsm"] = {{"h1", c.dpsm.h1},
                 {"h2", c.dpsm.h2},
                 {"max_humans", c.dpsm.max_humans},
                 {"init_seed", c.dpsm.init_seed},
                 {"default_cognitive_score", c.dpsm.default_cognitive_score}};
    j["sft"] = {{"gamma1", c.sft.gammas.gamma1},
                {"gamma2", c.sft.gammas.gamma2},
                {"gamma3", c.sft.gammas.gamma3},
                {"epochs_sim", c.sft.epochs_sim},
                {"epochs_real", c.sft.epochs_real},
                {"grad_accum", c.sft.grad_accum},
                {"peak_lr", c.sft.schedule.peak_lr},
                {"floor_lr", c.sft.schedule.floor_lr},
                {"warmup_fraction", c.sft.schedule.warmup_fraction},
                {"weight_decay", c.sft.weight_decay},
                {"grad_clip", c.sft.grad_clip},
                {"kappa", c.sft.kappa},
                {"k_fraction", c.sft.k_fraction}};
    j["mrpo"] = {{"group_size", c.mrpo.group_size}, {"beta", c.mrpo.beta},
                 {"learning_rate", c.mrpo.learning_rate}, {"steps", c.mrpo.steps},
                 {"max_new", c.mrpo.max_new}, {"temperature", c.mrpo.temperature},
                 {"top_p", c.mrpo.top_p}, {"grad_clip", c.mrpo.grad_clip},
                 {"seed", c.mrpo.seed}};
    j["rewards"] = {{"bleu4", c.rewards.bleu4},
                    {"semantic", c.rewards.semantic},
                    {"distinct2", c.rewards.distinct2},
                    {"structure", c.rewards.structure}};
    j["eval"] = {{"temperature", c.eval.temperature},
                 {"top_p", c.eval.top_p},
                 {"max_new", c.eval.max_new},
                 {"seed", c.eval.seed}};
    j["seed"] = c.seed;
    j["paths"] = {{"sim_corpus", c.paths.sim_corpus},   {"real_corpus", c.paths.real_corpus},
                  {"test_corpus", c.paths.test_corpus}, {"checkpoint_dir", c.paths.checkpoint_dir},
                  {"loss_log", c.paths.loss_log},       {"trace_log", c.paths.trace_log}};
    return j.dump();
}

std::string loss_row_to_json(const StepLossRow& r) {
    json j;
    j["step"] = r.step;
    j["l_gen"] = r.l_gen;
    j["l_csfal"] = r.l_csfal;
    j["l_smooth"] = r.l_smooth;
    j["l_total"] = r.l_total;
    return j.dump();
}

// ---------------------------------------------------------------------------
// SFT data preparation.
// ---------------------------------------------------------------------------

namespace {

std::string serialized_prefix(const Session& s, size_t end_index) {
    if (end_index == 0) return "<|im_start|>";
    Session prefix;
    prefix.id = s.id;
    prefix.origin = s.origin;
    prefix.utterances.assign(s.utterances.begin(), s.utterances.begin() + end_index);
    return serialize_session(prefix);
}

int addressee_before(const Session& s, size_t idx) {
    for (size_t j = idx; j-- > 0;)
        if (s.utterances[j].speaker.is_human()) return s.utterances[j].speaker.human_index;
    return 1;
}

}  // namespace

std::vector<SftExample> build_sft_examples(const std::vector<Session>& corpus, const Vocab& vocab,
                                           const SftConfig& cfg) {
    // corpus frequency table for the keyword extractor
    std::vector<std::vector<int>> seqs;
    for (const auto& s : corpus)
        for (const auto& u : s.utterances) seqs.push_back(vocab.encode(u.text));
    std::vector<int64_t> freq = token_frequencies(seqs, vocab.size());
    std::vector<uint8_t> stop = build_stop_mask(vocab);

    std::vector<SftExample> out;
    for (size_t si = 0; si < corpus.size(); ++si) {
        const Session& s = corpus[si];
        for (size_t ui = 0; ui < s.utterances.size(); ++ui) {
            const Utterance& u = s.utterances[ui];
            if (!u.speaker.is_assistant()) continue;
            SftExample ex;
            ex.session_index = static_cast<int>(si);
            ex.utterance_index = static_cast<int>(ui);
            ex.context_ids = vocab.encode(serialized_prefix(s, ui));
            ex.response_ids = vocab.encode("[Assistant] " + u.text + "<|im_end|>");
            ex.addressee = addressee_before(s, ui);
            ex.context_turn = ui == 0 ? 0 : s.utterances[ui - 1].turn;
            ex.keyword_positions =
                extract_keywords(ex.response_ids, freq, cfg.k_fraction, stop);
            out.push_back(std::move(ex));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SFT phase.
// ---------------------------------------------------------------------------

namespace {

// State of one training example's dynamic conditioning.
struct PreparedExample {
    std::vector<int> ids;  // context ++ response
    std::vector<int> targets;
    std::vector<uint8_t> mask;
    std::vector<int> csfal_query_rows;
    KeywordTargets keyword_targets;
    Tensor features;  // soft prompt net input
};

// Assembles the tensors for one (context, response) pair; rows are laid out
// for a forward pass with the soft prompt at row 0.
std::optional<PreparedExample> prepare_example(const SftExample& ex, const Session& session,
                                               const ModelParams& params, const Vocab& vocab,
                                               const TrainConfig& cfg) {
    std::vector<int> ctx = ex.context_ids;
    const int R = static_cast<int>(ex.response_ids.size());
    const int max_ctx = params.cfg.max_seq - 1 - R;  // soft prompt occupies one slot
    if (max_ctx < 1) return std::nullopt;            // response alone overflows the window
    if (static_cast<int>(ctx.size()) > max_ctx)
        ctx.erase(ctx.begin(), ctx.end() - max_ctx);
    const int C = static_cast<int>(ctx.size());
    const int T = C + R;

    PreparedExample p;
    p.ids = std::move(ctx);
    p.ids.insert(p.ids.end(), ex.response_ids.begin(), ex.response_ids.end());

    // with the prompt at row 0, row j (j in 0..T-1) predicts ids[j]
    p.targets.assign(T + 1, 0);
    p.mask.assign(T + 1, 0);
    for (int pos = C; pos < T; ++pos) {
        p.targets[pos] = p.ids[pos];
        p.mask[pos] = 1;
    }
    // response tokens sit at rows C+1..T; those rows are the Eq. 7 queries
    for (int row = C + 1; row <= T; ++row) p.csfal_query_rows.push_back(row);

    std::vector<int> global_kw;
    for (int kp : ex.keyword_positions) global_kw.push_back(C + kp);
    p.keyword_targets = make_keyword_targets(global_kw, T, cfg.sft.kappa);

    ParticipantState st;
    st.speaker_index = std::min(ex.addressee, cfg.dpsm.max_humans);
    st.cognitive_score = cfg.dpsm.default_cognitive_score;
    st = update_state(std::move(st), session, ex.context_turn, params.tok_emb, vocab);
    p.features = featurize(st, cfg.dpsm.max_humans, params.cfg.d_model);
    return p;
}

}  // namespace

SftPhaseResult sft_phase(const std::vector<Session>& corpus, const Vocab& vocab, ModelParams& params,
                         SoftPromptNetParams& net, const TrainConfig& cfg, int epochs,
                         uint64_t stage_seed) {
    if (corpus.empty()) throw DataError("sft_phase on empty corpus");
    if (params.cfg.vocab_size != vocab.size()) throw ConfigError("vocab/model size mismatch");

    std::vector<SftExample> examples = build_sft_examples(corpus, vocab, cfg.sft);
    if (examples.empty()) throw DataError("corpus has no assistant turns");

    // group example indices by session to keep the P_prev chains intact
    std::vector<std::vector<int>> by_session(corpus.size());
    for (int i = 0; i < static_cast<int>(examples.size()); ++i)
        by_session[examples[i].session_index].push_back(i);
    std::vector<int> session_order;
    for (int s = 0; s < static_cast<int>(corpus.size()); ++s)
        if (!by_session[s].empty()) session_order.push_back(s);

    const int accum = cfg.sft.grad_accum;
    const int64_t total_micro = static_cast<int64_t>(examples.size()) * epochs;
    const int64_t total_steps = (total_micro + accum - 1) / accum;

    ModelParams model_grads = zeros_like(params);
    SoftPromptNetParams net_grads = zeros_like(net);
    std::vector<ParamRef> prefs = param_refs(params);
    std::vector<ParamRef> grefs = param_refs(model_grads);
    for (const auto& r : param_refs(net)) prefs.push_back(r);
    for (const auto& r : param_refs(net_grads)) grefs.push_back(r);

    AdamWConfig ocfg;
    ocfg.weight_decay = cfg.sft.weight_decay;
    AdamW opt(ocfg);

    SftPhaseResult result;
    zero_grads(grefs);
    int micro_in_batch = 0;
    int64_t step_index = 0;
    StepLossRow acc_row;
    const int d_prompt = net.d_prompt();

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<int> order = session_order;
        Rng(derive_seed(stage_seed, 0x5F74, epoch)).shuffle(order);
        for (int sidx : order) {
            const Session& session = corpus[sidx];
            std::map<int, Tensor> p_prev;  // participant -> last prompt
            for (int ei : by_session[sidx]) {
                const SftExample& ex = examples[ei];
                auto prepared = prepare_example(ex, session, params, vocab, cfg);
                if (!prepared) continue;

                ag::Tape t;
                ModelVars mv = bind_model(t, params, &model_grads);
                SoftNetVars nv = bind_softnet(t, net, &net_grads);
                ag::Var x = t.leaf(prepared->features);
                ag::Var p_soft = soft_prompt_forward(t, nv, x);

                Tensor prev = p_prev.count(ex.addressee) ? p_prev[ex.addressee] : Tensor(1, d_prompt);
                ag::Var l_smooth = smoothness_loss(t, p_soft, prev);

                ModelGraph g = model_forward(t, mv, params.cfg, prepared->ids, p_soft);
                ag::Var l_gen = generation_loss(t, g.logits, prepared->targets, prepared->mask);
                ag::Var l_att = csfal(t, g.attn.back(), prepared->csfal_query_rows, g.offset,
                                      prepared->keyword_targets);
                ag::Var total = sft_loss(t, l_gen, l_att, l_smooth, cfg.sft.gammas);

                double lv = t.val(total).v[0];
                if (!std::isfinite(lv)) throw NonFinite("sft loss");
                acc_row.l_gen += t.val(l_gen).v[0];
                acc_row.l_csfal += t.val(l_att).v[0];
                acc_row.l_smooth += t.val(l_smooth).v[0];
                acc_row.l_total += lv;

                t.backward(total);
                p_prev[ex.addressee] = t.val(p_soft);
                ++micro_in_batch;

                if (micro_in_batch == accum) {
                    scale_grads(grefs, 1.0 / micro_in_batch);
                    clip_grad_norm(grefs, cfg.sft.grad_clip);
                    opt.step(prefs, grefs, lr_at(step_index, total_steps, cfg.sft.schedule));
                    zero_grads(grefs);
                    acc_row.step = step_index;
                    acc_row.l_gen /= micro_in_batch;
                    acc_row.l_csfal /= micro_in_batch;
                    acc_row.l_smooth /= micro_in_batch;
                    acc_row.l_total /= micro_in_batch;
                    result.losses.push_back(acc_row);
                    acc_row = StepLossRow{};
                    micro_in_batch = 0;
                    ++step_index;
                }
            }
        }
    }
    if (micro_in_batch > 0) {  // flush the final partial batch
        scale_grads(grefs, 1.0 / micro_in_batch);
        clip_grad_norm(grefs, cfg.sft.grad_clip);
        opt.step(prefs, grefs, lr_at(step_index, total_steps, cfg.sft.schedule));
        zero_grads(grefs);
        acc_row.step = step_index;
        acc_row.l_gen /= micro_in_batch;
        acc_row.l_csfal /= micro_in_batch;
        acc_row.l_smooth /= micro_in_batch;
        acc_row.l_total /= micro_in_batch;
        result.losses.push_back(acc_row);
        ++step_index;
    }
    result.steps = step_index;
    return result;
}

// ---------------------------------------------------------------------------
// Two-stage training.
// ---------------------------------------------------------------------------

TwoStageResult train_two_stage(const std::vector<Session>& sim, const std::vector<Session>& real,
                               const TrainConfig& cfg, bool skip_sim) {
    cfg.validate();
    if (real.empty()) throw DataError("real corpus is empty");
    if (!skip_sim && sim.empty()) throw DataError("simulated corpus is empty");

    std::vector<std::string> texts = corpus_texts(sim);
    for (auto& t : corpus_texts(real)) texts.push_back(std::move(t));
    Vocab vocab = Vocab::build(texts, cfg.dpsm.max_humans);

    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    ModelParams params = init_model(mc);
    int d_in = cfg.dpsm.max_humans + 2 + mc.d_model;
    SoftPromptNetParams net =
        init_softprompt_net(d_in, cfg.dpsm.h1, cfg.dpsm.h2, mc.d_model, cfg.dpsm.init_seed);

    TwoStageResult out;
    std::string lineage;
    if (!skip_sim) {
        SftPhaseResult r = sft_phase(sim, vocab, params, net, cfg, cfg.sft.epochs_sim,
                                     derive_seed(cfg.seed, 1, 0));
        out.sim_steps = r.steps;
        lineage = stage_name(TrainStage::SimSFT);
    }
    SftPhaseResult r = sft_phase(real, vocab, params, net, cfg, cfg.sft.epochs_real,
                                 derive_seed(cfg.seed, 2, 0));
    out.real_steps = r.steps;
    lineage += lineage.empty() ? stage_name(TrainStage::RealSFT)
                               : "," + stage_name(TrainStage::RealSFT);

    out.checkpoint.model = std::move(params);
    out.checkpoint.softnet = std::move(net);
    out.checkpoint.vocab = std::move(vocab);
    out.checkpoint.meta.stage = TrainStage::RealSFT;
    out.checkpoint.meta.step = out.sim_steps + out.real_steps;
    out.checkpoint.meta.config_hash = cfg.hash();
    out.checkpoint.meta.lineage = lineage;
    return out;
}

// ---------------------------------------------------------------------------
// Soft prompt traces and MRPO prompt extraction.
// ---------------------------------------------------------------------------

double mean_soft_prompt_gap(const std::vector<Session>& corpus, const ModelParams& params,
                            const SoftPromptNetParams& net, const DpsmConfig& dcfg,
                            const Vocab& vocab, std::vector<SoftPromptTraceEntry>* trace) {
    double sum = 0.0;
    int64_t count = 0;
    const int d_prompt = net.d_prompt();
    for (const auto& s : corpus) {
        std::map<int, Tensor> p_prev;
        for (size_t ui = 0; ui < s.utterances.size(); ++ui) {
            if (!s.utterances[ui].speaker.is_assistant()) continue;
            int addressee = std::min(addressee_before(s, ui), dcfg.max_humans);
            ParticipantState st;
            st.speaker_index = addressee;
            st.cognitive_score = dcfg.default_cognitive_score;
            int context_turn = ui == 0 ? 0 : s.utterances[ui - 1].turn;
            st = update_state(std::move(st), s, context_turn, params.tok_emb, vocab);
            Tensor x = featurize(st, dcfg.max_humans, params.cfg.d_model);
            Tensor p = soft_prompt_forward(net, x);
            Tensor prev = p_prev.count(addressee) ? p_prev[addressee] : Tensor(1, d_prompt);
            sum += smoothness_loss(p, prev);
            ++count;
            if (trace)
                trace->push_back(SoftPromptTraceEntry{s.id, addressee, s.utterances[ui].turn,
                                                      std::vector<double>(p.v.begin(), p.v.end())});
            p_prev[addressee] = std::move(p);
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

std::vector<MrpoPrompt> build_mrpo_prompts(const std::vector<Session>& corpus, const Vocab& vocab,
                                           const ModelParams& params, const SoftPromptNetParams& net,
                                           const DpsmConfig& dcfg, int max_new) {
    std::vector<MrpoPrompt> prompts;
    for (const auto& s : corpus) {
        for (size_t ui = 0; ui < s.utterances.size(); ++ui) {
            const Utterance& u = s.utterances[ui];
            if (!u.speaker.is_assistant()) continue;
            MrpoPrompt p;
            p.context_ids = vocab.encode(serialized_prefix(s, ui));
            int max_ctx = params.cfg.max_seq - 1 - max_new - 1;
            if (max_ctx < 1) continue;
            if (static_cast<int>(p.context_ids.size()) > max_ctx)
                p.context_ids.erase(p.context_ids.begin(), p.context_ids.end() - max_ctx);
            p.reference_ids = vocab.encode("[Assistant] " + u.text + "<|im_end|>");

            int addressee = std::min(addressee_before(s, ui), dcfg.max_humans);
            ParticipantState st;
            st.speaker_index = addressee;
            st.cognitive_score = dcfg.default_cognitive_score;
            int context_turn = ui == 0 ? 0 : s.utterances[ui - 1].turn;
            st = update_state(std::move(st), s, context_turn, params.tok_emb, vocab);
            p.soft_prompt = soft_prompt_forward(net, featurize(st, dcfg.max_humans, params.cfg.d_model));
            prompts.push_back(std::move(p));
        }
    }
    if (prompts.empty()) throw DataError("no prompts could be extracted");
    return prompts;
}

// ---------------------------------------------------------------------------
// Evaluation and chat.
// ---------------------------------------------------------------------------

MetricReport evaluate_corpus(const Checkpoint& ckpt, const std::vector<Session>& test,
                             const EvalSettings& settings, const DpsmConfig& dcfg,
                             std::vector<std::string>* details_jsonl) {
    if (test.empty()) throw DataError("test corpus is empty");
    const Vocab& vocab = ckpt.vocab;
    int max_ctx = ckpt.model.cfg.max_seq - 2 - settings.max_new;
    if (max_ctx < 1) throw ConfigError("max_new leaves no room for context");
    std::vector<EvalExample> examples = build_eval_examples(test, vocab, max_ctx);

    std::map<std::string, const Session*> by_id;
    for (const auto& s : test) by_id[s.id] = &s;

    int example_index = 0;
    ResponseGenerator generate = [&](const EvalExample& ex) -> std::vector<int> {
        const Session& session = *by_id.at(ex.session_id);
        ParticipantState st;
        st.speaker_index = std::min(ex.addressee, dcfg.max_humans);
        st.cognitive_score = dcfg.default_cognitive_score;
        st = update_state(std::move(st), session, ex.turn - 1, ckpt.model.tok_emb, vocab);
        Tensor p = soft_prompt_forward(ckpt.softnet,
                                       featurize(st, dcfg.max_humans, ckpt.model.cfg.d_model));
        SampleParams sp;
        sp.temperature = settings.temperature;
        sp.top_p = settings.top_p;
        sp.max_new = settings.max_new;
        sp.seed = derive_seed(settings.seed, 0xE7A1, example_index++);
        return sample_response(ckpt.model, ex.context_ids, &p, sp, vocab);
    };
    return evaluate_with_generator(examples, vocab, ckpt.model.tok_emb, generate, details_jsonl);
}

int chat_repl(const Checkpoint& ckpt, const DpsmConfig& dcfg, std::istream& in, std::ostream& out,
              const std::string& transcript_path, const EvalSettings& settings) {
    const Vocab& vocab = ckpt.vocab;
    Session live;
    live.id = "chat";
    live.origin = Origin::Real;
    uint64_t seed = settings.seed;
    int assistant_turns = 0;

    out << "commands: /as <i> <text>, /seed <n>, /quit\n";
    std::string line;
    while (std::getline(in, line)) {
        if (line == "/quit") break;
        if (line.rfind("/seed ", 0) == 0) {
            try {
                seed = std::stoull(line.substr(6));
                out << "seed set to " << seed << "\n";
            } catch (const std::exception&) {
                out << "usage: /seed <n>\n";
            }
            continue;
        }
        if (line.rfind("/as ", 0) != 0) {
            out << "usage: /as <i> <text> | /seed <n> | /quit\n";
            continue;
        }
        std::istringstream iss(line.substr(4));
        int who = 0;
        iss >> who;
        std::string text;
        std::getline(iss, text);
        while (!text.empty() && text.front() == ' ') text.erase(text.begin());
        if (who < 1 || who > dcfg.max_humans || text.empty()) {
            out << "usage: /as <i> <text> with 1 <= i <= " << dcfg.max_humans << "\n";
            continue;
        }
        std::string cleaned = clean_utterance(text);
        if (cleaned.empty()) {
            out << "(utterance empty after cleaning)\n";
            continue;
        }
        live.utterances.push_back(
            Utterance{SpeakerRole::human(who), cleaned, static_cast<int>(live.utterances.size()) + 1});

        ParticipantState st;
        st.speaker_index = who;
        st.cognitive_score = dcfg.default_cognitive_score;
        st = update_state(std::move(st), live, static_cast<int>(live.utterances.size()),
                          ckpt.model.tok_emb, vocab);
        Tensor p = soft_prompt_forward(ckpt.softnet,
                                       featurize(st, dcfg.max_humans, ckpt.model.cfg.d_model));

        std::vector<int> ctx = vocab.encode(serialize_session(live));
        int max_ctx = ckpt.model.cfg.max_seq - 2 - settings.max_new;
        if (static_cast<int>(ctx.size()) > max_ctx)
            ctx.erase(ctx.begin(), ctx.end() - max_ctx);
        SampleParams sp;
        sp.temperature = settings.temperature;
        sp.top_p = settings.top_p;
        sp.max_new = settings.max_new;
        sp.seed = derive_seed(seed, 0xC4A7, assistant_turns++);
        std::vector<int> reply = sample_response(ckpt.model, ctx, &p, sp, vocab);
        std::string reply_text = vocab.decode(strip_special_tokens(reply, vocab));
        out << "[Assistant] " << reply_text << "\n";
        std::string reply_clean = clean_utterance(reply_text);
        live.utterances.push_back(Utterance{SpeakerRole::assistant(),
                                            reply_clean.empty() ? "……" : reply_clean,
                                            static_cast<int>(live.utterances.size()) + 1});
    }
    if (!transcript_path.empty() && !live.utterances.empty()) {
        std::ofstream f(transcript_path, std::ios::binary);
        if (f) f << session_to_jsonl_line(live) << '\n';
    }
    return 0;
}

}  // namespace gcsd

