#include "gcsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "gcsd/errors.hpp"

namespace gcsd {

using json = nlohmann::json;

double rouge_l(const std::vector<int>& hyp, const std::vector<int>& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;
    size_t m = hyp.size(), n = ref.size();
    std::vector<size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (size_t i = 1; i <= m; ++i) {
        for (size_t j = 1; j <= n; ++j) {
            cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[n]);
    double p = lcs / static_cast<double>(m);
    double r = lcs / static_cast<double>(n);
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

namespace {

std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& toks, int k) {
    std::map<std::vector<int>, int> counts;
    if (static_cast<int>(toks.size()) < k) return counts;
    for (size_t i = 0; i + k <= toks.size(); ++i)
        ++counts[std::vector<int>(toks.begin() + i, toks.begin() + i + k)];
    return counts;
}

}  // namespace

double bleu_n(const std::vector<int>& hyp, const std::vector<int>& ref, int n, bool smoothed) {
    if (n < 1 || n > 4) throw ConfigError("bleu order must be 1..4");
    if (hyp.empty() || ref.empty()) return 0.0;
    if (static_cast<int>(hyp.size()) < n) return 0.0;

    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        auto hc = ngram_counts(hyp, k);
        auto rc = ngram_counts(ref, k);
        int64_t total = static_cast<int64_t>(hyp.size()) - k + 1;
        int64_t match = 0;
        for (const auto& [g, c] : hc) {
            auto it = rc.find(g);
            if (it != rc.end()) match += std::min(c, it->second);
        }
        double p;
        if (match > 0) {
            p = static_cast<double>(match) / static_cast<double>(total);
        } else if (smoothed) {
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            return 0.0;
        }
        log_sum += std::log(p);
    }
    double bp = hyp.size() >= ref.size()
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
    return bp * std::exp(log_sum / n);
}

double distinct_n(const std::vector<std::vector<int>>& texts, int n) {
    if (n < 1) throw ConfigError("distinct order must be >= 1");
    std::map<std::vector<int>, int> seen;
    int64_t total = 0;
    for (const auto& toks : texts) {
        if (static_cast<int>(toks.size()) < n) continue;
        for (size_t i = 0; i + n <= toks.size(); ++i) {
            ++seen[std::vector<int>(toks.begin() + i, toks.begin() + i + n)];
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(seen.size()) / static_cast<double>(total);
}

namespace {

double clamped_cosine(const double* a, const double* b, int d) {
    double dot = 0, na = 0, nb = 0;
    for (int j = 0; j < d; ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, 0.0, 1.0);
}

double greedy_match_mean(const std::vector<int>& from, const std::vector<int>& to, const Tensor& emb) {
    double sum = 0.0;
    for (int a : from) {
        double best = 0.0;
        for (int b : to) best = std::max(best, clamped_cosine(emb.row(a), emb.row(b), emb.cols));
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

}  // namespace

double semantic_similarity(const std::vector<int>& hyp, const std::vector<int>& ref,
                           const Tensor& embeddings) {
    if (hyp.empty() || ref.empty()) return 0.0;
    double p = greedy_match_mean(hyp, ref, embeddings);
    double r = greedy_match_mean(ref, hyp, embeddings);
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::string metric_report_to_json(const MetricReport& r) {
    json j;
    j["rouge_l"] = r.rouge_l;
    j["bleu2"] = r.bleu2;
    j["bleu4"] = r.bleu4;
    j["semantic"] = r.semantic;
    j["distinct2"] = r.distinct2;
    j["n_examples"] = r.n_examples;
    return j.dump();
}

std::vector<int> strip_special_tokens(const std::vector<int>& ids, const Vocab& vocab) {
    std::vector<int> out;
    for (int id : ids)
        if (!vocab.is_special(id)) out.push_back(id);
    return out;
}

std::vector<EvalExample> build_eval_examples(const std::vector<Session>& corpus, const Vocab& vocab,
                                             int max_context_tokens) {
    std::vector<EvalExample> out;
    for (const auto& s : corpus) {
        for (size_t i = 0; i < s.utterances.size(); ++i) {
            if (!s.utterances[i].speaker.is_assistant()) continue;
            EvalExample ex;
            ex.session_id = s.id;
            ex.turn = s.utterances[i].turn;
            Session prefix;
            prefix.id = s.id;
            prefix.origin = s.origin;
            prefix.utterances.assign(s.utterances.begin(), s.utterances.begin() + i);
            std::string ctx = prefix.utterances.empty() ? "<|im_start|>" : serialize_session(prefix);
            ex.context_ids = vocab.encode(ctx);
            if (static_cast<int>(ex.context_ids.size()) > max_context_tokens)
                ex.context_ids.erase(ex.context_ids.begin(),
                                     ex.context_ids.end() - max_context_tokens);
            ex.reference_ids = strip_special_tokens(vocab.encode(s.utterances[i].text), vocab);
            ex.addressee = 1;
            for (size_t j = i; j-- > 0;) {
                if (s.utterances[j].speaker.is_human()) {
                    ex.addressee = s.utterances[j].speaker.human_index;
                    break;
                }
            }
            if (!ex.reference_ids.empty()) out.push_back(std::move(ex));
        }
    }
    return out;
}

MetricReport evaluate_with_generator(const std::vector<EvalExample>& examples, const Vocab& vocab,
                                     const Tensor& embeddings, const ResponseGenerator& generate,
                                     std::vector<std::string>* details_jsonl) {
    MetricReport rep;
    std::vector<std::vector<int>> pooled;
    for (const auto& ex : examples) {
        std::vector<int> hyp = strip_special_tokens(generate(ex), vocab);
        double rl = rouge_l(hyp, ex.reference_ids);
        double b2 = bleu_n(hyp, ex.reference_ids, 2, false);
        double b4 = bleu_n(hyp, ex.reference_ids, 4, false);
        double sem = semantic_similarity(hyp, ex.reference_ids, embeddings);
        rep.rouge_l += rl;
        rep.bleu2 += b2;
        rep.bleu4 += b4;
        rep.semantic += sem;
        rep.n_examples += 1;
        pooled.push_back(hyp);
        if (details_jsonl) {
            json j;
            j["session"] = ex.session_id;
            j["turn"] = ex.turn;
            j["hyp"] = vocab.decode(hyp);
            j["ref"] = vocab.decode(ex.reference_ids);
            j["rouge_l"] = rl;
            j["bleu2"] = b2;
            j["bleu4"] = b4;
            j["semantic"] = sem;
            details_jsonl->push_back(j.dump());
        }
    }
    if (rep.n_examples > 0) {
        rep.rouge_l /= rep.n_examples;
        rep.bleu2 /= rep.n_examples;
        rep.bleu4 /= rep.n_examples;
        rep.semantic /= rep.n_examples;
    }
    rep.distinct2 = distinct_n(pooled, 2);
    return rep;
}

}  // namespace gcsd
