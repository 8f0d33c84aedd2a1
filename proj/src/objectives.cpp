#include "gcsd/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "gcsd/errors.hpp"
#include "gcsd/unicode.hpp"

namespace gcsd {

void SFTLossWeights::validate() const {
    if (gamma1 < 0 || gamma2 < 0 || gamma3 < 0) throw ConfigError("loss weights must be >= 0");
    if (gamma1 == 0 && gamma2 == 0 && gamma3 == 0) throw ConfigError("loss weights are all zero");
}

std::vector<double> KeywordTargets::lambda() const {
    std::vector<double> l(eta.size());
    for (size_t j = 0; j < eta.size(); ++j) l[j] = std::exp(kappa * eta[j]);
    return l;
}

KeywordTargets make_keyword_targets(const std::vector<int>& positions, int seq_len, double kappa) {
    KeywordTargets kt;
    kt.positions = positions;
    kt.kappa = kappa;
    kt.eta.assign(seq_len, 0.0);
    if (!positions.empty()) {
        double w = 1.0 / static_cast<double>(positions.size());
        for (int p : positions) {
            if (p < 0 || p >= seq_len) throw DimensionMismatch("keyword position out of sequence");
            kt.eta[p] = w;
        }
    }
    return kt;
}

ag::Var generation_loss(ag::Tape& t, ag::Var logits, const std::vector<int>& targets,
                        const std::vector<uint8_t>& mask) {
    return ag::cross_entropy_masked(t, logits, targets, mask);
}

std::vector<int> extract_keywords(const std::vector<int>& response_ids,
                                  const std::vector<int64_t>& corpus_freq, double k_fraction,
                                  const std::vector<uint8_t>& stop_mask) {
    if (response_ids.empty()) throw DataError("extract_keywords on empty response");
    std::vector<int> cand;
    for (int i = 0; i < static_cast<int>(response_ids.size()); ++i) {
        int id = response_ids[i];
        bool stopped = id < static_cast<int>(stop_mask.size()) && stop_mask[id];
        if (!stopped) cand.push_back(i);
    }
    if (cand.empty()) return {0};
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) {
        int64_t fa = corpus_freq[response_ids[a]];
        int64_t fb = corpus_freq[response_ids[b]];
        if (fa != fb) return fa < fb;  // rarest first
        return a < b;                  // earliest position on ties
    });
    size_t k = std::max<size_t>(
        1, static_cast<size_t>(std::ceil(k_fraction * static_cast<double>(response_ids.size()))));
    k = std::min(k, cand.size());
    std::vector<int> out(cand.begin(), cand.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int64_t> token_frequencies(const std::vector<std::vector<int>>& token_seqs, int vocab_size) {
    std::vector<int64_t> freq(vocab_size, 0);
    for (const auto& seq : token_seqs)
        for (int id : seq)
            if (id >= 0 && id < vocab_size) ++freq[id];
    return freq;
}

std::vector<uint8_t> build_stop_mask(const Vocab& vocab) {
    std::vector<uint8_t> stop(vocab.size(), 0);
    for (int id = 0; id < vocab.size(); ++id) {
        if (vocab.is_special(id)) {
            stop[id] = 1;
            continue;
        }
        auto cps = uni::codepoints(vocab.symbol_of(id));
        if (cps.size() == 1 && (uni::is_punct(cps[0]) || uni::is_whitespace(cps[0]))) stop[id] = 1;
    }
    return stop;
}

ag::Var csfal(ag::Tape& t, const std::vector<ag::Var>& final_layer_heads,
              const std::vector<int>& query_rows, int key_col_offset, const KeywordTargets& targets) {
    if (final_layer_heads.empty()) throw DimensionMismatch("csfal needs attention heads");
    ag::Var mean_heads =
        final_layer_heads.size() == 1 ? final_layer_heads[0] : ag::mean_vars(t, final_layer_heads);
    ag::Var a = ag::mean_rows_subset(t, mean_heads, query_rows);
    int m = static_cast<int>(targets.eta.size());
    if (key_col_offset > 0 || t.val(a).cols != m)
        a = ag::slice_cols(t, a, key_col_offset, key_col_offset + m);
    return ag::weighted_sq_err(t, a, targets.eta, targets.lambda());
}

ag::Var sft_loss(ag::Tape& t, ag::Var l_gen, ag::Var l_csfal, ag::Var l_smooth,
                 const SFTLossWeights& w) {
    w.validate();
    for (ag::Var v : {l_gen, l_csfal, l_smooth})
        if (!std::isfinite(t.val(v).v[0])) throw NonFinite("sft loss component");
    return ag::weighted_sum(t, {l_gen, l_csfal, l_smooth}, {w.gamma1, w.gamma2, w.gamma3});
}

}  // namespace gcsd
