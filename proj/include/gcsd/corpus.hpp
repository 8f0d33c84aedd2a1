#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcsd/vocab.hpp"

namespace gcsd {

struct SpeakerRole {
    // human_index 0 means Assistant, >= 1 means Human_i
    int human_index = 0;

    static SpeakerRole assistant() { return {0}; }
    static SpeakerRole human(int i) { return {i}; }
    bool is_assistant() const { return human_index == 0; }
    bool is_human() const { return human_index >= 1; }
    std::string token() const {
        return is_assistant() ? "[Assistant]" : "[Human_" + std::to_string(human_index) + "]";
    }
    bool operator==(const SpeakerRole&) const = default;
};

struct Utterance {
    SpeakerRole speaker;
    std::string text;  // cleaned, <= 1000 codepoints
    int turn = 0;      // 1-based
    bool operator==(const Utterance&) const = default;
};

enum class Origin { Real, Simulated };

struct Session {
    std::string id;
    std::vector<Utterance> utterances;
    Origin origin = Origin::Real;

    int distinct_humans() const;
    bool operator==(const Session&) const = default;
};

struct StatsReport {
    int64_t data_count = 0;
    int64_t total_tokens = 0;
    int64_t assistant_count = 0;
    int64_t assistant_tokens = 0;
    int64_t human_count = 0;
    int64_t distinct_human_speakers = 0;
    double total_avg_length = 0.0;
    double assistant_avg_length = 0.0;
    double human_avg_length = 0.0;
};

// Cleaning rules, applied in order: delete [S] and [UNK] markers (to a
// fixpoint, so overlapping fragments cannot reassemble a marker), collapse
// each run of >= 2 punctuation codepoints to its final symbol, truncate to
// 1000 codepoints. Total and idempotent.
std::string clean_utterance(const std::string& raw);

// Cleans every turn, drops empties, renumbers turns from 1 and human
// indices to contiguous 1..K in first-appearance order. Structural tokens
// appearing inside raw text are stripped first; they are reserved for
// serialization.
Session build_session(const std::vector<std::pair<SpeakerRole, std::string>>& raw_turns,
                      const std::string& id, Origin origin);

// <|im_start|> once, then "[Speaker] text<|im_end|>" per utterance.
std::string serialize_session(const Session& s);

// Inverse of serialize_session (id and origin are not on the wire).
Session parse_serialized(const std::string& text, const std::string& id, Origin origin);

// PGSS record: JSON array of {turn, speaker, dialogue} objects with
// speaker strings Therapist/Assistant or Patient_i/Human_i.
Session parse_session_record(const std::string& json_array_text, const std::string& id, Origin origin);

StatsReport corpus_stats(const std::vector<Session>& corpus, const Vocab& vocab);

// Deterministic seeded split at session granularity. |test| is
// round(test_fraction * n) clamped to [1, n-1].
std::pair<std::vector<Session>, std::vector<Session>> split_corpus(const std::vector<Session>& corpus,
                                                                   double test_fraction, uint64_t seed);

// JSONL persistence, one session per line.
std::string session_to_jsonl_line(const Session& s);
Session session_from_jsonl_line(const std::string& line);
void save_corpus(const std::vector<Session>& corpus, const std::string& path);
std::vector<Session> load_corpus(const std::string& path);

// All utterance texts in the corpus (vocabulary building).
std::vector<std::string> corpus_texts(const std::vector<Session>& corpus);

}  // namespace gcsd
