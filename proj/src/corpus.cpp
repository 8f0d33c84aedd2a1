#include "gcsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/rng.hpp"
#include "gcsd/unicode.hpp"

namespace gcsd {

using json = nlohmann::json;

int Session::distinct_humans() const {
    int mx = 0;
    for (const auto& u : utterances) mx = std::max(mx, u.speaker.human_index);
    return mx;
}

namespace {

std::string delete_all(std::string text, const std::string& marker) {
    // repeat until fixpoint: removals can butt new occurrences together
    for (;;) {
        size_t pos = text.find(marker);
        if (pos == std::string::npos) return text;
        while (pos != std::string::npos) {
            text.erase(pos, marker.size());
            pos = text.find(marker, pos);
        }
    }
}

std::string collapse_punct_runs(const std::string& text) {
    auto cps = uni::codepoints(text);
    std::string out;
    size_t i = 0;
    while (i < cps.size()) {
        if (!uni::is_punct(cps[i])) {
            out += uni::encode(cps[i]);
            ++i;
            continue;
        }
        size_t j = i;
        while (j < cps.size() && uni::is_punct(cps[j])) ++j;
        out += uni::encode(cps[j - 1]);  // final symbol of the run
        i = j;
    }
    return out;
}

const char* kStructuralMarkers[] = {"<|im_start|>", "<|im_end|>", "[Assistant]"};

std::string strip_structural_tokens(std::string text) {
    for (const char* m : kStructuralMarkers) text = delete_all(std::move(text), m);
    // [Human_<digits>]
    size_t from = 0;
    while (from < text.size()) {
        size_t pos = text.find("[Human_", from);
        if (pos == std::string::npos) break;
        size_t end = pos + 7;
        while (end < text.size() && isdigit(static_cast<unsigned char>(text[end]))) ++end;
        if (end < text.size() && text[end] == ']' && end > pos + 7) {
            text.erase(pos, end - pos + 1);
            from = 0;  // rescan; the erase may have joined fragments
        } else {
            from = pos + 1;  // not a full marker; ordinary text
        }
    }
    return text;
}

}  // namespace

std::string clean_utterance(const std::string& raw) {
    std::string text = delete_all(raw, "[S]");
    text = delete_all(std::move(text), "[UNK]");
    text = collapse_punct_runs(text);
    return uni::truncate(text, 1000);
}

Session build_session(const std::vector<std::pair<SpeakerRole, std::string>>& raw_turns,
                      const std::string& id, Origin origin) {
    Session s;
    s.id = id;
    s.origin = origin;
    std::map<int, int> renumber;  // original human index -> contiguous index
    int turn = 0;
    bool has_assistant = false, has_human = false;
    for (const auto& [speaker, raw] : raw_turns) {
        std::string text = clean_utterance(strip_structural_tokens(raw));
        if (text.empty()) continue;
        SpeakerRole role = speaker;
        if (role.is_human()) {
            auto [it, inserted] = renumber.emplace(role.human_index, static_cast<int>(renumber.size()) + 1);
            role.human_index = it->second;
            has_human = true;
        } else {
            has_assistant = true;
        }
        s.utterances.push_back(Utterance{role, std::move(text), ++turn});
    }
    if (s.utterances.empty()) throw AllUtterancesEmpty();
    if (!has_assistant) throw NoAssistant();
    if (!has_human) throw NoHuman();
    return s;
}

std::string serialize_session(const Session& s) {
    std::string out = "<|im_start|>";
    for (const auto& u : s.utterances) {
        out += u.speaker.token();
        out += ' ';
        out += u.text;
        out += "<|im_end|>";
    }
    return out;
}

Session parse_serialized(const std::string& text, const std::string& id, Origin origin) {
    const std::string kStart = "<|im_start|>";
    const std::string kEnd = "<|im_end|>";
    if (text.compare(0, kStart.size(), kStart) != 0) throw SchemaError("missing <|im_start|>");
    size_t pos = kStart.size();
    std::vector<std::pair<SpeakerRole, std::string>> turns;
    while (pos < text.size()) {
        SpeakerRole role;
        if (text.compare(pos, 11, "[Assistant]") == 0) {
            role = SpeakerRole::assistant();
            pos += 11;
        } else if (text.compare(pos, 7, "[Human_") == 0) {
            size_t d = pos + 7;
            int idx = 0;
            while (d < text.size() && isdigit(static_cast<unsigned char>(text[d]))) {
                idx = idx * 10 + (text[d] - '0');
                ++d;
            }
            if (d >= text.size() || text[d] != ']' || idx < 1) throw SchemaError("bad speaker token");
            role = SpeakerRole::human(idx);
            pos = d + 1;
        } else {
            throw SchemaError("expected speaker token at offset " + std::to_string(pos));
        }
        if (pos >= text.size() || text[pos] != ' ') throw SchemaError("missing separator space");
        ++pos;
        size_t end = text.find(kEnd, pos);
        if (end == std::string::npos) throw SchemaError("missing <|im_end|>");
        turns.emplace_back(role, text.substr(pos, end - pos));
        pos = end + kEnd.size();
    }
    if (turns.empty()) throw SchemaError("no utterances");
    Session s;
    s.id = id;
    s.origin = origin;
    int turn = 0;
    for (auto& [role, t] : turns) s.utterances.push_back(Utterance{role, std::move(t), ++turn});
    return s;
}

namespace {

SpeakerRole map_speaker_string(const std::string& sp) {
    if (sp == "Therapist" || sp == "Assistant") return SpeakerRole::assistant();
    for (const char* prefix : {"Patient_", "Human_"}) {
        size_t n = std::string(prefix).size();
        if (sp.compare(0, n, prefix) == 0) {
            int idx = 0;
            size_t i = n;
            for (; i < sp.size(); ++i) {
                if (!isdigit(static_cast<unsigned char>(sp[i]))) break;
                idx = idx * 10 + (sp[i] - '0');
            }
            if (i == sp.size() && idx >= 1) return SpeakerRole::human(idx);
        }
    }
    throw UnknownSpeaker(sp);
}

}  // namespace

Session parse_session_record(const std::string& json_array_text, const std::string& id, Origin origin) {
    json rec = json::parse(json_array_text, nullptr, false);
    if (rec.is_discarded() || !rec.is_array()) throw SchemaError("record is not a JSON array");
    std::vector<std::pair<SpeakerRole, std::string>> turns;
    for (const auto& obj : rec) {
        if (!obj.is_object()) throw SchemaError("entry is not an object");
        if (!obj.contains("turn") || !obj["turn"].is_number_integer())
            throw SchemaError("missing integer field 'turn'");
        if (!obj.contains("speaker") || !obj["speaker"].is_string())
            throw SchemaError("missing string field 'speaker'");
        if (!obj.contains("dialogue") || !obj["dialogue"].is_string())
            throw SchemaError("missing string field 'dialogue'");
        turns.emplace_back(map_speaker_string(obj["speaker"].get<std::string>()),
                           obj["dialogue"].get<std::string>());
    }
    if (turns.empty()) throw SchemaError("empty record");
    return build_session(turns, id, origin);
}

StatsReport corpus_stats(const std::vector<Session>& corpus, const Vocab& vocab) {
    StatsReport r;
    int64_t human_tokens = 0;
    for (const auto& s : corpus) {
        r.distinct_human_speakers = std::max<int64_t>(r.distinct_human_speakers, s.distinct_humans());
        for (const auto& u : s.utterances) {
            int64_t tok = static_cast<int64_t>(vocab.encode(u.text).size());
            r.data_count += 1;
            r.total_tokens += tok;
            if (u.speaker.is_assistant()) {
                r.assistant_count += 1;
                r.assistant_tokens += tok;
            } else {
                r.human_count += 1;
                human_tokens += tok;
            }
        }
    }
    r.total_avg_length = r.data_count ? static_cast<double>(r.total_tokens) / r.data_count : 0.0;
    r.assistant_avg_length =
        r.assistant_count ? static_cast<double>(r.assistant_tokens) / r.assistant_count : 0.0;
    r.human_avg_length = r.human_count ? static_cast<double>(human_tokens) / r.human_count : 0.0;
    return r;
}

std::pair<std::vector<Session>, std::vector<Session>> split_corpus(const std::vector<Session>& corpus,
                                                                   double test_fraction, uint64_t seed) {
    size_t n = corpus.size();
    if (n < 2) throw CorpusTooSmall();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    auto n_test = static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<size_t>(n_test, 1, n - 1);
    std::vector<Session> train, test;
    for (size_t i = 0; i < n; ++i)
        (i < n_test ? test : train).push_back(corpus[order[i]]);
    return {std::move(train), std::move(test)};
}

std::string session_to_jsonl_line(const Session& s) {
    json j;
    j["id"] = s.id;
    j["origin"] = s.origin == Origin::Real ? "real" : "simulated";
    json utts = json::array();
    for (const auto& u : s.utterances) {
        json ju;
        ju["turn"] = u.turn;
        ju["speaker"] =
            u.speaker.is_assistant() ? "assistant" : "human_" + std::to_string(u.speaker.human_index);
        ju["text"] = u.text;
        utts.push_back(std::move(ju));
    }
    j["utterances"] = std::move(utts);
    return j.dump();
}

Session session_from_jsonl_line(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw SchemaError("corpus line is not a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw SchemaError("missing 'id'");
    if (!j.contains("origin") || !j["origin"].is_string()) throw SchemaError("missing 'origin'");
    if (!j.contains("utterances") || !j["utterances"].is_array()) throw SchemaError("missing 'utterances'");
    Session s;
    s.id = j["id"].get<std::string>();
    std::string origin = j["origin"].get<std::string>();
    if (origin == "real")
        s.origin = Origin::Real;
    else if (origin == "simulated")
        s.origin = Origin::Simulated;
    else
        throw SchemaError("origin must be real|simulated");
    for (const auto& ju : j["utterances"]) {
        if (!ju.contains("turn") || !ju["turn"].is_number_integer()) throw SchemaError("utterance 'turn'");
        if (!ju.contains("speaker") || !ju["speaker"].is_string()) throw SchemaError("utterance 'speaker'");
        if (!ju.contains("text") || !ju["text"].is_string()) throw SchemaError("utterance 'text'");
        std::string sp = ju["speaker"].get<std::string>();
        SpeakerRole role;
        if (sp == "assistant") {
            role = SpeakerRole::assistant();
        } else if (sp.compare(0, 6, "human_") == 0) {
            int idx = atoi(sp.c_str() + 6);
            if (idx < 1) throw SchemaError("bad human index");
            role = SpeakerRole::human(idx);
        } else {
            throw UnknownSpeaker(sp);
        }
        s.utterances.push_back(Utterance{role, ju["text"].get<std::string>(), ju["turn"].get<int>()});
    }
    if (s.utterances.empty()) throw SchemaError("empty session");
    return s;
}

void save_corpus(const std::vector<Session>& corpus, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    for (const auto& s : corpus) f << session_to_jsonl_line(s) << '\n';
}

std::vector<Session> load_corpus(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::vector<Session> corpus;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        corpus.push_back(session_from_jsonl_line(line));
    }
    return corpus;
}

std::vector<std::string> corpus_texts(const std::vector<Session>& corpus) {
    std::vector<std::string> texts;
    for (const auto& s : corpus)
        for (const auto& u : s.utterances) texts.push_back(u.text);
    return texts;
}

}  // namespace gcsd
