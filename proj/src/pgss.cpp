#include "gcsd/pgss.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/rng.hpp"

namespace gcsd {

using json = nlohmann::json;

const std::vector<std::string>& cst_principles() {
    static const std::vector<std::string> kPrinciples = {
        "Mental stimulation",
        "Encourage new ideas",
        "Use orientation sensitively",
        "Value opinions",
        "Use reminiscence",
        "Provide triggers for recall",
        "Continuity and consistency between sessions",
        "Implicit learning",
        "Stimulate language",
        "Stimulate executive functioning",
        "Person-centredness",
        "Respect",
        "Involvement",
        "Inclusion",
        "Choice",
        "Fun",
        "Maximise potential",
        "Build and strengthen relationships",
    };
    return kPrinciples;
}

void ScenarioConfig::validate() const {
    if (n_patients < 5 || n_patients > 6) throw InvalidConfig("n_patients must be 5 or 6");
    if (principles.size() != 18)
        throw InvalidConfig("principles list must have exactly 18 entries, got " +
                            std::to_string(principles.size()));
    for (const char* required : {"Encourage new ideas", "Value opinions", "Use reminiscence"})
        if (std::find(principles.begin(), principles.end(), required) == principles.end())
            throw InvalidConfig(std::string("principles must include \"") + required + "\"");
    if (activity_categories.empty()) throw InvalidConfig("activity_categories is empty");
    if (min_turns < 1) throw InvalidConfig("min_turns must be >= 1");
    if (static_cast<int>(patient_profiles.size()) < n_patients)
        throw InvalidConfig("need a profile per patient");
}

ScenarioConfig default_scenario_config() {
    ScenarioConfig cfg;
    cfg.n_patients = 5;
    cfg.patient_profiles = {
        {"陳伯", "retired tram driver, grew up in Sham Shui Po", {"舊香港", "足球", "飲茶"}},
        {"梁婆婆", "former seamstress, raised four children", {"煮餸", "粵曲", "縫紉"}},
        {"何伯", "school janitor for thirty years", {"象棋", "晨運", "雀鳥"}},
        {"黃婆婆", "ran a street food stall in Mong Kok", {"小食", "街市", "麻雀"}},
        {"林伯", "merchant sailor who visited many ports", {"旅行", "海洋", "相片"}},
        {"蘇婆婆", "primary school teacher", {"書法", "詩詞", "園藝"}},
    };
    cfg.activity_categories = {"art creation",        "thematic discussion", "reminiscence sharing",
                               "word games",          "music appreciation",  "physical warm-up",
                               "food and festivals"};
    cfg.opening_prompt = "歡迎大家嚟到今日嘅活動，我哋先互相問候一下。";
    cfg.middle_prompt = "而家我哋深入傾吓今日嘅主題，大家隨意分享。";
    cfg.closing_prompt = "時間差唔多喇，我哋一齊回顧吓今日傾咗啲乜嘢。";
    cfg.principles = cst_principles();
    cfg.min_turns = 31;
    cfg.seed = 0;
    return cfg;
}

std::string build_pgss_prompt(const ScenarioConfig& cfg) {
    cfg.validate();
    std::ostringstream out;
    out << "Step 1 - Task and output format:\n"
        << "Generate one multi-party group cognitive stimulation dialogue in Cantonese with more "
           "than 30 turns (at least "
        << std::max(31, cfg.min_turns) << " turns).\n"
        << "Output strictly a JSON array; each element is an object with exactly three fields: "
           "\"turn\" (integer starting at 1), \"speaker\" (\"Therapist\" or \"Patient_i\"), and "
           "\"dialogue\" (the utterance text). No text outside the JSON.\n\n";

    out << "Step 2 - Roles and scenario:\n"
        << "One therapist (Therapist) facilitates the session. " << cfg.n_patients
        << " patients with mild cognitive impairment take part:\n";
    for (int i = 0; i < cfg.n_patients; ++i) {
        const auto& p = cfg.patient_profiles[i];
        out << "  Patient_" << (i + 1) << " (" << p.name << "): " << p.history << "; interests:";
        for (const auto& it : p.interests) out << ' ' << it;
        out << ".\n";
    }
    out << "The session happens in a well-equipped activity room that supports varied group "
           "interactions.\n\n";

    out << "Step 3 - Activities and phase prompts:\n"
        << "Select one activity category at random from this list:\n";
    for (const auto& a : cfg.activity_categories) out << "  - " << a << "\n";
    out << "Opening phase prompt: " << cfg.opening_prompt << "\n"
        << "Middle phase prompt: " << cfg.middle_prompt << "\n"
        << "Closing phase prompt: " << cfg.closing_prompt << "\n\n";

    out << "Step 4 - Constraining principles:\n"
        << "The therapist's facilitative utterances must strictly adhere to all 18 cognitive "
           "stimulation principles below throughout the entire dialogue:\n";
    for (size_t i = 0; i < cfg.principles.size(); ++i)
        out << "  " << (i + 1) << ". " << cfg.principles[i] << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Template engine.
// ---------------------------------------------------------------------------

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

// One facilitation line per principle; {name} and {activity} are filled in.
const std::vector<std::pair<std::string, std::string>>& therapist_templates() {
    static const std::vector<std::pair<std::string, std::string>> kTemplates = {
        {"Mental stimulation", "我哋一齊諗吓關於{activity}嘅嘢，動吓腦筋好唔好？"},
        {"Encourage new ideas", "{name}，有冇啲新諗法想同大家分享吓？"},
        {"Use orientation sensitively", "今日天氣幾好，大家記唔記得而家係咩季節？"},
        {"Value opinions", "{name}，你點睇呢樣嘢？你嘅意見好重要。"},
        {"Use reminiscence", "{name}，呢樣嘢有冇令你諗起以前嘅日子？"},
        {"Provide triggers for recall", "大家睇吓呢張圖，見到啲乜嘢可以提吓大家？"},
        {"Continuity and consistency between sessions", "上次活動我哋傾過嘅嘢，大家仲記唔記得？"},
        {"Implicit learning", "唔使急，我哋慢慢一齊試，自然會上手。"},
        {"Stimulate language", "邊位可以用自己嘅話講吓{activity}係點樣？"},
        {"Stimulate executive functioning", "如果要安排呢個活動，第一步應該做啲乜？"},
        {"Person-centredness", "{name}，你最鍾意嘅部分係邊樣？我哋聽你講。"},
        {"Respect", "多謝{name}嘅分享，每位嘅故事都好寶貴。"},
        {"Involvement", "我哋每一位都試吓參與，{name}不如你先嚟？"},
        {"Inclusion", "大家都有機會講，邊位未講過就請講吓。"},
        {"Choice", "我哋可以揀唔同玩法，{name}你想點揀？"},
        {"Fun", "呢個環節幾好玩，大家一齊笑吓放鬆吓。"},
        {"Maximise potential", "{name}做得好好，不如再挑戰多一步？"},
        {"Build and strengthen relationships", "大家互相認識多啲，同隔籬嘅朋友傾吓偈。"},
    };
    return kTemplates;
}

const std::vector<std::string>& patient_templates() {
    static const std::vector<std::string> kTemplates = {
        "我以前好鍾意{interest}，而家諗返都開心。",
        "講起{interest}，我後生嗰陣成日都掂。",
        "呢樣嘢令我諗起屋企人，嗰陣時我哋一齊{interest}。",
        "我唔係太記得喇，不過{interest}我仲有啲印象。",
        "好呀，我試吓先，以前{interest}我都叫做熟手。",
        "係咩？我又覺得{interest}幾有趣喎。",
    };
    return kTemplates;
}

}  // namespace

Session template_generate(const ScenarioConfig& cfg, TemplateTrace* trace) {
    cfg.validate();
    Rng rng(cfg.seed);

    const int P = cfg.n_patients;
    // enough turns for every patient to speak twice under alternation
    const int n = std::max(std::max(31, cfg.min_turns), 4 * P + 2);
    const int n_open = std::max(1, static_cast<int>(std::lround(0.2 * n)));
    const int n_close = std::max(1, static_cast<int>(std::lround(0.2 * n)));

    const std::string activity = cfg.activity_categories[rng.uniform_int(
        static_cast<int>(cfg.activity_categories.size()))];
    if (trace) trace->activity = activity;

    // patient rotation: seeded permutation, repeated
    std::vector<int> rotation(P);
    for (int i = 0; i < P; ++i) rotation[i] = i + 1;
    rng.shuffle(rotation);

    // principle rotation for therapist turns
    std::vector<int> principle_order(18);
    for (int i = 0; i < 18; ++i) principle_order[i] = i;
    rng.shuffle(principle_order);

    std::vector<std::pair<SpeakerRole, std::string>> turns;
    int patient_cursor = 0, principle_cursor = 0;
    for (int turn = 1; turn <= n; ++turn) {
        bool opening = turn <= n_open;
        bool closing = turn > n - n_close;
        if (turn % 2 == 1) {  // therapist leads odd turns, starting with the opening
            const auto& [principle, tpl] =
                therapist_templates()[principle_order[principle_cursor % 18]];
            ++principle_cursor;
            int named = rotation[rng.uniform_int(P)];
            std::string text = replace_all(tpl, "{activity}", activity);
            text = replace_all(text, "{name}", cfg.patient_profiles[named - 1].name);
            if (turn == 1) text = cfg.opening_prompt + text;
            else if (turn == n_open + 1) text = cfg.middle_prompt + text;
            else if (closing && turn == n - n_close + 1) text = cfg.closing_prompt + text;
            (void)opening;
            turns.emplace_back(SpeakerRole::assistant(), text);
            if (trace) trace->therapist_principles.emplace_back(turn, principle);
        } else {
            int who = rotation[patient_cursor % P];
            ++patient_cursor;
            const auto& profile = cfg.patient_profiles[who - 1];
            const std::string& interest =
                profile.interests[rng.uniform_int(static_cast<int>(profile.interests.size()))];
            const std::string& tpl =
                patient_templates()[rng.uniform_int(static_cast<int>(patient_templates().size()))];
            turns.emplace_back(SpeakerRole::human(who), replace_all(tpl, "{interest}", interest));
        }
    }
    return build_session(turns, "pgss-" + std::to_string(cfg.seed), Origin::Simulated);
}

bool ValidationReport::pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string ValidationReport::summary() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << c.name << (c.pass ? " ok" : " FAIL");
        if (!c.detail.empty()) out << " (" << c.detail << ")";
        out << "; ";
    }
    return out.str();
}

ValidationReport validate_simulated(const Session& s, const ScenarioConfig& cfg) {
    ValidationReport r;
    int min_turns = std::max(31, cfg.min_turns);
    int turns = static_cast<int>(s.utterances.size());
    r.checks.push_back({"turns", turns >= min_turns,
                        turns >= min_turns ? std::to_string(turns)
                                           : "turns < " + std::to_string(min_turns)});

    bool has_assistant = false;
    bool all_nonempty = true;
    for (const auto& u : s.utterances) {
        has_assistant = has_assistant || u.speaker.is_assistant();
        all_nonempty = all_nonempty && !u.text.empty();
    }
    r.checks.push_back({"therapist_present", has_assistant, ""});

    int humans = s.distinct_humans();
    r.checks.push_back({"patient_count", humans == cfg.n_patients,
                        std::to_string(humans) + " of " + std::to_string(cfg.n_patients)});
    r.checks.push_back({"schema", true, "record schema enforced at parse time"});
    r.checks.push_back({"no_empty_utterances", all_nonempty, ""});
    return r;
}

// ---------------------------------------------------------------------------
// External API backend.
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InvalidConfig("endpoint must be a full URL");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string strip_code_fence(std::string text) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return text;
    if (text.compare(first, 3, "```") == 0) {
        auto line_end = text.find('\n', first);
        auto fence_end = text.rfind("```");
        if (line_end != std::string::npos && fence_end > line_end)
            return text.substr(line_end + 1, fence_end - line_end - 1);
    }
    return text;
}

// First text payload of a chat-completions style reply.
std::string extract_text_payload(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw MalformedResponse("body is not JSON");
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c = j["choices"][0];
        if (c.contains("message") && c["message"].contains("content") &&
            c["message"]["content"].is_string())
            return c["message"]["content"].get<std::string>();
        if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
    }
    if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
    throw MalformedResponse("no text payload found");
}

Session api_generate(const ScenarioConfig& cfg, const ApiBackendConfig& api) {
    const std::string prompt = build_pgss_prompt(cfg);
    ParsedUrl url = split_url(api.endpoint);
    const char* token = api.token_env.empty() ? nullptr : std::getenv(api.token_env.c_str());

    json body;
    body["model"] = api.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = api.temperature;
    const std::string payload = body.dump();

    std::string last_error;
    bool transport_failure = false;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0 && api.backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(api.backoff_ms << (attempt - 1)));
        httplib::Client cli(url.base);
        cli.set_connection_timeout(api.timeout_seconds, 0);
        cli.set_read_timeout(api.timeout_seconds, 0);
        httplib::Headers headers;
        if (token) headers.emplace("Authorization", std::string("Bearer ") + token);
        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) {
            transport_failure = true;
            last_error = "connection failure";
            continue;
        }
        if (res->status != 200) {
            transport_failure = true;
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        try {
            std::string text = strip_code_fence(extract_text_payload(res->body));
            Session s = parse_session_record(text, "pgss-api-" + std::to_string(cfg.seed),
                                             Origin::Simulated);
            ValidationReport report = validate_simulated(s, cfg);
            if (!report.pass()) throw ValidationFailed(report.summary());
            return s;
        } catch (const ValidationFailed&) {
            throw;  // a well-formed but invalid dialogue is not retried
        } catch (const DataError& e) {
            transport_failure = false;
            last_error = e.what();
        }
    }
    if (transport_failure) throw ApiError(last_error);
    throw MalformedResponse(last_error + " (after 3 attempts)");
}

}  // namespace

Session generate_simulated_session(const ScenarioConfig& cfg, const GeneratorBackend& backend) {
    cfg.validate();
    if (backend.kind == GeneratorBackend::Kind::Template) {
        Session s = template_generate(cfg);
        ValidationReport report = validate_simulated(s, cfg);
        if (!report.pass()) throw ValidationFailed(report.summary());
        return s;
    }
    return api_generate(cfg, backend.api);
}

}  // namespace gcsd
