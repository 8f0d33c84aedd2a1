#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcsd/corpus.hpp"

namespace gcsd {

struct PatientProfile {
    std::string name;
    std::string history;
    std::vector<std::string> interests;
};

struct ScenarioConfig {
    int n_patients = 5;  // one therapist plus 5..6 patients
    std::vector<PatientProfile> patient_profiles;
    std::vector<std::string> activity_categories;
    std::string opening_prompt, middle_prompt, closing_prompt;
    std::vector<std::string> principles;  // exactly 18
    int min_turns = 31;                   // "exceeding 30 turns"
    uint64_t seed = 0;

    void validate() const;  // throws InvalidConfig
};

ScenarioConfig default_scenario_config();
const std::vector<std::string>& cst_principles();  // the 18 facilitation principles

struct ApiBackendConfig {
    std::string endpoint;    // e.g. https://host:port/v1/chat/completions
    std::string model;
    std::string token_env = "PGSS_API_TOKEN";  // env var holding the bearer token
    double temperature = 1.0;
    int timeout_seconds = 60;
    int backoff_ms = 1000;  // doubled per retry
};

struct GeneratorBackend {
    enum class Kind { Template, ExternalApi } kind = Kind::Template;
    ApiBackendConfig api;

    static GeneratorBackend template_backend() { return {}; }
    static GeneratorBackend api_backend(ApiBackendConfig cfg) {
        return {Kind::ExternalApi, std::move(cfg)};
    }
};

// The four-step prompt: task + JSON schema, roles and scenario, activities
// and phase prompts, then the full principle list. Deterministic in cfg.
std::string build_pgss_prompt(const ScenarioConfig& cfg);

struct TemplateTrace {
    // (turn, principle) for each therapist utterance
    std::vector<std::pair<int, std::string>> therapist_principles;
    std::string activity;
};

// Deterministic offline stand-in for the API: a seeded session with at least
// min_turns utterances, assistant-led opening/middle/closing phases, every
// patient speaking at least twice, therapist turns rendered from
// principle-tagged templates.
Session template_generate(const ScenarioConfig& cfg, TemplateTrace* trace = nullptr);

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool pass() const;
    std::string summary() const;
};

ValidationReport validate_simulated(const Session& s, const ScenarioConfig& cfg);

// Template -> template_generate. ExternalApi -> POST the prompt, parse the
// reply as a PGSS record, validate; transport and parse failures retry up to
// 3 attempts with exponential backoff.
Session generate_simulated_session(const ScenarioConfig& cfg, const GeneratorBackend& backend);

}  // namespace gcsd
