#include "gcsd/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "gcsd/errors.hpp"
#include "gcsd/unicode.hpp"

namespace gcsd {

using json = nlohmann::json;

Vocab Vocab::build(const std::vector<std::string>& texts, int max_humans) {
    Vocab v;
    v.max_humans_ = max_humans;
    v.symbols_.push_back("<pad>");
    v.symbols_.push_back("<unk>");
    v.symbols_.push_back("<|im_start|>");
    v.symbols_.push_back("<|im_end|>");
    v.symbols_.push_back("[Assistant]");
    for (int i = 1; i <= max_humans; ++i) v.symbols_.push_back("[Human_" + std::to_string(i) + "]");

    std::set<uint32_t> chars;
    chars.insert(' ');  // serialization separator
    for (const auto& t : texts)
        for (uint32_t cp : uni::codepoints(t)) chars.insert(cp);
    for (uint32_t cp : chars) v.symbols_.push_back(uni::encode(cp));

    for (int i = 0; i < static_cast<int>(v.symbols_.size()); ++i) v.by_symbol_[v.symbols_[i]] = i;
    v.index_specials();
    return v;
}

void Vocab::index_specials() {
    im_start_ = by_symbol_.at("<|im_start|>");
    im_end_ = by_symbol_.at("<|im_end|>");
    assistant_ = by_symbol_.at("[Assistant]");
    first_human_ = assistant_ + 1;
    first_char_id_ = first_human_ + max_humans_;
}

int Vocab::id_of(const std::string& symbol) const {
    auto it = by_symbol_.find(symbol);
    return it == by_symbol_.end() ? -1 : it->second;
}

const std::string& Vocab::symbol_of(int id) const { return symbols_.at(id); }

int Vocab::human_id(int index) const {
    if (index < 1 || index > max_humans_) throw IndexOutOfRange("human index " + std::to_string(index));
    return first_human_ + index - 1;
}

std::vector<int> Vocab::encode(const std::string& text) const {
    // special tokens first, longest match; all start with '<' or '['
    std::vector<int> out;
    size_t pos = 0;
    while (pos < text.size()) {
        char c = text[pos];
        if (c == '<' || c == '[') {
            int best = -1;
            size_t best_len = 0;
            for (int id = 2; id < first_char_id_; ++id) {
                const std::string& sym = symbols_[id];
                if (sym.size() > best_len && text.compare(pos, sym.size(), sym) == 0) {
                    best = id;
                    best_len = sym.size();
                }
            }
            if (best >= 0) {
                out.push_back(best);
                pos += best_len;
                continue;
            }
        }
        size_t next = pos;
        uni::decode_next(text, next);
        auto it = by_symbol_.find(text.substr(pos, next - pos));
        out.push_back(it == by_symbol_.end() ? kUnk : it->second);
        pos = next;
    }
    return out;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += symbols_.at(id);
    return out;
}

std::string Vocab::to_json() const {
    json j = json::object();
    for (int i = 0; i < static_cast<int>(symbols_.size()); ++i) j[symbols_[i]] = i;
    json root;
    root["max_humans"] = max_humans_;
    root["symbols"] = j;
    return root.dump();
}

Vocab Vocab::from_json(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.contains("symbols"))
        throw SchemaError("vocab json");
    Vocab v;
    v.max_humans_ = root.value("max_humans", 0);
    const auto& j = root["symbols"];
    v.symbols_.resize(j.size());
    for (auto it = j.begin(); it != j.end(); ++it) {
        int id = it.value().get<int>();
        if (id < 0 || id >= static_cast<int>(v.symbols_.size())) throw SchemaError("vocab id range");
        v.symbols_[id] = it.key();
        v.by_symbol_[it.key()] = id;
    }
    v.index_specials();
    return v;
}

void Vocab::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path);
    f << to_json();
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace gcsd
