#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace gcsd {

// Character-level vocabulary with single-id special tokens. Encoding is
// longest-match-first over the special token strings, then one id per
// Unicode codepoint; unknown codepoints map to <unk>.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    // Builds ids: <pad>=0, <unk>=1, <|im_start|>, <|im_end|>, [Assistant],
    // [Human_1]..[Human_max_humans], then the given character symbols in
    // sorted codepoint order.
    static Vocab build(const std::vector<std::string>& texts, int max_humans);

    int id_of(const std::string& symbol) const;  // -1 if absent
    const std::string& symbol_of(int id) const;
    int size() const { return static_cast<int>(symbols_.size()); }
    int max_humans() const { return max_humans_; }

    int im_start_id() const { return im_start_; }
    int im_end_id() const { return im_end_; }
    int assistant_id() const { return assistant_; }
    int human_id(int index) const;  // 1-based
    bool is_special(int id) const { return id < first_char_id_; }

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    // JSON object mapping symbol -> id.
    std::string to_json() const;
    static Vocab from_json(const std::string& json_text);

    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    void index_specials();

    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> by_symbol_;
    int max_humans_ = 0;
    int im_start_ = -1, im_end_ = -1, assistant_ = -1, first_human_ = -1;
    int first_char_id_ = 0;
};

}  // namespace gcsd
