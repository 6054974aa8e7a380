#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace map2seq::model {

// Word-level vocabulary shared by node tokens and output tokens.
class Vocab {
public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnk = 1;
    static constexpr std::size_t kBos = 2;
    static constexpr std::size_t kEos = 3;

    Vocab();  // specials only

    std::size_t add(const std::string& word);
    // kUnk when absent.
    std::size_t id(const std::string& word) const;
    bool contains(const std::string& word) const { return index_.count(word) != 0; }
    const std::string& word(std::size_t id) const { return words_.at(id); }
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

    nlohmann::json to_json() const;
    static Vocab from_json(const nlohmann::json& j);

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Splits on whitespace and peels sentence punctuation off word edges.
// Case is preserved so copied node tokens surface verbatim.
std::vector<std::string> tokenize(const std::string& text);
// Joins tokens with spaces, attaching closing punctuation to the left word.
std::string detokenize(const std::vector<std::string>& tokens);

}  // namespace map2seq::model
