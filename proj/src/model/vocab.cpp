#include "map2seq/model/vocab.hpp"

#include <cctype>

#include "map2seq/errors.hpp"

namespace map2seq::model {

namespace {

bool is_edge_punct(char c) {
    switch (c) {
        case ',': case '.': case ';': case ':': case '!': case '?':
        case '"': case '(': case ')':
            return true;
        default:
            return false;
    }
}

bool is_closing(const std::string& t) {
    return t == "," || t == "." || t == ";" || t == ":" || t == "!" || t == "?" || t == ")";
}

}  // namespace

Vocab::Vocab() {
    for (const char* s : {"<pad>", "<unk>", "<s>", "</s>"}) add(s);
}

std::size_t Vocab::add(const std::string& word) {
    auto [it, inserted] = index_.emplace(word, words_.size());
    if (inserted) words_.push_back(word);
    return it->second;
}

std::size_t Vocab::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

nlohmann::json Vocab::to_json() const { return words_; }

Vocab Vocab::from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() < 4) throw SchemaError("vocabulary must be an array starting with the specials");
    Vocab v;
    for (std::size_t i = 0; i < 4; ++i)
        if (j[i].get<std::string>() != v.words_[i]) throw SchemaError("vocabulary specials out of order");
    for (std::size_t i = 4; i < j.size(); ++i) {
        if (v.add(j[i].get<std::string>()) != i)
            throw SchemaError("duplicate vocabulary entry '" + j[i].get<std::string>() + "'");
    }
    return v;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j == i) break;
        std::size_t b = i, e = j;
        std::vector<std::string> trailing;
        while (b < e && is_edge_punct(text[b])) out.emplace_back(1, text[b++]);
        while (e > b && is_edge_punct(text[e - 1])) trailing.emplace_back(1, text[--e]);
        if (e > b) out.push_back(text.substr(b, e - b));
        out.insert(out.end(), trailing.rbegin(), trailing.rend());
        i = j;
    }
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    bool attach_next = false;
    for (const auto& t : tokens) {
        if (!out.empty() && !is_closing(t) && !attach_next) out += ' ';
        out += t;
        attach_next = t == "(";
    }
    return out;
}

}  // namespace map2seq::model
