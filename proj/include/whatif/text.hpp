#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace whatif {

// Lowercase whitespace + punctuation split; punctuation marks become their
// own tokens ("remove all blue things." -> remove all blue things .)
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else {
            flush();
            out.push_back(std::string(1, static_cast<char>(c)));
        }
    }
    flush();
    return out;
}

// Token <-> index map built from a training corpus. PAD is index 0, the
// out-of-vocabulary token index 1, then every distinct token in
// lexicographic order (stable across rebuilds of the same corpus).
class TokenVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kOov = 1;

    TokenVocab() : tokens_{"<pad>", "<unk>"} { reindex_(); }

    static TokenVocab build(const std::vector<std::string>& corpus) {
        std::set<std::string> seen;
        for (const auto& text : corpus)
            for (auto& t : tokenize(text)) seen.insert(std::move(t));
        TokenVocab v;
        for (const auto& t : seen) v.tokens_.push_back(t);
        v.reindex_();
        return v;
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    int id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kOov : it->second;
    }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    // fixed-length id row, PAD-filled; mask gets 1.0 for real tokens
    void encode(std::string_view text, int max_len, int* ids, double* mask) const {
        const auto toks = tokenize(text);
        for (int i = 0; i < max_len; ++i) {
            if (i < static_cast<int>(toks.size())) {
                ids[i] = id(toks[static_cast<std::size_t>(i)]);
                mask[i] = 1.0;
            } else {
                ids[i] = kPad;
                mask[i] = 0.0;
            }
        }
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        for (const auto& t : tokens_) f << t << "\n";
    }

    static TokenVocab load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read " + path);
        TokenVocab v;
        v.tokens_.clear();
        std::string line;
        while (std::getline(f, line))
            if (!line.empty()) v.tokens_.push_back(line);
        if (v.tokens_.size() < 2 || v.tokens_[0] != "<pad>" || v.tokens_[1] != "<unk>")
            throw std::runtime_error(path + ": not a vocabulary file");
        v.reindex_();
        return v;
    }

    friend bool operator==(const TokenVocab& a, const TokenVocab& b) { return a.tokens_ == b.tokens_; }

private:
    void reindex_() {
        index_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
    }

    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

}  // namespace whatif
