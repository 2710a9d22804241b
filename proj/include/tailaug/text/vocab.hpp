#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailaug/core/errors.hpp"

namespace tailaug::text {

// Frozen token <-> id map. Ids 0..6 are reserved specials; unknown text
// words map to UNK, while strict lookups (categorical labels, sentinels)
// throw instead.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;
    static constexpr int kMask = 4;
    static constexpr int kCls = 5;
    static constexpr int kSep = 6;

    Vocab() {
        for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>", "<mask>", "<cls>", "<sep>"}) add(t);
    }

    int add(const std::string& tok) {
        auto it = index_.find(tok);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(tok);
        index_[tok] = id;
        return id;
    }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? kUnk : it->second;
    }

    int id_strict(const std::string& tok) const {
        auto it = index_.find(tok);
        if (it == index_.end()) throw VocabError("token '" + tok + "' not in vocabulary");
        return it->second;
    }

    bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

    const std::string& token(int id) const {
        if (id < 0 || id >= static_cast<int>(tokens_.size())) throw VocabError("token id out of range");
        return tokens_[id];
    }

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    nlohmann::json to_json() const { return tokens_; }

    static Vocab from_json(const nlohmann::json& j) {
        Vocab v;
        v.tokens_.clear();
        v.index_.clear();
        for (const auto& t : j) v.add(t.get<std::string>());
        return v;
    }

    bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

// Categorical labels become single reserved tokens with a kind prefix so
// they can never collide with utterance words.
inline std::string label_token(const char* kind, const std::string& label) {
    return std::string(kind) + ":" + label;
}

}  // namespace tailaug::text
