#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace tailaug::corpus {

struct CorpusSchema;

enum class ConfidenceBin { HIGH = 0, MEDIUM = 1, LOW = 2 };

inline const char* to_string(ConfidenceBin b) {
    switch (b) {
        case ConfidenceBin::HIGH: return "HIGH";
        case ConfidenceBin::MEDIUM: return "MEDIUM";
        default: return "LOW";
    }
}

struct Slot {
    int key = -1;           // slot-key id in the schema
    std::string value;      // verbatim token span of the owning utterance

    bool operator==(const Slot&) const = default;
};

// (domain, intent, slots) triple of one routing candidate.
struct NluInterpretation {
    int domain = -1;
    int intent = -1;
    std::vector<Slot> slots;

    bool operator==(const NluInterpretation&) const = default;
};

struct Hypothesis {
    std::vector<std::string> tokens;  // utterance text, shared across the instance
    int device_type = -1;
    int device_status = -1;
    NluInterpretation nlu;
    ConfidenceBin confidence = ConfidenceBin::MEDIUM;
    int skill = -1;

    std::string text() const {
        std::string out;
        for (size_t i = 0; i < tokens.size(); ++i) {
            if (i) out += ' ';
            out += tokens[i];
        }
        return out;
    }

    bool operator==(const Hypothesis&) const = default;
};

struct RoutingInstance {
    std::string instance_id;
    std::vector<Hypothesis> hypotheses;
    int logged_action = 0;

    bool operator==(const RoutingInstance&) const = default;
};

enum class SplitTag { train, valid, test, test_tail };

inline const char* to_string(SplitTag t) {
    switch (t) {
        case SplitTag::train: return "train";
        case SplitTag::valid: return "valid";
        case SplitTag::test: return "test";
        default: return "test_tail";
    }
}

struct Dataset {
    std::shared_ptr<const CorpusSchema> schema;
    std::vector<RoutingInstance> instances;
    SplitTag split_tag = SplitTag::train;

    size_t size() const { return instances.size(); }
};

// Deterministic content fingerprint of a hypothesis. Confidence-bin ties
// are broken on this key (not on list position): a position tie-break would
// leak the input order through the sorted sequence and break the router's
// permutation equivariance within equal bins.
inline uint64_t hypothesis_content_key(const Hypothesis& h) {
    uint64_t k = 0xcbf29ce484222325ULL;
    auto mix = [&k](uint64_t v) { k = (k ^ v) * 0x100000001b3ULL; };
    auto mix_str = [&](const std::string& s) {
        for (unsigned char c : s) mix(c);
        mix(0xff);
    };
    for (const auto& t : h.tokens) mix_str(t);
    mix(static_cast<uint64_t>(h.device_type) + 1);
    mix(static_cast<uint64_t>(h.device_status) + 1);
    mix(static_cast<uint64_t>(h.nlu.domain) + 1);
    mix(static_cast<uint64_t>(h.nlu.intent) + 1);
    for (const auto& s : h.nlu.slots) {
        mix(static_cast<uint64_t>(s.key) + 1);
        mix_str(s.value);
    }
    mix(static_cast<uint64_t>(h.skill) + 1);
    return k;
}

// Hypothesis ranking used everywhere "top-1" appears: confidence bin
// HIGH < MEDIUM < LOW; ties broken by content key, then original position.
inline std::vector<int> confidence_order(const RoutingInstance& inst) {
    std::vector<int> order(inst.hypotheses.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<uint64_t> keys(inst.hypotheses.size());
    for (size_t i = 0; i < keys.size(); ++i) keys[i] = hypothesis_content_key(inst.hypotheses[i]);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        int ba = static_cast<int>(inst.hypotheses[a].confidence);
        int bb = static_cast<int>(inst.hypotheses[b].confidence);
        if (ba != bb) return ba < bb;
        return keys[a] < keys[b];
    });
    return order;
}

inline int top1_index(const RoutingInstance& inst) { return confidence_order(inst)[0]; }

// The generation conditioning tuple (n1, s1) of the top-1 hypothesis.
struct Condition {
    int domain = -1;
    int intent = -1;
    std::vector<int> slot_keys;
    int skill = -1;

    static Condition from_top1(const RoutingInstance& inst) {
        const Hypothesis& h = inst.hypotheses[top1_index(inst)];
        Condition c;
        c.domain = h.nlu.domain;
        c.intent = h.nlu.intent;
        for (const auto& s : h.nlu.slots) c.slot_keys.push_back(s.key);
        std::sort(c.slot_keys.begin(), c.slot_keys.end());
        c.slot_keys.erase(std::unique(c.slot_keys.begin(), c.slot_keys.end()), c.slot_keys.end());
        c.skill = h.skill;
        return c;
    }

    // canonical hash key for contrastive masking and grouping
    std::string key() const {
        std::string k = "d" + std::to_string(domain) + ":i" + std::to_string(intent) + ":k";
        for (int s : slot_keys) k += std::to_string(s) + ",";
        k += ":s" + std::to_string(skill);
        return k;
    }

    bool operator==(const Condition&) const = default;
};

}  // namespace tailaug::corpus
