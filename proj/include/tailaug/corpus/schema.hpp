#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tailaug/corpus/types.hpp"

namespace tailaug::corpus {

struct IntentSpec {
    std::string name;
    int domain = -1;
    int skill = -1;
    std::vector<std::string> templates;  // whitespace-tokenized; "{key}" marks a slot

    bool operator==(const IntentSpec&) const = default;
};

// Closed-vocabulary description of the synthetic routing domain: label sets,
// per-intent templates, slot-filler lexicons and the Zipf skew over intents.
struct CorpusSchema {
    std::vector<std::string> domains;
    std::vector<IntentSpec> intents;                     // global intent ids
    std::vector<std::string> slot_keys;
    std::vector<std::string> device_types;
    std::vector<std::string> device_statuses;
    std::vector<std::string> skills;
    std::vector<std::vector<std::string>> lexicons;      // per slot-key fillers
    std::vector<std::vector<double>> device_type_weights;  // per domain
    std::vector<double> device_status_weights;
    double zipf_exponent = 1.2;
    int max_hypotheses = 5;
    int max_utterance_len = 32;

    bool operator==(const CorpusSchema&) const = default;

    std::vector<int> intents_of_domain(int d) const {
        std::vector<int> out;
        for (size_t i = 0; i < intents.size(); ++i)
            if (intents[i].domain == d) out.push_back(static_cast<int>(i));
        return out;
    }

    // Zipf rank order: round-robin across domains so every domain spans the
    // head and the tail.
    std::vector<int> ranked_intents() const;

    int find_label(const std::vector<std::string>& labels, const std::string& name) const;

    // throws SchemaError when label sets, templates or lexicons are inconsistent
    void validate() const;

    // stable content hash used by checkpoints to detect schema mismatches
    uint64_t hash() const;
};

// Parameters for the built-in schema generator.
struct BuiltinSchemaOptions {
    int num_domains = 4;
    int intents_per_domain = 5;
    int templates_per_intent = 4;
    int fillers_per_slot_key = 18;
    int num_device_types = 8;
    int num_device_statuses = 4;
    double zipf_exponent = 1.2;
    uint64_t seed = 17;
};

CorpusSchema make_builtin_schema(const BuiltinSchemaOptions& opts);

void save_schema(const CorpusSchema& schema, const std::string& path);
CorpusSchema load_schema(const std::string& path);

}  // namespace tailaug::corpus
