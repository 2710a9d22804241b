#pragma once

#include <memory>

#include "tailaug/corpus/schema.hpp"

namespace tailaug::testutil {

// Schema whose intents own disjoint surface vocabulary: the generating
// intent is identifiable from text alone, and conditional generators can be
// audited by vocabulary membership.
inline std::shared_ptr<const corpus::CorpusSchema> separable_schema() {
    corpus::CorpusSchema s;
    s.domains = {"alpha", "beta"};
    s.device_types = {"d0", "d1"};
    s.device_statuses = {"s0", "s1"};
    s.skills = {"alpha_skill", "beta_skill"};
    s.slot_keys = {"ka", "kb", "kc", "kd"};
    s.lexicons = {{"apple", "acorn"}, {"bridge", "barrel"}, {"cedar", "cliff"}, {"diesel", "drum"}};
    s.device_type_weights = {{2.0, 1.0}, {1.0, 2.0}};
    s.device_status_weights = {1.0, 1.0};
    auto add_intent = [&](const char* name, int domain, int skill, const char* word, const char* key) {
        corpus::IntentSpec it;
        it.name = name;
        it.domain = domain;
        it.skill = skill;
        std::string w = word, k = key;
        it.templates = {w + " one {" + k + "}", w + " two {" + k + "}", w + " three {" + k + "}"};
        s.intents.push_back(it);
    };
    add_intent("alpha_red", 0, 0, "red", "ka");
    add_intent("alpha_green", 0, 0, "green", "kb");
    add_intent("beta_blue", 1, 1, "blue", "kc");
    add_intent("beta_gold", 1, 1, "gold", "kd");
    s.validate();
    return std::make_shared<const corpus::CorpusSchema>(s);
}

}  // namespace tailaug::testutil
