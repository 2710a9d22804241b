#include "tailaug/corpus/generate.hpp"

#include <cmath>
#include <sstream>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/rng.hpp"

namespace tailaug::corpus {

namespace {

struct FilledUtterance {
    std::vector<std::string> tokens;
    std::vector<Slot> slots;
};

FilledUtterance fill_template(const CorpusSchema& schema, const std::string& tpl, Rng& rng) {
    FilledUtterance out;
    std::istringstream in(tpl);
    std::string tok;
    while (in >> tok) {
        if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
            std::string key = tok.substr(1, tok.size() - 2);
            int key_id = schema.find_label(schema.slot_keys, key);
            const std::string& filler = rng.pick(schema.lexicons[key_id]);
            out.slots.push_back({key_id, filler});
            std::istringstream fin(filler);
            std::string ftok;
            while (fin >> ftok) out.tokens.push_back(ftok);
        } else {
            out.tokens.push_back(tok);
        }
    }
    return out;
}

Dataset generate_impl(std::shared_ptr<const CorpusSchema> schema, const std::vector<int>& ranked,
                      const std::vector<double>& weights, size_t size, uint64_t seed, SplitTag tag,
                      const std::string& id_prefix) {
    const CorpusSchema& s = *schema;
    s.validate();
    if (size < 1) throw InputError("generate_corpus: size must be >= 1");

    Rng rng(seed);
    Dataset ds;
    ds.schema = schema;
    ds.split_tag = tag;
    ds.instances.reserve(size);

    for (size_t i = 0; i < size; ++i) {
        int intent_id = ranked[rng.categorical(weights)];
        const IntentSpec& intent = s.intents[intent_id];

        FilledUtterance utt = fill_template(s, rng.pick(intent.templates), rng);

        int device_type = static_cast<int>(rng.categorical(s.device_type_weights[intent.domain]));
        int device_status = static_cast<int>(rng.categorical(s.device_status_weights));

        Hypothesis correct;
        correct.tokens = utt.tokens;
        correct.device_type = device_type;
        correct.device_status = device_status;
        correct.nlu = {intent.domain, intent_id, utt.slots};
        correct.skill = intent.skill;
        correct.confidence = rng.bernoulli(0.7) ? ConfidenceBin::HIGH : ConfidenceBin::MEDIUM;

        int n_distractors = static_cast<int>(rng.randint(s.max_hypotheses));  // 0..max-1
        std::vector<Hypothesis> hyps = {correct};
        std::vector<int> siblings = s.intents_of_domain(intent.domain);
        for (int d = 0; d < n_distractors; ++d) {
            // perturbed domain/intent/skill: a sibling intent when one exists,
            // otherwise any other intent
            int other = intent_id;
            if (siblings.size() > 1) {
                while (other == intent_id) other = siblings[rng.randint(siblings.size())];
            } else {
                while (other == intent_id) other = static_cast<int>(rng.randint(s.intents.size()));
            }
            Hypothesis h = correct;
            h.nlu.domain = s.intents[other].domain;
            h.nlu.intent = other;
            h.skill = s.intents[other].skill;
            // slot values must stay spans of the shared utterance; re-key or drop
            if (rng.bernoulli(0.3)) {
                h.nlu.slots.clear();
            } else {
                for (auto& slot : h.nlu.slots)
                    if (rng.bernoulli(0.5)) slot.key = static_cast<int>(rng.randint(s.slot_keys.size()));
            }
            h.confidence = rng.bernoulli(0.5) ? ConfidenceBin::MEDIUM : ConfidenceBin::LOW;
            hyps.push_back(std::move(h));
        }

        RoutingInstance inst;
        std::vector<int> order(hyps.size());
        for (size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
        rng.shuffle(order);
        for (size_t k = 0; k < order.size(); ++k) {
            if (order[k] == 0) inst.logged_action = static_cast<int>(k);
            inst.hypotheses.push_back(hyps[order[k]]);
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%07zu", id_prefix.c_str(), i);
        inst.instance_id = buf;
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

}  // namespace

Dataset generate_corpus(std::shared_ptr<const CorpusSchema> schema, size_t size, uint64_t seed, SplitTag tag) {
    std::vector<int> ranked = schema->ranked_intents();
    std::vector<double> weights(ranked.size());
    for (size_t r = 0; r < ranked.size(); ++r)
        weights[r] = std::pow(static_cast<double>(r + 1), -schema->zipf_exponent);
    return generate_impl(std::move(schema), ranked, weights, size, seed, tag, "r");
}

Dataset generate_corpus_for_intents(std::shared_ptr<const CorpusSchema> schema, const std::vector<int>& intents,
                                    size_t size, uint64_t seed, SplitTag tag) {
    if (intents.empty()) throw InputError("generate_corpus_for_intents: empty intent set");
    std::vector<int> ranked = schema->ranked_intents();
    std::vector<int> keep;
    std::vector<double> weights;
    for (size_t r = 0; r < ranked.size(); ++r) {
        if (std::find(intents.begin(), intents.end(), ranked[r]) == intents.end()) continue;
        keep.push_back(ranked[r]);
        weights.push_back(std::pow(static_cast<double>(r + 1), -schema->zipf_exponent));
    }
    if (keep.empty()) throw InputError("generate_corpus_for_intents: no valid intents");
    return generate_impl(std::move(schema), keep, weights, size, seed, tag, "t");
}

std::map<int, int> intent_counts(const Dataset& ds) {
    std::map<int, int> counts;
    for (const auto& inst : ds.instances) ++counts[inst.hypotheses[inst.logged_action].nlu.intent];
    return counts;
}

std::pair<Dataset, Dataset> split_head_tail(const Dataset& ds, int intent_count_threshold) {
    if (intent_count_threshold < 1) throw InputError("split_head_tail: threshold must be >= 1");
    auto counts = intent_counts(ds);
    Dataset head, tail;
    head.schema = tail.schema = ds.schema;
    head.split_tag = tail.split_tag = ds.split_tag;
    for (const auto& inst : ds.instances) {
        int intent = inst.hypotheses[inst.logged_action].nlu.intent;
        if (counts[intent] < intent_count_threshold)
            tail.instances.push_back(inst);
        else
            head.instances.push_back(inst);
    }
    return {std::move(head), std::move(tail)};
}

}  // namespace tailaug::corpus
