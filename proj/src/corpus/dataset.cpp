#include "tailaug/corpus/dataset_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailaug/core/errors.hpp"

namespace tailaug::corpus {

using nlohmann::json;

namespace {

json hypothesis_to_json(const CorpusSchema& s, const Hypothesis& h) {
    json slots = json::array();
    for (const auto& slot : h.nlu.slots)
        slots.push_back({{"key", s.slot_keys.at(slot.key)}, {"value", slot.value}});
    return json{{"text", h.text()},
                {"device_type", s.device_types.at(h.device_type)},
                {"device_status", s.device_statuses.at(h.device_status)},
                {"domain", s.domains.at(h.nlu.domain)},
                {"intent", s.intents.at(h.nlu.intent).name},
                {"slots", slots},
                {"confidence_bin", to_string(h.confidence)},
                {"skill", s.skills.at(h.skill)}};
}

int require_label(const CorpusSchema& s, const std::vector<std::string>& labels, const std::string& name,
                  const char* what, long line) {
    int id = s.find_label(labels, name);
    if (id < 0) throw ParseError(std::string("unknown ") + what + " label '" + name + "'", line);
    return id;
}

Hypothesis hypothesis_from_json(const CorpusSchema& s, const json& j, long line) {
    Hypothesis h;
    std::istringstream text(j.at("text").get<std::string>());
    std::string tok;
    while (text >> tok) h.tokens.push_back(tok);
    if (h.tokens.empty()) throw ParseError("hypothesis has empty text", line);
    h.device_type = require_label(s, s.device_types, j.at("device_type").get<std::string>(), "device_type", line);
    h.device_status =
        require_label(s, s.device_statuses, j.at("device_status").get<std::string>(), "device_status", line);
    h.nlu.domain = require_label(s, s.domains, j.at("domain").get<std::string>(), "domain", line);
    std::string intent_name = j.at("intent").get<std::string>();
    h.nlu.intent = -1;
    for (size_t i = 0; i < s.intents.size(); ++i)
        if (s.intents[i].name == intent_name) h.nlu.intent = static_cast<int>(i);
    if (h.nlu.intent < 0) throw ParseError("unknown intent label '" + intent_name + "'", line);
    for (const auto& sj : j.at("slots")) {
        Slot slot;
        slot.key = require_label(s, s.slot_keys, sj.at("key").get<std::string>(), "slot key", line);
        slot.value = sj.at("value").get<std::string>();
        h.nlu.slots.push_back(std::move(slot));
    }
    std::string bin = j.at("confidence_bin").get<std::string>();
    if (bin == "HIGH")
        h.confidence = ConfidenceBin::HIGH;
    else if (bin == "MEDIUM")
        h.confidence = ConfidenceBin::MEDIUM;
    else if (bin == "LOW")
        h.confidence = ConfidenceBin::LOW;
    else
        throw ParseError("unknown confidence_bin '" + bin + "'", line);
    h.skill = require_label(s, s.skills, j.at("skill").get<std::string>(), "skill", line);
    return h;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file " + path);
    const CorpusSchema& s = *ds.schema;
    for (const auto& inst : ds.instances) {
        json hyps = json::array();
        for (const auto& h : inst.hypotheses) hyps.push_back(hypothesis_to_json(s, h));
        json rec{{"instance_id", inst.instance_id}, {"hypotheses", hyps}, {"logged_action", inst.logged_action}};
        out << rec.dump() << "\n";
    }
    if (!out) throw IoError("write failed for dataset file " + path);
}

Dataset load_dataset(const std::string& path, std::shared_ptr<const CorpusSchema> schema, SplitTag tag) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read dataset file " + path);
    Dataset ds;
    ds.schema = schema;
    ds.split_tag = tag;
    std::set<std::string> seen_ids;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid json: ") + e.what(), line_no);
        }
        try {
            RoutingInstance inst;
            if (!j.contains("instance_id")) throw ParseError("record missing `instance_id`", line_no);
            if (!j.contains("hypotheses")) throw ParseError("record missing `hypotheses`", line_no);
            if (!j.contains("logged_action")) throw ParseError("record missing `logged_action`", line_no);
            inst.instance_id = j["instance_id"].get<std::string>();
            for (const auto& hj : j["hypotheses"]) inst.hypotheses.push_back(hypothesis_from_json(*schema, hj, line_no));
            if (inst.hypotheses.empty()) throw ParseError("record has no hypotheses", line_no);
            inst.logged_action = j["logged_action"].get<int>();
            if (inst.logged_action < 0 || inst.logged_action >= static_cast<int>(inst.hypotheses.size()))
                throw ParseError("logged_action out of range", line_no);
            if (!seen_ids.insert(inst.instance_id).second)
                throw ParseError("duplicate instance_id '" + inst.instance_id + "'", line_no);
            ds.instances.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad record: ") + e.what(), line_no);
        }
    }
    return ds;
}

}  // namespace tailaug::corpus
