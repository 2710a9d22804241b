#include "tailaug/corpus/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/rng.hpp"

namespace tailaug::corpus {

using nlohmann::json;

std::vector<int> CorpusSchema::ranked_intents() const {
    std::vector<std::vector<int>> per_domain(domains.size());
    for (size_t i = 0; i < intents.size(); ++i) per_domain[intents[i].domain].push_back(static_cast<int>(i));
    std::vector<int> ranked;
    ranked.reserve(intents.size());
    for (size_t k = 0; ranked.size() < intents.size(); ++k)
        for (const auto& dom : per_domain)
            if (k < dom.size()) ranked.push_back(dom[k]);
    return ranked;
}

int CorpusSchema::find_label(const std::vector<std::string>& labels, const std::string& name) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

bool is_placeholder(const std::string& tok) { return tok.size() > 2 && tok.front() == '{' && tok.back() == '}'; }

}  // namespace

void CorpusSchema::validate() const {
    if (domains.empty()) throw SchemaError("schema has no domains");
    if (intents.empty()) throw SchemaError("schema has no intents");
    if (device_types.empty() || device_statuses.empty()) throw SchemaError("schema device label sets empty");
    if (skills.empty()) throw SchemaError("schema has no skills");
    if (lexicons.size() != slot_keys.size()) throw SchemaError("schema needs one lexicon per slot key");
    if (zipf_exponent <= 0) throw SchemaError("zipf exponent must be positive");
    if (device_type_weights.size() != domains.size())
        throw SchemaError("schema needs device-type weights per domain");
    if (device_status_weights.size() != device_statuses.size())
        throw SchemaError("device-status weight count mismatch");
    for (const auto& w : device_type_weights)
        if (w.size() != device_types.size()) throw SchemaError("device-type weight count mismatch");
    for (const auto& intent : intents) {
        if (intent.domain < 0 || intent.domain >= static_cast<int>(domains.size()))
            throw SchemaError("intent " + intent.name + " has invalid domain");
        if (intent.skill < 0 || intent.skill >= static_cast<int>(skills.size()))
            throw SchemaError("intent " + intent.name + " has invalid skill");
        if (intent.templates.size() < 3)
            throw SchemaError("intent " + intent.name + " needs at least 3 templates");
        for (const auto& tpl : intent.templates) {
            for (const auto& tok : split_ws(tpl)) {
                if (!is_placeholder(tok)) continue;
                std::string key = tok.substr(1, tok.size() - 2);
                int id = find_label(slot_keys, key);
                if (id < 0) throw SchemaError("template placeholder {" + key + "} is not a slot key");
                if (lexicons[id].empty()) throw SchemaError("slot key " + key + " has an empty lexicon");
            }
        }
    }
}

uint64_t CorpusSchema::hash() const {
    json j;
    j["domains"] = domains;
    std::vector<json> ij;
    for (const auto& it : intents)
        ij.push_back({{"name", it.name}, {"domain", it.domain}, {"skill", it.skill}, {"templates", it.templates}});
    j["intents"] = ij;
    j["slot_keys"] = slot_keys;
    j["device_types"] = device_types;
    j["device_statuses"] = device_statuses;
    j["skills"] = skills;
    j["lexicons"] = lexicons;
    j["zipf_exponent"] = zipf_exponent;
    std::string s = j.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

namespace pools {

const std::vector<std::string> kDomains = {"music",   "video", "books",  "shopping", "knowledge",
                                           "weather", "home",  "sports", "travel",   "food"};

const std::vector<std::string> kVerbs = {"play",  "show",  "find",   "open", "start",  "order", "buy",
                                         "read",  "search", "resume", "add",  "set",    "check", "tell",
                                         "give",  "turn",  "book",   "watch", "skip",   "queue", "browse",
                                         "list",  "track", "repeat", "pick",  "fetch",  "load",  "bring"};

const std::vector<std::string> kNouns = {
    "song",    "album",   "playlist", "movie",  "series", "clip",    "book",   "novel",   "story",  "item",
    "deal",    "cart",    "fact",     "answer", "forecast", "light", "plug",   "scene",   "score",  "match",
    "team",    "trip",    "flight",   "hotel",  "recipe", "meal",    "snack",  "station", "channel", "episode",
    "artist",  "author",  "brand",    "gadget", "lamp",   "news",    "podcast", "quiz",   "timer",  "alarm"};

const std::vector<std::string> kSlotKeys = {"title", "name",  "person", "place", "genre",
                                            "time",  "number", "query",  "brand", "category"};

const std::vector<std::vector<std::string>> kFillerPools = {
    // title
    {"midnight sun", "silver lining", "golden hour", "quiet storm", "river song", "neon lights", "paper planes",
     "wild horses", "summer rain", "winter tale", "blue monday", "red october", "lunar gate", "amber sky",
     "velvet road", "crystal lake", "echo valley", "iron heart", "maple drive", "solar wind", "hidden door",
     "last train", "first light", "broken clock"},
    // name
    {"aurora", "breeze", "cascade", "drift", "ember", "fable", "glimmer", "harbor", "indigo", "juniper",
     "karma", "lumen", "meadow", "nimbus", "onyx", "pebble", "quartz", "raven", "sable", "tundra", "umber",
     "vesper", "willow", "zephyr"},
    // person
    {"alice smith", "bob turner", "carol jones", "david kim", "emma stone", "frank miller", "grace lee",
     "henry ford", "ivy chen", "jack london", "kate bell", "leo moss", "mia wong", "noah reed", "olivia hart",
     "peter falk", "quinn adams", "rosa diaz", "sam hill", "tina brooks"},
    // place
    {"paris", "london", "tokyo", "berlin", "madrid", "rome", "oslo", "dublin", "vienna", "prague", "lisbon",
     "athens", "cairo", "sydney", "toronto", "denver", "austin", "boston", "seattle", "chicago"},
    // genre
    {"jazz", "rock", "pop", "classical", "folk", "blues", "metal", "indie", "country", "electro", "soul",
     "funk", "reggae", "ambient", "latin", "gospel", "punk", "disco", "house", "swing"},
    // time
    {"today", "tonight", "tomorrow", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
     "sunday", "noon", "midnight", "morning", "evening", "afternoon", "weekend", "june", "july", "august",
     "september"},
    // number
    {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
     "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"},
    // query
    {"tallest mountain", "longest river", "oldest city", "fastest animal", "largest ocean", "nearest star",
     "deepest lake", "highest bridge", "smallest country", "brightest planet", "coldest place", "hottest desert",
     "richest museum", "widest canyon", "greenest forest", "busiest airport", "quietest town", "rarest bird",
     "heaviest whale", "softest fabric"},
    // brand
    {"acme", "globex", "initech", "umbrella", "hooli", "stark", "wayne", "wonka", "tyrell", "cyberdyne",
     "aperture", "monarch", "zenith", "apex", "orbit", "nimbus", "vertex", "quasar", "pulsar", "nova"},
    // category
    {"electronics", "garden", "kitchen", "outdoor", "fitness", "beauty", "toys", "office", "grocery",
     "furniture", "clothing", "jewelry", "automotive", "pets", "crafts", "tools", "luggage", "software",
     "stationery", "appliances"}};

// template patterns; <v> = intent verb, <n1>/<n2> = intent nouns, {0}/{1} = slot keys
const std::vector<std::string> kPatterns = {
    "<v> the <n1> {0}",        "<v> {0} for <n2>",          "please <v> {0} on the <n1>",
    "<v> the <n2> {1}",        "can you <v> a <n1> {0}",    "<v> {1} from the <n2>",
    "<v> me the <n1> about {0}", "now <v> the {0} <n2>"};

}  // namespace pools

CorpusSchema make_builtin_schema(const BuiltinSchemaOptions& opts) {
    if (opts.num_domains < 1 || opts.num_domains > static_cast<int>(pools::kDomains.size()))
        throw SchemaError("builtin schema supports 1.." + std::to_string(pools::kDomains.size()) + " domains");
    if (opts.intents_per_domain < 2) throw SchemaError("builtin schema needs >= 2 intents per domain");
    if (opts.templates_per_intent < 3) throw SchemaError("intents need >= 3 templates");

    Rng rng(opts.seed);
    CorpusSchema s;
    s.zipf_exponent = opts.zipf_exponent;
    s.domains.assign(pools::kDomains.begin(), pools::kDomains.begin() + opts.num_domains);

    for (int i = 0; i < opts.num_device_types; ++i) s.device_types.push_back("device_" + std::to_string(i));
    for (int i = 0; i < opts.num_device_statuses; ++i) s.device_statuses.push_back("status_" + std::to_string(i));

    s.slot_keys = pools::kSlotKeys;
    for (size_t k = 0; k < s.slot_keys.size(); ++k) {
        std::vector<std::string> pool = pools::kFillerPools[k];
        rng.shuffle(pool);
        int take = std::min<int>(opts.fillers_per_slot_key, static_cast<int>(pool.size()));
        s.lexicons.emplace_back(pool.begin(), pool.begin() + take);
    }

    for (const auto& d : s.domains) s.skills.push_back(d + "_skill");

    int intent_counter = 0;
    for (int d = 0; d < opts.num_domains; ++d) {
        for (int k = 0; k < opts.intents_per_domain; ++k) {
            IntentSpec it;
            it.domain = d;
            const std::string& verb = pools::kVerbs[rng.randint(pools::kVerbs.size())];
            std::string n1 = pools::kNouns[rng.randint(pools::kNouns.size())];
            std::string n2 = pools::kNouns[rng.randint(pools::kNouns.size())];
            while (n2 == n1) n2 = pools::kNouns[rng.randint(pools::kNouns.size())];
            int k1 = static_cast<int>(rng.randint(s.slot_keys.size()));
            int k2 = static_cast<int>(rng.randint(s.slot_keys.size()));
            it.name = s.domains[d] + "_" + verb + "_" + n1 + "_" + std::to_string(intent_counter);

            // every 4th intent gets a dedicated skill, the rest share the domain skill
            if (intent_counter % 4 == 0) {
                s.skills.push_back(it.name + "_skill");
                it.skill = static_cast<int>(s.skills.size()) - 1;
            } else {
                it.skill = d;
            }

            std::vector<size_t> pattern_ids(pools::kPatterns.size());
            for (size_t p = 0; p < pattern_ids.size(); ++p) pattern_ids[p] = p;
            rng.shuffle(pattern_ids);
            for (int t = 0; t < opts.templates_per_intent; ++t) {
                std::string pat = pools::kPatterns[pattern_ids[t % pattern_ids.size()]];
                auto replace_all = [&pat](const std::string& from, const std::string& to) {
                    size_t pos;
                    while ((pos = pat.find(from)) != std::string::npos) pat.replace(pos, from.size(), to);
                };
                replace_all("<v>", verb);
                replace_all("<n1>", n1);
                replace_all("<n2>", n2);
                replace_all("{0}", "{" + s.slot_keys[k1] + "}");
                replace_all("{1}", "{" + s.slot_keys[k2] + "}");
                it.templates.push_back(pat);
            }
            s.intents.push_back(std::move(it));
            ++intent_counter;
        }
    }

    // skewed device priors so field distributions are informative
    for (int d = 0; d < opts.num_domains; ++d) {
        std::vector<double> w;
        for (int i = 0; i < opts.num_device_types; ++i) w.push_back(std::exp(1.3 * rng.normal()));
        s.device_type_weights.push_back(std::move(w));
    }
    for (int i = 0; i < opts.num_device_statuses; ++i)
        s.device_status_weights.push_back(std::exp(1.0 * rng.normal()));

    s.validate();
    return s;
}

void save_schema(const CorpusSchema& s, const std::string& path) {
    json j;
    j["zipf_exponent"] = s.zipf_exponent;
    j["max_hypotheses"] = s.max_hypotheses;
    j["max_utterance_len"] = s.max_utterance_len;
    j["device_types"] = s.device_types;
    j["device_statuses"] = s.device_statuses;
    j["device_status_weights"] = s.device_status_weights;
    j["slot_keys"] = s.slot_keys;
    j["skills"] = s.skills;
    json lex = json::object();
    for (size_t k = 0; k < s.slot_keys.size(); ++k) lex[s.slot_keys[k]] = s.lexicons[k];
    j["lexicons"] = lex;
    std::vector<json> domains;
    for (size_t d = 0; d < s.domains.size(); ++d) {
        json dj;
        dj["name"] = s.domains[d];
        dj["device_type_weights"] = s.device_type_weights[d];
        std::vector<json> intents;
        for (const auto& it : s.intents) {
            if (it.domain != static_cast<int>(d)) continue;
            intents.push_back({{"name", it.name}, {"skill", s.skills[it.skill]}, {"templates", it.templates}});
        }
        dj["intents"] = intents;
        domains.push_back(dj);
    }
    j["domains"] = domains;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write schema file " + path);
    out << j.dump(2) << "\n";
}

CorpusSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read schema file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("schema json: ") + e.what());
    }
    try {
        CorpusSchema s;
        s.zipf_exponent = j.at("zipf_exponent").get<double>();
        s.max_hypotheses = j.value("max_hypotheses", 5);
        s.max_utterance_len = j.value("max_utterance_len", 32);
        s.device_types = j.at("device_types").get<std::vector<std::string>>();
        s.device_statuses = j.at("device_statuses").get<std::vector<std::string>>();
        s.device_status_weights = j.at("device_status_weights").get<std::vector<double>>();
        s.slot_keys = j.at("slot_keys").get<std::vector<std::string>>();
        s.skills = j.at("skills").get<std::vector<std::string>>();
        s.lexicons.resize(s.slot_keys.size());
        for (size_t k = 0; k < s.slot_keys.size(); ++k)
            s.lexicons[k] = j.at("lexicons").at(s.slot_keys[k]).get<std::vector<std::string>>();
        for (const auto& dj : j.at("domains")) {
            int d = static_cast<int>(s.domains.size());
            s.domains.push_back(dj.at("name").get<std::string>());
            s.device_type_weights.push_back(dj.at("device_type_weights").get<std::vector<double>>());
            for (const auto& ij : dj.at("intents")) {
                IntentSpec it;
                it.name = ij.at("name").get<std::string>();
                it.domain = d;
                it.skill = s.find_label(s.skills, ij.at("skill").get<std::string>());
                if (it.skill < 0) throw SchemaError("intent " + it.name + " references unknown skill");
                it.templates = ij.at("templates").get<std::vector<std::string>>();
                s.intents.push_back(std::move(it));
            }
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("schema json: ") + e.what());
    }
}

}  // namespace tailaug::corpus
