#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailaug/core/errors.hpp"
#include "tailaug/corpus/dataset_io.hpp"
#include "tailaug/corpus/generate.hpp"
#include "tailaug/corpus/schema.hpp"

using namespace tailaug;
using namespace tailaug::corpus;

namespace {

std::shared_ptr<const CorpusSchema> small_schema(int domains = 4, int intents = 5, uint64_t seed = 17) {
    BuiltinSchemaOptions o;
    o.num_domains = domains;
    o.intents_per_domain = intents;
    o.seed = seed;
    return std::make_shared<const CorpusSchema>(make_builtin_schema(o));
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("builtin schema validates and is deterministic") {
    auto s1 = small_schema();
    auto s2 = small_schema();
    CHECK(*s1 == *s2);
    CHECK(s1->intents.size() == 20);
    CHECK(s1->device_types.size() == 8);
    CHECK(s1->device_statuses.size() == 4);
    for (const auto& it : s1->intents) CHECK(it.templates.size() >= 3);
    CHECK(s1->hash() == s2->hash());
}

TEST_CASE("schema json round trip") {
    auto s = small_schema(3, 4, 99);
    auto path = temp_path("tailaug_schema.json");
    save_schema(*s, path);
    CorpusSchema loaded = load_schema(path);
    CHECK(loaded == *s);
    CHECK(loaded.hash() == s->hash());
    std::remove(path.c_str());
}

TEST_CASE("generate_corpus: minimal case has a valid logged action") {
    auto ds = generate_corpus(small_schema(), 1, 0);
    REQUIRE(ds.instances.size() == 1);
    const auto& inst = ds.instances[0];
    CHECK(inst.logged_action >= 0);
    CHECK(inst.logged_action < static_cast<int>(inst.hypotheses.size()));
}

TEST_CASE("generate_corpus: shared utterance-level fields and slot grounding") {
    auto ds = generate_corpus(small_schema(), 500, 3);
    for (const auto& inst : ds.instances) {
        const auto& first = inst.hypotheses[0];
        for (const auto& h : inst.hypotheses) {
            CHECK(h.tokens == first.tokens);
            CHECK(h.device_type == first.device_type);
            CHECK(h.device_status == first.device_status);
        }
        // slot values of the logged hypothesis appear verbatim in the text
        const auto& logged = inst.hypotheses[inst.logged_action];
        std::string text = " " + logged.text() + " ";
        for (const auto& slot : logged.nlu.slots) CHECK(text.find(" " + slot.value + " ") != std::string::npos);
        CHECK(!logged.tokens.empty());
        CHECK(static_cast<int>(logged.tokens.size()) <= ds.schema->max_utterance_len);
    }
}

TEST_CASE("generate_corpus: deterministic under fixed seed, distinct across seeds") {
    auto schema = small_schema();
    auto a = generate_corpus(schema, 200, 7);
    auto b = generate_corpus(schema, 200, 7);
    auto c = generate_corpus(schema, 200, 8);
    CHECK(a.instances == b.instances);
    CHECK(a.instances != c.instances);

    auto pa = temp_path("tailaug_ds_a.jsonl");
    auto pb = temp_path("tailaug_ds_b.jsonl");
    save_dataset(a, pa);
    save_dataset(b, pb);
    CHECK(file_bytes(pa) == file_bytes(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());
}

TEST_CASE("generate_corpus: intent frequencies follow the Zipf law") {
    auto schema = small_schema();  // 4 domains x 5 intents
    auto ds = generate_corpus(schema, 10000, 7);
    auto counts = intent_counts(ds);

    int max_count = 0, min_count = 1 << 30;
    for (auto& [intent, count] : counts) {
        max_count = std::max(max_count, count);
        min_count = std::min(min_count, count);
    }
    // analytic Zipf prediction for the most/least frequent intent ratio
    int k = static_cast<int>(schema->intents.size());
    double predicted = std::pow(static_cast<double>(k), schema->zipf_exponent);
    double observed = static_cast<double>(max_count) / min_count;
    CHECK(observed > 0.8 * predicted);
    CHECK(observed < 1.2 * predicted);

    // rank/frequency curve is monotone non-increasing in rank
    auto ranked = schema->ranked_intents();
    // adjacent Zipf ranks differ by little; require monotonicity up to noise
    int violations = 0;
    for (size_t r = 1; r < ranked.size(); ++r)
        if (counts[ranked[r]] > counts[ranked[r - 1]] + 40) ++violations;
    CHECK(violations == 0);
}

TEST_CASE("generate_corpus: invalid schema rejected") {
    CorpusSchema broken;
    broken.domains = {"music"};
    CHECK_THROWS_AS(
        generate_corpus(std::make_shared<const CorpusSchema>(broken), 10, 0), SchemaError);
}

TEST_CASE("split_head_tail boundary thresholds") {
    auto ds = generate_corpus(small_schema(), 2000, 5);
    auto [head_all, tail_none] = split_head_tail(ds, 1);
    CHECK(tail_none.instances.empty());
    CHECK(head_all.instances.size() == ds.instances.size());

    auto counts = intent_counts(ds);
    int max_count = 0;
    for (auto& [i, c] : counts) max_count = std::max(max_count, c);
    auto [head_none, tail_all] = split_head_tail(ds, max_count + 1);
    CHECK(head_none.instances.empty());
    CHECK(tail_all.instances.size() == ds.instances.size());

    CHECK_THROWS_AS(split_head_tail(ds, 0), InputError);
}

TEST_CASE("split_head_tail partitions and recounts correctly") {
    auto ds = generate_corpus(small_schema(), 10000, 11);
    auto [head, tail] = split_head_tail(ds, 100);
    CHECK(head.instances.size() + tail.instances.size() == 10000);

    auto tail_counts = intent_counts(tail);
    auto full_counts = intent_counts(ds);
    for (auto& [intent, count] : tail_counts) {
        CHECK(full_counts[intent] < 100);
        CHECK(count == full_counts[intent]);
    }
    // no overlap
    std::set<std::string> head_ids;
    for (auto& i : head.instances) head_ids.insert(i.instance_id);
    for (auto& i : tail.instances) CHECK(head_ids.count(i.instance_id) == 0);
}

TEST_CASE("dataset save/load round trip") {
    auto schema = small_schema();
    auto path = temp_path("tailaug_roundtrip.jsonl");

    auto one = generate_corpus(schema, 1, 42);
    save_dataset(one, path);
    auto loaded_one = load_dataset(path, schema);
    CHECK(loaded_one.instances == one.instances);

    auto big = generate_corpus(schema, 10000, 13);
    save_dataset(big, path);
    auto loaded = load_dataset(path, schema);
    REQUIRE(loaded.instances.size() == big.instances.size());
    for (size_t i = 0; i < big.instances.size(); ++i) CHECK(loaded.instances[i] == big.instances[i]);
    std::remove(path.c_str());
}

TEST_CASE("dataset load: malformed records name the line") {
    auto schema = small_schema();
    auto ds = generate_corpus(schema, 3, 1);
    auto path = temp_path("tailaug_badfile.jsonl");
    save_dataset(ds, path);

    // strip logged_action from the second record
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    in.close();
    auto rec = nlohmann::json::parse(lines[1]);
    rec.erase("logged_action");
    lines[1] = rec.dump();
    std::ofstream out(path);
    for (auto& ln : lines) out << ln << "\n";
    out.close();

    try {
        load_dataset(path, schema);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 2);
        CHECK(std::string(e.what()).find("logged_action") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("generate_corpus_for_intents restricts intents") {
    auto schema = small_schema();
    std::vector<int> pick = {2, 7, 11};
    auto ds = generate_corpus_for_intents(schema, pick, 300, 21);
    auto counts = intent_counts(ds);
    for (auto& [intent, count] : counts)
        CHECK(std::find(pick.begin(), pick.end(), intent) != pick.end());
    CHECK(ds.instances.size() == 300);
}

TEST_CASE("top1 and condition extraction use confidence order") {
    RoutingInstance inst;
    Hypothesis a;
    a.tokens = {"hello"};
    a.device_type = a.device_status = 0;
    a.nlu = {0, 1, {}};
    a.skill = 0;
    a.confidence = ConfidenceBin::MEDIUM;
    Hypothesis b = a;
    b.nlu.intent = 2;
    b.skill = 1;
    b.confidence = ConfidenceBin::HIGH;
    Hypothesis c = a;
    c.nlu.intent = 3;
    c.confidence = ConfidenceBin::MEDIUM;
    inst.hypotheses = {a, b, c};
    inst.logged_action = 0;
    CHECK(top1_index(inst) == 1);
    auto cond = Condition::from_top1(inst);
    CHECK(cond.intent == 2);
    CHECK(cond.skill == 1);
    // within a bin, ties resolve on content, so the top-1 hypothesis is
    // stable under permutations of the list
    inst.hypotheses[1].confidence = ConfidenceBin::MEDIUM;
    Hypothesis top_content = inst.hypotheses[top1_index(inst)];
    std::swap(inst.hypotheses[0], inst.hypotheses[2]);
    CHECK(inst.hypotheses[top1_index(inst)] == top_content);
    std::swap(inst.hypotheses[0], inst.hypotheses[1]);
    CHECK(inst.hypotheses[top1_index(inst)] == top_content);
}
