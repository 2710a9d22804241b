#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/gradcheck.hpp"
#include "tailaug/corpus/generate.hpp"
#include "tailaug/router/router.hpp"
#include "tailaug/text/vocab_build.hpp"

using namespace tailaug;
using namespace tailaug::corpus;
using namespace tailaug::router;

namespace {

// Schema whose intents own disjoint vocabulary, so text alone identifies
// the generating intent.
std::shared_ptr<const CorpusSchema> separable_schema() {
    CorpusSchema s;
    s.domains = {"alpha", "beta"};
    s.device_types = {"d0", "d1"};
    s.device_statuses = {"s0", "s1"};
    s.skills = {"alpha_skill", "beta_skill"};
    s.slot_keys = {"ka", "kb", "kc", "kd"};
    s.lexicons = {{"apple", "acorn"}, {"bridge", "barrel"}, {"cedar", "cliff"}, {"diesel", "drum"}};
    s.device_type_weights = {{2.0, 1.0}, {1.0, 2.0}};
    s.device_status_weights = {1.0, 1.0};
    auto add_intent = [&](const char* name, int domain, int skill, const char* word, const char* key) {
        IntentSpec it;
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
    return std::make_shared<const CorpusSchema>(s);
}

RouterConfig tiny_config() {
    RouterConfig c;
    c.word_embedding_dim = 20;
    c.categorical_embedding_dim = 8;
    c.text_encoder_hidden = 20;
    c.hypothesis_sequence_hidden = 20;
    c.mlp_hidden = 20;
    c.batch_size = 32;
    c.epochs = 10;
    c.seed = 5;
    return c;
}

RouterModel untrained_model(std::shared_ptr<const CorpusSchema> schema, const Dataset& ds, RouterConfig cfg) {
    text::Vocab vocab;
    text::add_corpus_words(vocab, ds);
    return RouterModel(std::move(schema), std::move(vocab), cfg);
}

struct OraclePolicy : RoutingPolicy {
    std::vector<double> route(const RoutingInstance& inst) const override {
        std::vector<double> p(inst.hypotheses.size(), 0.0);
        p[inst.logged_action] = 1.0;
        return p;
    }
};

struct FixedIndexPolicy : RoutingPolicy {
    std::vector<double> route(const RoutingInstance& inst) const override {
        std::vector<double> p(inst.hypotheses.size(), 0.0);
        p[0] = 1.0;
        return p;
    }
};

struct WrongOnIdsPolicy : RoutingPolicy {
    std::set<std::string> wrong_ids;
    std::vector<double> route(const RoutingInstance& inst) const override {
        std::vector<double> p(inst.hypotheses.size(), 0.0);
        if (wrong_ids.count(inst.instance_id)) {
            p[(inst.logged_action + 1) % inst.hypotheses.size()] = 1.0;
        } else {
            p[inst.logged_action] = 1.0;
        }
        return p;
    }
};

}  // namespace

TEST_CASE("encoded dimensionality is the sum of the component dims") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 10, 1);
    RouterConfig cfg;  // spec defaults: 64-dim text encoder, 16 per categorical field
    auto model = untrained_model(schema, ds, cfg);
    auto layout = model.encoded_layout();
    // text (2x64) + 7 categorical fields (device type/status, domain, intent,
    // slot bag, confidence, skill) x 16
    CHECK(layout.total == 2 * 64 + 7 * 16);
    auto vec = model.encode_hypothesis(ds.instances[0].hypotheses[0]);
    CHECK(vec.cols == layout.total);
    CHECK(vec.rows == 1);
}

TEST_CASE("encode_hypothesis: locality and determinism") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 10, 2);
    auto model = untrained_model(schema, ds, tiny_config());
    auto layout = model.encoded_layout();

    Hypothesis a = ds.instances[0].hypotheses[0];
    Hypothesis b = a;
    b.skill = (a.skill + 1) % 2;
    auto va = model.encode_hypothesis(a);
    auto vb = model.encode_hypothesis(b);
    for (int i = 0; i < layout.skill; ++i) CHECK(va.data[i] == vb.data[i]);
    bool differs = false;
    for (int i = layout.skill; i < layout.total; ++i) differs |= (va.data[i] != vb.data[i]);
    CHECK(differs);

    auto va2 = model.encode_hypothesis(a);
    CHECK(va.data == va2.data);
}

TEST_CASE("encode_hypothesis rejects out-of-schema categorical ids") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 5, 3);
    auto model = untrained_model(schema, ds, tiny_config());
    Hypothesis bad = ds.instances[0].hypotheses[0];
    bad.skill = 99;
    CHECK_THROWS_AS(model.encode_hypothesis(bad), VocabError);
    // unknown words fall back to the OOV token instead
    Hypothesis oov = ds.instances[0].hypotheses[0];
    oov.tokens.push_back("zzz_never_seen");
    CHECK_NOTHROW(model.encode_hypothesis(oov));
}

TEST_CASE("route: single hypothesis yields probability one") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 50, 4);
    auto model = untrained_model(schema, ds, tiny_config());
    for (const auto& inst : ds.instances) {
        if (inst.hypotheses.size() != 1) continue;
        auto p = model.route(inst);
        REQUIRE(p.size() == 1);
        CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-9));
    }
    RoutingInstance empty;
    CHECK_THROWS_AS(model.route(empty), InputError);
}

TEST_CASE("route: outputs form a probability simplex") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 100, 6);
    auto model = untrained_model(schema, ds, tiny_config());
    for (const auto& inst : ds.instances) {
        auto p = model.route(inst);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("route: permuting same-bin hypotheses permutes the outputs") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 10, 7);
    auto model = untrained_model(schema, ds, tiny_config());

    RoutingInstance inst = ds.instances[0];
    // force three hypotheses with two sharing a bin
    while (inst.hypotheses.size() < 3) inst.hypotheses.push_back(inst.hypotheses[0]);
    inst.hypotheses.resize(3);
    inst.hypotheses[0].confidence = ConfidenceBin::MEDIUM;
    inst.hypotheses[1].confidence = ConfidenceBin::MEDIUM;
    inst.hypotheses[2].confidence = ConfidenceBin::HIGH;
    inst.hypotheses[1].skill = (inst.hypotheses[0].skill + 1) % 2;  // make them distinguishable
    inst.logged_action = 0;

    auto p = model.route(inst);
    RoutingInstance swapped = inst;
    std::swap(swapped.hypotheses[0], swapped.hypotheses[1]);
    auto q = model.route(swapped);
    CHECK(p[0] == doctest::Approx(q[1]).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(q[0]).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(q[2]).epsilon(1e-12));
}

TEST_CASE("train_router: separable corpus reaches high validation accuracy") {
    auto schema = separable_schema();
    auto train = generate_corpus(schema, 500, 11, SplitTag::train);
    auto valid = generate_corpus(schema, 200, 12, SplitTag::valid);
    auto model = train_router(train, valid, tiny_config());
    CHECK(model.history().size() == 10);
    CHECK(model.history().back().valid_accuracy >= 0.95);
    // monotone training: loss after training < loss at the first epoch
    CHECK(model.history().back().train_loss < model.history().front().train_loss);
}

TEST_CASE("train_router: zero epochs returns chance-level initialization") {
    auto schema = separable_schema();
    auto train = generate_corpus(schema, 300, 13);
    auto valid = generate_corpus(schema, 300, 14);
    RouterConfig cfg = tiny_config();
    cfg.epochs = 0;
    auto model = train_router(train, valid, cfg);
    CHECK(model.history().empty());
    double acc = model.accuracy(valid);
    CHECK(acc > 0.10);  // untrained: near 1/avg(N), far from oracle
    CHECK(acc < 0.70);
}

TEST_CASE("train_router: identical seeds give identical loss traces") {
    auto schema = separable_schema();
    auto train = generate_corpus(schema, 200, 15);
    auto valid = generate_corpus(schema, 50, 16);
    RouterConfig cfg = tiny_config();
    cfg.epochs = 3;
    auto m1 = train_router(train, valid, cfg);
    auto m2 = train_router(train, valid, cfg);
    REQUIRE(m1.history().size() == m2.history().size());
    for (size_t i = 0; i < m1.history().size(); ++i)
        CHECK(m1.history()[i].train_loss == m2.history()[i].train_loss);
    CHECK_THROWS_AS(train_router(Dataset{}, valid, cfg), InputError);
}

TEST_CASE("replication_accuracy: oracle, adversarial and bounds") {
    auto schema = separable_schema();
    auto test = generate_corpus(schema, 400, 17, SplitTag::test);
    CHECK(replication_accuracy(OraclePolicy{}, test) == doctest::Approx(1.0));

    long zeros = 0;
    for (const auto& inst : test.instances)
        if (inst.logged_action == 0) ++zeros;
    double expected = static_cast<double>(zeros) / test.instances.size();
    CHECK(replication_accuracy(FixedIndexPolicy{}, test) == doctest::Approx(expected).epsilon(1e-12));

    auto model = untrained_model(schema, test, tiny_config());
    double acc = replication_accuracy(model, test);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK_THROWS_AS(replication_accuracy(OraclePolicy{}, Dataset{}), InputError);
}

TEST_CASE("per_intent_accuracy: grouping, counts and oracle errors") {
    auto schema = separable_schema();
    auto test = generate_corpus(schema, 300, 18, SplitTag::test);
    auto by_intent = per_intent_accuracy(OraclePolicy{}, test);
    int total = 0;
    for (auto& [intent, st] : by_intent) {
        CHECK(st.accuracy == doctest::Approx(1.0));
        total += st.count;
    }
    CHECK(total == 300);

    // single-intent test set: map of size 1 whose accuracy matches the scalar
    auto single = generate_corpus_for_intents(schema, {0}, 60, 19);
    WrongOnIdsPolicy wp;
    wp.wrong_ids = {single.instances[0].instance_id, single.instances[1].instance_id};
    auto m = per_intent_accuracy(wp, single);
    REQUIRE(m.size() == 1);
    CHECK(m.begin()->second.count == 60);
    CHECK(m.begin()->second.accuracy == doctest::Approx(replication_accuracy(wp, single)));

    // two-intent set with known per-intent oracle errors
    auto two_a = generate_corpus_for_intents(schema, {0}, 4, 20);
    auto two_b = generate_corpus_for_intents(schema, {3}, 6, 21);
    Dataset two;
    two.schema = schema;
    int id = 0;
    for (auto ds : {&two_a, &two_b})
        for (auto inst : ds->instances) {
            inst.instance_id = "x" + std::to_string(id++);
            two.instances.push_back(inst);
        }
    WrongOnIdsPolicy wp2;
    wp2.wrong_ids = {"x0", "x4", "x5"};  // one error on intent 0, two on intent 3
    // skip instances with a single hypothesis: the oracle cannot be wrong there
    for (auto& inst : two.instances)
        if (wp2.wrong_ids.count(inst.instance_id) && inst.hypotheses.size() == 1)
            inst.hypotheses.push_back(inst.hypotheses[0]);
    auto m2 = per_intent_accuracy(wp2, two);
    REQUIRE(m2.size() == 2);
    CHECK(m2.at(0).accuracy == doctest::Approx(3.0 / 4.0));
    CHECK(m2.at(0).count == 4);
    CHECK(m2.at(3).accuracy == doctest::Approx(4.0 / 6.0));
    CHECK(m2.at(3).count == 6);
}

TEST_CASE("router loss gradients match finite differences") {
    auto schema = separable_schema();
    auto ds = generate_corpus(schema, 6, 23);
    RouterConfig cfg;
    cfg.word_embedding_dim = 6;
    cfg.categorical_embedding_dim = 4;
    cfg.text_encoder_hidden = 5;
    cfg.hypothesis_sequence_hidden = 5;
    cfg.mlp_hidden = 6;
    cfg.seed = 3;
    auto model = untrained_model(schema, ds, cfg);
    std::vector<const RoutingInstance*> batch;
    for (const auto& inst : ds.instances) batch.push_back(&inst);

    auto loss_fn = [&]() {
        Graph g;
        return model.batch_loss(g, batch)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(model.batch_loss(g, batch));
    };
    auto res = gradcheck(model.params(), loss_fn, grad_fn, 4, 29);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("router checkpoint round trip") {
    auto schema = separable_schema();
    auto train = generate_corpus(schema, 120, 31);
    auto valid = generate_corpus(schema, 40, 32);
    RouterConfig cfg = tiny_config();
    cfg.epochs = 2;
    auto model = train_router(train, valid, cfg);
    auto path = (std::filesystem::temp_directory_path() / "tailaug_router.ckpt").string();
    model.save(path);
    auto loaded = RouterModel::load(path, schema);
    for (const auto& inst : valid.instances) {
        auto a = model.route(inst);
        auto b = loaded.route(inst);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    std::remove(path.c_str());
}
