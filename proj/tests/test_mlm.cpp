#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/gradcheck.hpp"
#include "tailaug/corpus/generate.hpp"
#include "tailaug/gen/mlm.hpp"
#include "tailaug/metrics/metrics.hpp"
#include "tailaug/text/vocab_build.hpp"
#include "test_util.hpp"

using namespace tailaug;
using namespace tailaug::corpus;
using namespace tailaug::gen;

namespace {

MlmConfig tiny_config() {
    MlmConfig c;
    c.layers_total = 2;
    c.model_dim = 24;
    c.heads = 2;
    c.cond_label_dim = 8;
    c.prior_bottleneck = 8;
    c.batch_size = 8;
    c.epochs = 2;
    c.seed = 5;
    return c;
}

MlmModel untrained(std::shared_ptr<const CorpusSchema> schema, const Dataset& ds, const MlmConfig& cfg) {
    text::Vocab vocab;
    text::add_corpus_words(vocab, ds);
    return MlmModel(schema, std::move(vocab), cfg);
}

}  // namespace

TEST_CASE("mask_sequence: degenerate probability floors and ceilings") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 10, 1);
    MlmConfig cfg = tiny_config();

    cfg.mask_prob_categorical = 0.0;
    cfg.mask_prob_utterance = 0.0;
    auto m0 = untrained(schema, ds, cfg);
    Rng rng(3);
    auto seq = m0.build_sequence(ds.instances[0]);
    auto masked = m0.mask_sequence(seq, rng);
    CHECK(masked.mask_positions.size() == 1);  // resampling forces one mask

    cfg.mask_prob_categorical = 1.0;
    cfg.mask_prob_utterance = 1.0;
    auto m1 = untrained(schema, ds, cfg);
    auto all_masked = m1.mask_sequence(seq, rng);
    CHECK(all_masked.mask_positions.size() == seq.size() - 2);  // all but CLS/SEP
    for (int p : all_masked.mask_positions) {
        CHECK(p != 3);
        CHECK(p != (int)seq.size() - 1);
    }

    std::vector<int> bad = {1, 2, 3};
    CHECK_THROWS_AS(m1.mask_sequence(bad, rng), InputError);
}

TEST_CASE("mask_sequence: empirical rates hit (0.9, 0.3) within 2 points") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 10, 2);
    auto model = untrained(schema, ds, tiny_config());
    auto seq = model.build_sequence(ds.instances[0]);
    int n_words = (int)seq.size() - 5;  // minus 3 categorical + CLS + SEP
    Rng rng(7);
    long cat_masked = 0, word_masked = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto m = model.mask_sequence(seq, rng);
        for (int p : m.mask_positions) {
            if (p < 3)
                ++cat_masked;
            else
                ++word_masked;
        }
    }
    CHECK(std::abs(cat_masked / (3.0 * draws) - 0.9) < 0.02);
    CHECK(std::abs(word_masked / (double(n_words) * draws) - 0.3) < 0.02);
}

TEST_CASE("loss: masked-only objective has exactly zero logit gradients elsewhere") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 5, 3);
    auto model = untrained(schema, ds, tiny_config());
    Rng rng(9);
    auto seq = model.build_sequence(ds.instances[0]);
    auto masked = model.mask_sequence(seq, rng);
    Tensor eps(1, model.config().model_dim);
    for (double& v : eps.data) v = rng.normal();

    Graph g;
    auto nodes = model.loss_graph(g, masked, Condition::from_top1(ds.instances[0]), eps);
    // backprop only the cross-entropy so the latent path does not touch logits
    g.backward(nodes.masked_ce);
    REQUIRE(nodes.logits->grad.rows == nodes.logits->val.rows);
    std::set<int> masked_set(masked.mask_positions.begin(), masked.mask_positions.end());
    for (int p = 0; p < nodes.logits->val.rows; ++p) {
        double row_norm = 0.0;
        for (int j = 0; j < nodes.logits->val.cols; ++j) row_norm += std::abs(nodes.logits->grad.at(p, j));
        if (masked_set.count(p))
            CHECK(row_norm > 0.0);
        else
            CHECK(row_norm == 0.0);
    }
    CHECK(nodes.kl->val.data[0] >= 0.0);
}

TEST_CASE("mlm loss gradients match finite differences") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 3, 4);
    MlmConfig cfg = tiny_config();
    cfg.model_dim = 12;
    cfg.heads = 2;
    auto model = untrained(schema, ds, cfg);
    Rng rng(11);
    auto seq = model.build_sequence(ds.instances[0]);
    auto masked = model.mask_sequence(seq, rng);
    Tensor eps(1, cfg.model_dim);
    for (double& v : eps.data) v = rng.normal();
    auto cond = Condition::from_top1(ds.instances[0]);

    auto loss_fn = [&]() {
        Graph g;
        return model.loss_graph(g, masked, cond, eps).objective->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(model.loss_graph(g, masked, cond, eps).objective);
    };
    auto res = gradcheck(model.params(), loss_fn, grad_fn, 4, 17);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("train_mlm: seed determinism and non-negative KL trace") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 60, 5);
    MlmConfig cfg = tiny_config();
    auto m1 = train_mlm(ds, cfg);
    auto m2 = train_mlm(ds, cfg);
    REQUIRE(m1.history().size() == cfg.epochs);
    for (size_t i = 0; i < m1.history().size(); ++i) {
        CHECK(m1.history()[i].masked_ce == m2.history()[i].masked_ce);
        CHECK(m1.history()[i].kl >= 0.0);
    }
    CHECK_THROWS_AS(train_mlm(Dataset{}, cfg), InputError);
}

TEST_CASE("mlm overfits a single sentence to high masked recovery") {
    auto schema = testutil::separable_schema();
    auto base = generate_corpus(schema, 1, 6);
    Dataset ds;
    ds.schema = schema;
    for (int i = 0; i < 8; ++i) {
        auto inst = base.instances[0];
        inst.instance_id = "dup" + std::to_string(i);
        ds.instances.push_back(inst);
    }
    MlmConfig cfg = tiny_config();
    cfg.epochs = 120;
    cfg.learning_rate = 3e-4;
    auto model = train_mlm(ds, cfg);

    // mask twice per run and check argmax recovery of the originals
    Rng rng(13);
    auto seq = model.build_sequence(ds.instances[0]);
    long total = 0, recovered = 0;
    for (int t = 0; t < 50; ++t) {
        auto masked = model.mask_sequence(seq, rng);
        Tensor z = model.sample_prior(Condition::from_top1(ds.instances[0]), rng);
        for (size_t i = 0; i < masked.mask_positions.size(); ++i) {
            int p = masked.mask_positions[i];
            if (p == 2) continue;  // confidence slot is not returned by perturb
            auto probs = model.predictive_at(masked, Condition::from_top1(ds.instances[0]), z, p);
            auto cands = [&] {
                // recover candidate list the same way predictive_at does
                std::vector<int> c;
                if (p == 0)
                    for (int k = 0; k < 2; ++k) c.push_back(model.device_type_token(k));
                else if (p == 1)
                    for (int k = 0; k < 2; ++k) c.push_back(model.device_status_token(k));
                else
                    for (int k = 0; k < model.vocab().size(); ++k)
                        if (model.is_word_token(k)) c.push_back(k);
                return c;
            }();
            int best = 0;
            for (size_t j = 1; j < probs.size(); ++j)
                if (probs[j] > probs[best]) best = (int)j;
            ++total;
            if (cands[best] == masked.originals[i]) ++recovered;
        }
    }
    CHECK(total > 0);
    CHECK(static_cast<double>(recovered) / total >= 0.95);
}

TEST_CASE("perturb: position preservation and zero-content-word passthrough") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 80, 7);
    MlmConfig cfg = tiny_config();
    cfg.epochs = 3;
    auto model = train_mlm(ds, cfg);

    Rng rng(15);
    // function-word-only utterance: nothing maskable in the text
    RoutingInstance inst = ds.instances[0];
    for (auto& h : inst.hypotheses) h.tokens = {"what", "is", "the", "that"};
    auto out = model.perturb(inst, rng);
    CHECK(out.tokens == inst.hypotheses[0].tokens);

    // content words outside masked positions survive verbatim
    LexiconTagger only_first({ds.instances[1].hypotheses[0].tokens[0]});
    MlmConfig cfg_all = cfg;
    auto& inst2 = ds.instances[1];
    for (int t = 0; t < 10; ++t) {
        auto res = model.perturb(inst2, rng, &only_first);
        REQUIRE(res.tokens.size() == inst2.hypotheses[0].tokens.size());
        for (size_t i = 1; i < res.tokens.size(); ++i) CHECK(res.tokens[i] == inst2.hypotheses[0].tokens[i]);
    }

    auto raw = untrained(schema, ds, cfg);
    CHECK_THROWS_AS(raw.perturb(inst, rng), StateError);
}

TEST_CASE("perturb: monte-carlo device marginal tracks the predictive softmax") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 100, 8);
    MlmConfig cfg = tiny_config();
    cfg.epochs = 2;
    cfg.mask_prob_categorical = 1.0;  // device fields always refilled
    cfg.mask_prob_utterance = 0.0;
    auto model = train_mlm(ds, cfg);

    const auto& inst = ds.instances[0];
    Condition c = Condition::from_top1(inst);
    auto seq = model.build_sequence(inst);
    MaskedSequence masked;
    masked.tokens = seq;
    for (int p : {0, 1}) {
        masked.mask_positions.push_back(p);
        masked.originals.push_back(seq[p]);
        masked.tokens[p] = text::Vocab::kMask;
    }

    // the latent is integrated by sampling in perturb; freeze it by using a
    // prior with tiny variance: compare against the predictive at the mean
    Rng rng(21);
    const int n = 1000;
    std::vector<int> mc_counts(schema->device_types.size(), 0);
    std::vector<double> mean_pred(schema->device_types.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        Tensor z = model.sample_prior(c, rng);
        auto pred = model.predictive_at(masked, c, z, 0);
        for (size_t k = 0; k < pred.size(); ++k) mean_pred[k] += pred[k] / n;
        ++mc_counts[rng.categorical(pred)];
    }
    std::vector<int> pred_counts;
    for (double p : mean_pred) pred_counts.push_back(static_cast<int>(std::round(p * n)));
    std::vector<int> mc_samples, pred_samples;
    for (size_t k = 0; k < mc_counts.size(); ++k) {
        for (int i = 0; i < mc_counts[k]; ++i) mc_samples.push_back((int)k);
        for (int i = 0; i < pred_counts[k]; ++i) pred_samples.push_back((int)k);
    }
    double kl = metrics::field_kl(pred_samples, mc_samples, (int)schema->device_types.size(), 1e-3);
    CHECK(kl <= 0.1);
}

TEST_CASE("condition injection shifts masked-position distributions") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 150, 9);
    MlmConfig cfg = tiny_config();
    cfg.epochs = 6;
    cfg.learning_rate = 3e-4;
    auto model = train_mlm(ds, cfg);

    // find two instances with different intents, mask one content word
    const RoutingInstance* a = nullptr;
    const RoutingInstance* b = nullptr;
    for (const auto& inst : ds.instances) {
        auto c = Condition::from_top1(inst);
        if (c.intent == 0 && !a) a = &inst;
        if (c.intent == 3 && !b) b = &inst;
    }
    REQUIRE(a);
    REQUIRE(b);
    auto seq = model.build_sequence(*a);
    MaskedSequence masked;
    masked.tokens = seq;
    masked.mask_positions = {4};
    masked.originals = {seq[4]};
    masked.tokens[4] = text::Vocab::kMask;

    Tensor z(1, cfg.model_dim);  // shared fixed latent
    auto pa = model.predictive_at(masked, Condition::from_top1(*a), z, 4);
    auto pb = model.predictive_at(masked, Condition::from_top1(*b), z, 4);
    double tv = 0.0;
    for (size_t i = 0; i < pa.size(); ++i) tv += std::abs(pa[i] - pb[i]);
    CHECK(tv / 2.0 > 0.0);
}

TEST_CASE("mlm checkpoint round trip") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 40, 10);
    MlmConfig cfg = tiny_config();
    cfg.epochs = 1;
    auto model = train_mlm(ds, cfg);
    auto path = (std::filesystem::temp_directory_path() / "tailaug_mlm.ckpt").string();
    model.save(path);
    auto loaded = MlmModel::load(path, schema);
    Rng r1(3), r2(3);
    auto o1 = model.perturb(ds.instances[0], r1);
    auto o2 = loaded.perturb(ds.instances[0], r2);
    CHECK(o1.tokens == o2.tokens);
    CHECK(o1.device_type == o2.device_type);
    CHECK(o1.device_status == o2.device_status);
    std::remove(path.c_str());
}
