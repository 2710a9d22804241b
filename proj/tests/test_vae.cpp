#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <cmath>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/gradcheck.hpp"
#include "tailaug/corpus/generate.hpp"
#include "tailaug/gen/vae.hpp"
#include "tailaug/text/vocab_build.hpp"
#include "tailaug/metrics/metrics.hpp"
#include "test_util.hpp"

using namespace tailaug;
using namespace tailaug::corpus;
using namespace tailaug::gen;

namespace {

VaeConfig tiny_config(bool prior_net) {
    VaeConfig c;
    c.desk_scale_factor = 32;  // 512/1024-dim preset shrunk to toy size
    c.batch_size = 16;
    c.epochs = 4;
    c.use_prior_network = prior_net;
    c.seed = 3;
    return c;
}

VaeModel untrained(std::shared_ptr<const CorpusSchema> schema, const Dataset& ds, const VaeConfig& cfg) {
    text::Vocab vocab;
    text::add_corpus_words(vocab, ds);
    return VaeModel(schema, std::move(vocab), cfg);
}

void zero_param(Param* p) { p->value.zero(); }

}  // namespace

TEST_CASE("elbo: kl is zero when the posterior equals the prior") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 20, 1);
    auto cfg = tiny_config(false);
    auto model = untrained(schema, ds, cfg);
    // zeroed posterior head -> mu = 0, logvar = 0 = the N(0, I) prior
    zero_param(model.params().find("posterior_head.W"));
    zero_param(model.params().find("posterior_head.b"));
    Tensor eps(1, model.config().scaled().latent_dim);
    auto [recon, kl] = model.elbo(ds.instances[0].hypotheses[0].tokens, Condition::from_top1(ds.instances[0]), eps);
    CHECK(kl == 0.0);
    CHECK(recon > 0.0);
}

TEST_CASE("elbo: closed-form diagonal-gaussian KL through the model") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 10, 2);
    VaeConfig cfg = tiny_config(false);
    cfg.latent_dim = 64;  // scaled by 32 -> 2
    auto model = untrained(schema, ds, cfg);
    REQUIRE(model.config().scaled().latent_dim == 2);
    zero_param(model.params().find("posterior_head.W"));
    Param* bias = model.params().find("posterior_head.b");
    bias->value.zero();
    bias->value.data[0] = 1.0;  // mu = (1, 0), logvar = (0, 0)
    Tensor eps(1, 2);
    auto [recon, kl] = model.elbo(ds.instances[0].hypotheses[0].tokens, Condition::from_top1(ds.instances[0]), eps);
    CHECK(kl == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("elbo: kl non-negative for arbitrary inputs, both variants") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 40, 3);
    for (bool prior_net : {false, true}) {
        auto model = untrained(schema, ds, tiny_config(prior_net));
        Rng rng(7);
        for (int i = 0; i < 10; ++i) {
            const auto& inst = ds.instances[rng.randint(ds.instances.size())];
            Tensor eps(1, model.config().scaled().latent_dim);
            for (double& v : eps.data) v = rng.normal();
            auto [recon, kl] = model.elbo(inst.hypotheses[0].tokens, Condition::from_top1(inst), eps);
            CHECK(kl >= 0.0);
            CHECK(std::isfinite(recon));
        }
    }
}

TEST_CASE("elbo gradients match finite differences (reparameterized path)") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 4, 5);
    VaeConfig cfg = tiny_config(true);
    cfg.desk_scale_factor = 128;
    auto model = untrained(schema, ds, cfg);
    std::vector<VaeModel::BatchItem> batch;
    for (const auto& inst : ds.instances) batch.push_back(model.make_item(inst));
    Rng rng(11);
    Tensor eps(static_cast<int>(batch.size()), model.config().scaled().latent_dim);
    for (double& v : eps.data) v = rng.normal();

    auto loss_fn = [&]() {
        Graph g;
        return model.elbo_graph(g, batch, eps).objective->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(model.elbo_graph(g, batch, eps).objective);
    };
    auto res = gradcheck(model.params(), loss_fn, grad_fn, 5, 13);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("train_vae: loss decreases and traces are seed-deterministic") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 300, 7);
    VaeConfig cfg = tiny_config(false);
    cfg.epochs = 5;
    auto m1 = train_vae(ds, cfg);
    REQUIRE(m1.history().size() == 5);
    CHECK(m1.history().back().reconstruction < m1.history().front().reconstruction);

    auto m2 = train_vae(ds, cfg);
    for (size_t i = 0; i < m1.history().size(); ++i) {
        CHECK(m1.history()[i].reconstruction == m2.history()[i].reconstruction);
        CHECK(m1.history()[i].kl == m2.history()[i].kl);
    }
    CHECK_THROWS_AS(train_vae(Dataset{}, cfg), InputError);
}

TEST_CASE("train_vae: free KL never reconstructs worse than weighted KL") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 200, 9);
    VaeConfig weighted = tiny_config(false);
    weighted.epochs = 5;
    VaeConfig free_kl = weighted;
    free_kl.kl_weight = 0.0;
    auto m_w = train_vae(ds, weighted);
    auto m_f = train_vae(ds, free_kl);
    CHECK(m_f.history().back().reconstruction <= m_w.history().back().reconstruction + 1e-9);
}

TEST_CASE("sample_utterances: determinism, termination, untrained rejection") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 150, 13);
    VaeConfig cfg = tiny_config(true);
    cfg.epochs = 3;
    auto model = train_vae(ds, cfg);
    auto cond = Condition::from_top1(ds.instances[0]);

    auto s1 = model.sample_utterances(cond, 1, 16, 99);
    auto s2 = model.sample_utterances(cond, 1, 16, 99);
    REQUIRE(s1.size() == 1);
    CHECK(s1[0] == s2[0]);

    auto many = model.sample_utterances(cond, 100, 16, 5);
    CHECK(many.size() == 100);
    for (const auto& t : many) CHECK(t.size() <= 16);
    // unique rate is computable and positive
    std::vector<metrics::TokenSeq> texts(many.begin(), many.end());
    CHECK(metrics::unique_rate_tokens(texts) > 0.0);

    auto raw = untrained(schema, ds, cfg);
    CHECK_THROWS_AS(raw.sample_utterances(cond, 1, 16, 1), StateError);
    CHECK_THROWS_AS(model.sample_utterances(cond, 0, 16, 1), InputError);
}

TEST_CASE("pcVAE: prior network differentiates conditions") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 200, 15);
    VaeConfig cfg = tiny_config(true);
    cfg.epochs = 3;
    auto model = train_vae(ds, cfg);

    Condition c1, c2;
    bool have1 = false, have2 = false;
    for (const auto& inst : ds.instances) {
        auto c = Condition::from_top1(inst);
        if (c.intent == 0 && !have1) {
            c1 = c;
            have1 = true;
        }
        if (c.intent == 3 && !have2) {
            c2 = c;
            have2 = true;
        }
    }
    REQUIRE(have1);
    REQUIRE(have2);
    auto [mu1, lv1] = model.prior_at(c1);
    auto [mu2, lv2] = model.prior_at(c2);
    double diff = 0.0;
    for (int i = 0; i < mu1.size(); ++i) diff += std::abs(mu1.data[i] - mu2.data[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("vae overfits a degenerate one-sentence corpus") {
    auto schema = testutil::separable_schema();
    Dataset ds;
    ds.schema = schema;
    auto seedcorpus = generate_corpus(schema, 1, 17);
    for (int i = 0; i < 16; ++i) {
        auto inst = seedcorpus.instances[0];
        inst.instance_id = "dup" + std::to_string(i);
        ds.instances.push_back(inst);
    }
    // the prior network makes the sampling prior converge onto the (single)
    // posterior, so prior draws decode like training draws
    VaeConfig cfg = tiny_config(true);
    cfg.desk_scale_factor = 32;
    cfg.epochs = 400;
    auto model = train_vae(ds, cfg);
    auto cond = Condition::from_top1(ds.instances[0]);
    auto samples = model.sample_utterances(cond, 50, 16, 23);
    const auto& target = ds.instances[0].hypotheses[0].tokens;
    int hits = 0;
    for (const auto& s : samples)
        if (s == target) ++hits;
    CHECK(hits >= 45);  // >= 90% reproduction
}

TEST_CASE("vae checkpoint round trip preserves behavior") {
    auto schema = testutil::separable_schema();
    auto ds = generate_corpus(schema, 100, 19);
    VaeConfig cfg = tiny_config(true);
    cfg.epochs = 2;
    auto model = train_vae(ds, cfg);
    auto path = (std::filesystem::temp_directory_path() / "tailaug_vae.ckpt").string();
    model.save(path);
    auto loaded = VaeModel::load(path, schema);
    auto cond = Condition::from_top1(ds.instances[0]);
    CHECK(model.sample_utterances(cond, 3, 12, 7) == loaded.sample_utterances(cond, 3, 12, 7));
    Tensor eps(1, model.config().scaled().latent_dim);
    auto a = model.elbo(ds.instances[0].hypotheses[0].tokens, cond, eps);
    auto b = loaded.elbo(ds.instances[0].hypotheses[0].tokens, cond, eps);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    std::remove(path.c_str());
}
