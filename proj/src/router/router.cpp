#include "tailaug/router/router.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/core/checkpoint.hpp"
#include "tailaug/core/errors.hpp"
#include "tailaug/core/optim.hpp"
#include "tailaug/text/vocab_build.hpp"

namespace tailaug::router {

using corpus::ConfidenceBin;
using corpus::Dataset;
using corpus::Hypothesis;
using corpus::RoutingInstance;

void RouterConfig::validate() const {
    if (word_embedding_dim < 1 || categorical_embedding_dim < 1 || text_encoder_hidden < 1 ||
        hypothesis_sequence_hidden < 1 || mlp_hidden < 1)
        throw InputError("router config: all dims must be >= 1");
    if (learning_rate <= 0) throw InputError("router config: learning rate must be > 0");
    if (batch_size < 1) throw InputError("router config: batch size must be >= 1");
    if (epochs < 0) throw InputError("router config: epochs must be >= 0");
}

RouterModel::RouterModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, RouterConfig config)
    : schema_(std::move(schema)), vocab_(std::move(vocab)), config_(config) {
    config_.validate();
    Rng rng(config_.seed);
    const auto& s = *schema_;
    int wd = config_.word_embedding_dim;
    int cd = config_.categorical_embedding_dim;
    word_emb_ = &params_.add("word_emb", Tensor::xavier(vocab_.size(), wd, rng));
    device_type_emb_ = &params_.add("device_type_emb", Tensor::xavier((int)s.device_types.size(), cd, rng));
    device_status_emb_ = &params_.add("device_status_emb", Tensor::xavier((int)s.device_statuses.size(), cd, rng));
    domain_emb_ = &params_.add("domain_emb", Tensor::xavier((int)s.domains.size(), cd, rng));
    intent_emb_ = &params_.add("intent_emb", Tensor::xavier((int)s.intents.size(), cd, rng));
    slot_key_emb_ = &params_.add("slot_key_emb", Tensor::xavier((int)s.slot_keys.size(), cd, rng));
    confidence_emb_ = &params_.add("confidence_emb", Tensor::xavier(3, cd, rng));
    skill_emb_ = &params_.add("skill_emb", Tensor::xavier((int)s.skills.size(), cd, rng));

    text_fwd_ = nn::LstmCell(params_, "text_fwd", wd, config_.text_encoder_hidden, rng);
    text_bwd_ = nn::LstmCell(params_, "text_bwd", wd, config_.text_encoder_hidden, rng);
    int d = encoded_layout().total;
    hyp_fwd_ = nn::LstmCell(params_, "hyp_fwd", d, config_.hypothesis_sequence_hidden, rng);
    hyp_bwd_ = nn::LstmCell(params_, "hyp_bwd", d, config_.hypothesis_sequence_hidden, rng);

    int n_mlps = config_.share_mlp ? 1 : schema_->max_hypotheses;
    for (int i = 0; i < n_mlps; ++i) {
        std::string tag = config_.share_mlp ? std::string("mlp") : "mlp" + std::to_string(i);
        mlp_hidden_.emplace_back(params_, tag + ".hidden", 2 * config_.hypothesis_sequence_hidden,
                                 config_.mlp_hidden, rng);
        mlp_out_.emplace_back(params_, tag + ".out", config_.mlp_hidden, 1, rng);
    }
}

EncodedLayout RouterModel::encoded_layout() const {
    EncodedLayout l;
    int cd = config_.categorical_embedding_dim;
    l.text = 0;
    l.device_type = 2 * config_.text_encoder_hidden;
    l.device_status = l.device_type + cd;
    l.domain = l.device_status + cd;
    l.intent = l.domain + cd;
    l.slot_bag = l.intent + cd;
    l.confidence = l.slot_bag + cd;
    l.skill = l.confidence + cd;
    l.total = l.skill + cd;
    return l;
}

namespace {

std::vector<int> token_ids(const text::Vocab& vocab, const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

void check_categoricals(const corpus::CorpusSchema& s, const Hypothesis& h) {
    auto ok = [](int id, size_t n) { return id >= 0 && id < static_cast<int>(n); };
    if (!ok(h.device_type, s.device_types.size()) || !ok(h.device_status, s.device_statuses.size()) ||
        !ok(h.nlu.domain, s.domains.size()) || !ok(h.nlu.intent, s.intents.size()) ||
        !ok(h.skill, s.skills.size()))
        throw VocabError("hypothesis carries a categorical id outside the schema vocabularies");
    for (const auto& slot : h.nlu.slots)
        if (!ok(slot.key, s.slot_keys.size())) throw VocabError("slot key id outside the schema vocabulary");
}

}  // namespace

RouterModel::BatchForward RouterModel::forward_batch(Graph& g,
                                                     const std::vector<const RoutingInstance*>& batch) const {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw InputError("route: empty batch");

    // ---- shared utterance text through the BiLSTM encoder ----
    int text_hidden = config_.text_encoder_hidden;
    int max_len = 1;
    std::vector<std::vector<int>> word_ids(B);
    for (int b = 0; b < B; ++b) {
        const auto& inst = *batch[b];
        if (inst.hypotheses.empty()) throw InputError("route: instance has no hypotheses");
        word_ids[b] = token_ids(vocab_, inst.hypotheses[0].tokens);
        if (word_ids[b].empty()) throw InputError("route: empty utterance");
        max_len = std::max(max_len, static_cast<int>(word_ids[b].size()));
    }

    auto step_ids = [&](int t) {
        std::vector<int> ids(B);
        for (int b = 0; b < B; ++b) ids[b] = t < (int)word_ids[b].size() ? word_ids[b][t] : text::Vocab::kPad;
        return ids;
    };
    auto step_mask = [&](int t) {
        Tensor m(B, 1);
        for (int b = 0; b < B; ++b) m.data[b] = t < (int)word_ids[b].size() ? 1.0 : 0.0;
        return m;
    };

    nn::LstmCell::State fs{g.constant(Tensor(B, text_hidden)), g.constant(Tensor(B, text_hidden))};
    for (int t = 0; t < max_len; ++t) {
        auto x = ops::embed(g, *word_emb_, step_ids(t));
        auto mask = g.constant(step_mask(t));
        auto nxt = text_fwd_.step(g, x, fs);
        fs.h = nn::masked_update(g, nxt.h, fs.h, mask);
        fs.c = nn::masked_update(g, nxt.c, fs.c, mask);
    }
    nn::LstmCell::State bs{g.constant(Tensor(B, text_hidden)), g.constant(Tensor(B, text_hidden))};
    for (int t = max_len - 1; t >= 0; --t) {
        auto x = ops::embed(g, *word_emb_, step_ids(t));
        auto mask = g.constant(step_mask(t));
        auto nxt = text_bwd_.step(g, x, bs);
        bs.h = nn::masked_update(g, nxt.h, bs.h, mask);
        bs.c = nn::masked_update(g, nxt.c, bs.c, mask);
    }
    auto text_enc = ops::concat_cols(g, {fs.h, bs.h});  // B x 2*text_hidden

    // ---- hypotheses sorted by confidence bin, stable on position ----
    BatchForward out;
    out.sort_order.resize(B);
    int n_max = 1;
    for (int b = 0; b < B; ++b) {
        out.sort_order[b] = corpus::confidence_order(*batch[b]);
        n_max = std::max(n_max, static_cast<int>(out.sort_order[b].size()));
    }
    if (!config_.share_mlp && n_max > schema_->max_hypotheses)
        throw InputError("route: more hypotheses than positional MLPs");

    int cd = config_.categorical_embedding_dim;
    std::vector<NodeP> position_embs(n_max);
    std::vector<Tensor> hyp_masks(n_max);
    for (int j = 0; j < n_max; ++j) {
        std::vector<int> dt(B), ds(B), dom(B), intent(B), conf(B), skill(B);
        std::vector<int> slot_ids;
        Tensor slot_avg(B, 0);
        std::vector<std::pair<int, int>> slot_ranges(B, {0, 0});
        Tensor mask(B, 1);
        for (int b = 0; b < B; ++b) {
            const auto& inst = *batch[b];
            bool valid = j < static_cast<int>(inst.hypotheses.size());
            mask.data[b] = valid ? 1.0 : 0.0;
            const Hypothesis& h = inst.hypotheses[valid ? out.sort_order[b][j] : 0];
            check_categoricals(*schema_, h);
            dt[b] = h.device_type;
            ds[b] = h.device_status;
            dom[b] = h.nlu.domain;
            intent[b] = h.nlu.intent;
            conf[b] = static_cast<int>(h.confidence);
            skill[b] = h.skill;
            slot_ranges[b].first = static_cast<int>(slot_ids.size());
            if (valid)
                for (const auto& slot : h.nlu.slots) slot_ids.push_back(slot.key);
            slot_ranges[b].second = static_cast<int>(slot_ids.size());
        }
        NodeP slot_bag;
        if (slot_ids.empty()) {
            slot_bag = g.constant(Tensor(B, cd));
        } else {
            Tensor avg(B, static_cast<int>(slot_ids.size()));
            for (int b = 0; b < B; ++b) {
                int k = slot_ranges[b].second - slot_ranges[b].first;
                for (int i = slot_ranges[b].first; i < slot_ranges[b].second; ++i) avg.at(b, i) = 1.0 / k;
            }
            slot_bag = ops::matmul(g, g.constant(std::move(avg)), ops::embed(g, *slot_key_emb_, slot_ids));
        }
        position_embs[j] = ops::concat_cols(
            g, {text_enc, ops::embed(g, *device_type_emb_, dt), ops::embed(g, *device_status_emb_, ds),
                ops::embed(g, *domain_emb_, dom), ops::embed(g, *intent_emb_, intent), slot_bag,
                ops::embed(g, *confidence_emb_, conf), ops::embed(g, *skill_emb_, skill)});
        hyp_masks[j] = mask;
    }

    // ---- BiLSTM over the sorted hypothesis sequence ----
    int hh = config_.hypothesis_sequence_hidden;
    std::vector<NodeP> fwd_states(n_max), bwd_states(n_max);
    nn::LstmCell::State hf{g.constant(Tensor(B, hh)), g.constant(Tensor(B, hh))};
    for (int j = 0; j < n_max; ++j) {
        auto mask = g.constant(hyp_masks[j]);
        auto nxt = hyp_fwd_.step(g, position_embs[j], hf);
        hf.h = nn::masked_update(g, nxt.h, hf.h, mask);
        hf.c = nn::masked_update(g, nxt.c, hf.c, mask);
        fwd_states[j] = hf.h;
    }
    nn::LstmCell::State hb{g.constant(Tensor(B, hh)), g.constant(Tensor(B, hh))};
    for (int j = n_max - 1; j >= 0; --j) {
        auto mask = g.constant(hyp_masks[j]);
        auto nxt = hyp_bwd_.step(g, position_embs[j], hb);
        hb.h = nn::masked_update(g, nxt.h, hb.h, mask);
        hb.c = nn::masked_update(g, nxt.c, hb.c, mask);
        bwd_states[j] = hb.h;
    }

    // ---- per-position scoring MLP, invalid positions masked to -1e9 ----
    std::vector<NodeP> logit_cols(n_max);
    for (int j = 0; j < n_max; ++j) {
        const nn::Linear& lin1 = mlp_hidden_[config_.share_mlp ? 0 : j];
        const nn::Linear& lin2 = mlp_out_[config_.share_mlp ? 0 : j];
        auto h = ops::concat_cols(g, {fwd_states[j], bwd_states[j]});
        auto logit = lin2(g, ops::vtanh(g, lin1(g, h)));  // B x 1
        Tensor pad(B, 1);
        for (int b = 0; b < B; ++b) pad.data[b] = hyp_masks[j].data[b] > 0.5 ? 0.0 : -1e9;
        logit_cols[j] = ops::add(g, logit, g.constant(std::move(pad)));
    }
    out.logits = ops::concat_cols(g, logit_cols);  // B x n_max
    return out;
}

std::vector<double> RouterModel::route(const RoutingInstance& inst) const {
    if (inst.hypotheses.empty()) throw InputError("route: empty hypothesis list");
    Graph g;
    auto fwd = forward_batch(g, {&inst});
    auto probs = ops::softmax_rows(g, fwd.logits);
    int n = static_cast<int>(inst.hypotheses.size());
    std::vector<double> out(n, 0.0);
    for (int j = 0; j < n; ++j) out[fwd.sort_order[0][j]] = probs->val.at(0, j);
    return out;
}

Tensor RouterModel::encode_hypothesis(const Hypothesis& h) const {
    check_categoricals(*schema_, h);
    if (h.tokens.empty()) throw InputError("encode_hypothesis: empty utterance");
    Graph g;
    RoutingInstance inst;
    inst.hypotheses = {h};
    inst.logged_action = 0;
    // reuse the batched path for the text; position embedding j=0 is e(h)
    auto ids = token_ids(vocab_, h.tokens);
    int th = config_.text_encoder_hidden;
    nn::LstmCell::State fs{g.constant(Tensor(1, th)), g.constant(Tensor(1, th))};
    for (size_t t = 0; t < ids.size(); ++t) fs = text_fwd_.step(g, ops::embed(g, *word_emb_, {ids[t]}), fs);
    nn::LstmCell::State bs{g.constant(Tensor(1, th)), g.constant(Tensor(1, th))};
    for (size_t t = ids.size(); t-- > 0;) bs = text_bwd_.step(g, ops::embed(g, *word_emb_, {ids[t]}), bs);

    int cd = config_.categorical_embedding_dim;
    NodeP slot_bag;
    if (h.nlu.slots.empty()) {
        slot_bag = g.constant(Tensor(1, cd));
    } else {
        std::vector<int> slot_ids;
        for (const auto& slot : h.nlu.slots) slot_ids.push_back(slot.key);
        Tensor avg(1, static_cast<int>(slot_ids.size()), 1.0 / slot_ids.size());
        slot_bag = ops::matmul(g, g.constant(std::move(avg)), ops::embed(g, *slot_key_emb_, slot_ids));
    }
    auto e = ops::concat_cols(
        g, {fs.h, bs.h, ops::embed(g, *device_type_emb_, {h.device_type}),
            ops::embed(g, *device_status_emb_, {h.device_status}), ops::embed(g, *domain_emb_, {h.nlu.domain}),
            ops::embed(g, *intent_emb_, {h.nlu.intent}), slot_bag,
            ops::embed(g, *confidence_emb_, {static_cast<int>(h.confidence)}),
            ops::embed(g, *skill_emb_, {h.skill})});
    return e->val;
}

NodeP RouterModel::batch_loss(Graph& g, const std::vector<const RoutingInstance*>& batch) const {
    auto fwd = forward_batch(g, batch);
    std::vector<int> targets(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) {
        const auto& order = fwd.sort_order[b];
        int logged = batch[b]->logged_action;
        targets[b] = static_cast<int>(std::find(order.begin(), order.end(), logged) - order.begin());
    }
    auto nll = ops::pick_per_row(g, ops::log_softmax_rows(g, fwd.logits), targets);
    return ops::scale(g, ops::mean_all(g, nll), -1.0);
}

double RouterModel::accuracy(const Dataset& ds) const {
    if (ds.instances.empty()) throw InputError("accuracy: empty dataset");
    const int chunk = 256;
    long correct = 0;
    for (size_t start = 0; start < ds.instances.size(); start += chunk) {
        size_t end = std::min(ds.instances.size(), start + chunk);
        std::vector<const RoutingInstance*> batch;
        for (size_t i = start; i < end; ++i) batch.push_back(&ds.instances[i]);
        Graph g;
        auto fwd = forward_batch(g, batch);
        for (size_t b = 0; b < batch.size(); ++b) {
            int n = static_cast<int>(batch[b]->hypotheses.size());
            int best = 0;
            double best_v = fwd.logits->val.at(static_cast<int>(b), 0);
            for (int j = 1; j < n; ++j) {
                double v = fwd.logits->val.at(static_cast<int>(b), j);
                if (v > best_v) {
                    best_v = v;
                    best = j;
                }
            }
            // argmax in original order with low-index tie breaking
            int orig_best = fwd.sort_order[b][best];
            double tol_best = best_v;
            for (int j = 0; j < n; ++j) {
                double v = fwd.logits->val.at(static_cast<int>(b), j);
                if (v == tol_best && fwd.sort_order[b][j] < orig_best) orig_best = fwd.sort_order[b][j];
            }
            if (orig_best == batch[b]->logged_action) ++correct;
        }
    }
    return static_cast<double>(correct) / ds.instances.size();
}

RouterModel train_router(const Dataset& train, const Dataset& valid, const RouterConfig& config) {
    config.validate();
    if (train.instances.empty()) throw InputError("train_router: empty training set");
    if (!train.schema || !valid.schema || train.schema->hash() != valid.schema->hash())
        throw InputError("train_router: datasets must share one schema");

    text::Vocab vocab;
    text::add_corpus_words(vocab, train);
    RouterModel model(train.schema, std::move(vocab), config);

    Adam opt(model.params(), config.learning_rate);
    Rng rng(config.seed);

    std::vector<size_t> order(train.instances.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_acc = -1.0;
    std::vector<Tensor> best_snapshot = model.params().snapshot_values();
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long batches = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<const RoutingInstance*> batch;
            for (size_t i = start; i < end; ++i) batch.push_back(&train.instances[order[i]]);
            Graph g;
            auto loss = model.batch_loss(g, batch);
            double lv = loss->val.data[0];
            if (!std::isfinite(lv)) throw TrainingError("router training diverged (non-finite loss)", epoch);
            loss_sum += lv;
            ++batches;
            g.backward(loss);
            opt.step();
        }
        EpochStats st;
        st.train_loss = loss_sum / std::max(1L, batches);
        st.valid_accuracy = valid.instances.empty() ? 0.0 : model.accuracy(valid);
        model.history_.push_back(st);
        if (st.valid_accuracy > best_acc) {
            best_acc = st.valid_accuracy;
            best_snapshot = model.params().snapshot_values();
        }
    }
    if (config.epochs > 0) model.params().restore_values(best_snapshot);
    return model;
}

double replication_accuracy(const RoutingPolicy& policy, const Dataset& test) {
    if (test.instances.empty()) throw InputError("replication_accuracy: empty test set");
    long correct = 0;
    for (const auto& inst : test.instances) {
        auto probs = policy.route(inst);
        int best = 0;
        for (size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[best]) best = static_cast<int>(j);
        if (best == inst.logged_action) ++correct;
    }
    return static_cast<double>(correct) / test.instances.size();
}

std::map<int, IntentAccuracy> per_intent_accuracy(const RoutingPolicy& policy, const Dataset& test) {
    if (test.instances.empty()) throw InputError("per_intent_accuracy: empty test set");
    std::map<int, long> correct;
    std::map<int, int> count;
    for (const auto& inst : test.instances) {
        int intent = inst.hypotheses[inst.logged_action].nlu.intent;
        auto probs = policy.route(inst);
        int best = 0;
        for (size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[best]) best = static_cast<int>(j);
        ++count[intent];
        if (best == inst.logged_action) ++correct[intent];
    }
    std::map<int, IntentAccuracy> out;
    for (auto& [intent, c] : count)
        out[intent] = {static_cast<double>(correct[intent]) / c, c};
    return out;
}

void RouterModel::save(const std::string& path) const {
    nlohmann::json manifest;
    manifest["kind"] = "router";
    manifest["format_version"] = 1;
    manifest["schema_hash"] = schema_->hash();
    manifest["vocab"] = vocab_.to_json();
    manifest["config"] = {{"word_embedding_dim", config_.word_embedding_dim},
                          {"categorical_embedding_dim", config_.categorical_embedding_dim},
                          {"text_encoder_hidden", config_.text_encoder_hidden},
                          {"hypothesis_sequence_hidden", config_.hypothesis_sequence_hidden},
                          {"mlp_hidden", config_.mlp_hidden},
                          {"learning_rate", config_.learning_rate},
                          {"batch_size", config_.batch_size},
                          {"epochs", config_.epochs},
                          {"seed", config_.seed},
                          {"share_mlp", config_.share_mlp}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history_) hist.push_back({{"train_loss", h.train_loss}, {"valid_accuracy", h.valid_accuracy}});
    manifest["history"] = hist;
    manifest["epoch"] = history_.size();
    manifest["valid_accuracy"] = history_.empty() ? 0.0 : history_.back().valid_accuracy;
    write_checkpoint(path, manifest, params_);
}

RouterModel RouterModel::load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema) {
    Checkpoint ckpt = read_checkpoint(path);
    if (ckpt.manifest.value("kind", "") != "router") throw ParseError("checkpoint is not a router model");
    if (ckpt.manifest.at("schema_hash").get<uint64_t>() != schema->hash())
        throw SchemaError("router checkpoint was trained under a different schema");
    const auto& cj = ckpt.manifest.at("config");
    RouterConfig config;
    config.word_embedding_dim = cj.at("word_embedding_dim");
    config.categorical_embedding_dim = cj.at("categorical_embedding_dim");
    config.text_encoder_hidden = cj.at("text_encoder_hidden");
    config.hypothesis_sequence_hidden = cj.at("hypothesis_sequence_hidden");
    config.mlp_hidden = cj.at("mlp_hidden");
    config.learning_rate = cj.at("learning_rate");
    config.batch_size = cj.at("batch_size");
    config.epochs = cj.at("epochs");
    config.seed = cj.at("seed");
    config.share_mlp = cj.at("share_mlp");
    RouterModel model(std::move(schema), text::Vocab::from_json(ckpt.manifest.at("vocab")), config);
    load_params(ckpt, model.params_);
    for (const auto& h : ckpt.manifest.at("history"))
        model.history_.push_back({h.at("train_loss"), h.at("valid_accuracy")});
    return model;
}

}  // namespace tailaug::router
