#include "tailaug/gen/vae.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/core/checkpoint.hpp"
#include "tailaug/core/errors.hpp"
#include "tailaug/core/optim.hpp"
#include "tailaug/text/vocab_build.hpp"

namespace tailaug::gen {

using corpus::Condition;
using corpus::Dataset;
using corpus::RoutingInstance;

namespace {
int scaled_dim(int dim, int factor) { return std::max(1, dim / factor); }
}  // namespace

VaeConfig VaeConfig::scaled() const {
    VaeConfig c = *this;
    c.word_embedding_dim = scaled_dim(word_embedding_dim, desk_scale_factor);
    c.utterance_encoder_hidden = scaled_dim(utterance_encoder_hidden, desk_scale_factor);
    c.context_encoder_hidden = scaled_dim(context_encoder_hidden, desk_scale_factor);
    c.decoder_hidden = scaled_dim(decoder_hidden, desk_scale_factor);
    c.latent_dim = scaled_dim(latent_dim, desk_scale_factor);
    c.prior_bottleneck = scaled_dim(prior_bottleneck, desk_scale_factor);
    c.cond_label_dim = scaled_dim(cond_label_dim, desk_scale_factor);
    c.desk_scale_factor = 1;
    return c;
}

void VaeConfig::validate() const {
    if (latent_dim < 1) throw InputError("vae config: latent_dim must be >= 1");
    if (kl_weight < 0) throw InputError("vae config: kl_weight must be >= 0");
    if (desk_scale_factor < 1) throw InputError("vae config: desk_scale_factor must be >= 1");
    if (batch_size < 1 || epochs < 0 || learning_rate <= 0) throw InputError("vae config: bad training params");
}

VaeModel::VaeModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, VaeConfig config)
    : schema_(std::move(schema)), vocab_(std::move(vocab)), config_(config), dims_(config.scaled()) {
    config_.validate();
    Rng rng(config_.seed);
    const auto& s = *schema_;
    const auto& d = dims_;
    word_emb_ = &params_.add("word_emb", Tensor::xavier(vocab_.size(), d.word_embedding_dim, rng));
    domain_emb_ = &params_.add("domain_emb", Tensor::xavier((int)s.domains.size(), d.cond_label_dim, rng));
    intent_emb_ = &params_.add("intent_emb", Tensor::xavier((int)s.intents.size(), d.cond_label_dim, rng));
    slot_key_emb_ = &params_.add("slot_key_emb", Tensor::xavier((int)s.slot_keys.size(), d.cond_label_dim, rng));
    skill_emb_ = &params_.add("skill_emb", Tensor::xavier((int)s.skills.size(), d.cond_label_dim, rng));
    cond_proj_ = nn::Linear(params_, "cond_proj", 4 * d.cond_label_dim, d.context_encoder_hidden, rng);
    enc_fwd_ = nn::GruCell(params_, "enc_fwd", d.word_embedding_dim, d.utterance_encoder_hidden, rng);
    enc_bwd_ = nn::GruCell(params_, "enc_bwd", d.word_embedding_dim, d.utterance_encoder_hidden, rng);
    posterior_head_ = nn::Linear(params_, "posterior_head",
                                 2 * d.utterance_encoder_hidden + d.context_encoder_hidden, 2 * d.latent_dim, rng);
    prior_hidden_ = nn::Linear(params_, "prior_hidden", d.context_encoder_hidden, d.prior_bottleneck, rng);
    prior_head_ = nn::Linear(params_, "prior_head", d.prior_bottleneck, 2 * d.latent_dim, rng);
    dec_init_ = nn::Linear(params_, "dec_init", d.latent_dim + d.context_encoder_hidden, d.decoder_hidden, rng);
    dec_cell_ = nn::GruCell(params_, "dec_cell",
                            d.word_embedding_dim + d.latent_dim + d.context_encoder_hidden, d.decoder_hidden, rng);
    out_proj_ = nn::Linear(params_, "out_proj", d.decoder_hidden, vocab_.size(), rng);
}

std::vector<int> VaeModel::to_ids(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab_.id(t));
    return ids;
}

VaeModel::BatchItem VaeModel::make_item(const RoutingInstance& inst) const {
    BatchItem item;
    item.token_ids = to_ids(inst.hypotheses[0].tokens);
    item.condition = Condition::from_top1(inst);
    return item;
}

VaeModel::CondNodes VaeModel::condition_graph(Graph& g, const std::vector<Condition>& conds) const {
    const int B = static_cast<int>(conds.size());
    std::vector<int> dom(B), intent(B), skill(B);
    std::vector<int> slot_ids;
    std::vector<std::pair<int, int>> ranges(B);
    for (int b = 0; b < B; ++b) {
        dom[b] = conds[b].domain;
        intent[b] = conds[b].intent;
        skill[b] = conds[b].skill;
        ranges[b].first = static_cast<int>(slot_ids.size());
        for (int k : conds[b].slot_keys) slot_ids.push_back(k);
        ranges[b].second = static_cast<int>(slot_ids.size());
    }
    NodeP slot_bag;
    if (slot_ids.empty()) {
        slot_bag = g.constant(Tensor(B, dims_.cond_label_dim));
    } else {
        Tensor avg(B, static_cast<int>(slot_ids.size()));
        for (int b = 0; b < B; ++b) {
            int k = ranges[b].second - ranges[b].first;
            for (int i = ranges[b].first; i < ranges[b].second; ++i) avg.at(b, i) = 1.0 / k;
        }
        slot_bag = ops::matmul(g, g.constant(std::move(avg)), ops::embed(g, *slot_key_emb_, slot_ids));
    }
    auto concat = ops::concat_cols(g, {ops::embed(g, *domain_emb_, dom), ops::embed(g, *intent_emb_, intent),
                                       slot_bag, ops::embed(g, *skill_emb_, skill)});
    return {ops::vtanh(g, cond_proj_(g, concat))};
}

std::pair<NodeP, NodeP> VaeModel::posterior_graph(Graph& g, const std::vector<BatchItem>& batch, NodeP cond) const {
    const int B = static_cast<int>(batch.size());
    int max_len = 1;
    for (const auto& it : batch) max_len = std::max(max_len, static_cast<int>(it.token_ids.size()));

    auto step_ids = [&](int t) {
        std::vector<int> ids(B);
        for (int b = 0; b < B; ++b)
            ids[b] = t < (int)batch[b].token_ids.size() ? batch[b].token_ids[t] : text::Vocab::kPad;
        return ids;
    };
    auto step_mask = [&](int t) {
        Tensor m(B, 1);
        for (int b = 0; b < B; ++b) m.data[b] = t < (int)batch[b].token_ids.size() ? 1.0 : 0.0;
        return m;
    };
    int uh = dims_.utterance_encoder_hidden;
    auto hf = g.constant(Tensor(B, uh));
    for (int t = 0; t < max_len; ++t) {
        auto nxt = enc_fwd_.step(g, ops::embed(g, *word_emb_, step_ids(t)), hf);
        hf = nn::masked_update(g, nxt, hf, g.constant(step_mask(t)));
    }
    auto hb = g.constant(Tensor(B, uh));
    for (int t = max_len - 1; t >= 0; --t) {
        auto nxt = enc_bwd_.step(g, ops::embed(g, *word_emb_, step_ids(t)), hb);
        hb = nn::masked_update(g, nxt, hb, g.constant(step_mask(t)));
    }
    auto head = posterior_head_(g, ops::concat_cols(g, {hf, hb, cond}));
    return {ops::slice_cols(g, head, 0, dims_.latent_dim),
            ops::slice_cols(g, head, dims_.latent_dim, 2 * dims_.latent_dim)};
}

std::pair<NodeP, NodeP> VaeModel::prior_graph(Graph& g, NodeP cond) const {
    auto head = prior_head_(g, ops::vtanh(g, prior_hidden_(g, cond)));
    return {ops::slice_cols(g, head, 0, dims_.latent_dim),
            ops::slice_cols(g, head, dims_.latent_dim, 2 * dims_.latent_dim)};
}

VaeModel::ElboNodes VaeModel::elbo_graph(Graph& g, const std::vector<BatchItem>& batch, const Tensor& eps,
                                         double kl_weight_override) const {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw InputError("elbo: empty batch");
    if (eps.rows != B || eps.cols != dims_.latent_dim) throw InputError("elbo: eps must be B x latent_dim");

    std::vector<Condition> conds;
    for (const auto& it : batch) {
        if (it.token_ids.empty()) throw InputError("elbo: empty utterance");
        conds.push_back(it.condition);
    }
    auto cond = condition_graph(g, conds).emb;
    auto [mu, logvar] = posterior_graph(g, batch, cond);

    NodeP kl;
    if (config_.use_prior_network) {
        auto [pmu, plogvar] = prior_graph(g, cond);
        kl = ops::gaussian_kl_rows(g, mu, logvar, pmu, plogvar);
    } else {
        kl = ops::gaussian_kl_std_rows(g, mu, logvar);
    }

    auto z = ops::add(g, mu, ops::mul(g, ops::vexp(g, ops::scale(g, logvar, 0.5)), g.constant(eps)));

    // teacher-forced decoding; step t predicts x_t (x_len predicts <eos>)
    int max_len = 0;
    for (const auto& it : batch) max_len = std::max(max_len, static_cast<int>(it.token_ids.size()));
    int steps = max_len + 1;
    auto h = ops::vtanh(g, dec_init_(g, ops::concat_cols(g, {z, cond})));
    std::vector<NodeP> step_nll(steps);
    for (int t = 0; t < steps; ++t) {
        std::vector<int> prev(B), target(B);
        Tensor mask(B, 1);
        for (int b = 0; b < B; ++b) {
            int len = static_cast<int>(batch[b].token_ids.size());
            prev[b] = t == 0 ? text::Vocab::kBos : (t - 1 < len ? batch[b].token_ids[t - 1] : text::Vocab::kPad);
            target[b] = t < len ? batch[b].token_ids[t] : text::Vocab::kEos;
            mask.data[b] = t <= len ? 1.0 : 0.0;
        }
        auto input = ops::concat_cols(g, {ops::embed(g, *word_emb_, prev), z, cond});
        h = dec_cell_.step(g, input, h);
        auto logits = out_proj_(g, h);
        auto nll = ops::scale(g, ops::pick_per_row(g, ops::log_softmax_rows(g, logits), target), -1.0);
        step_nll[t] = ops::mul_colvec(g, nll, g.constant(std::move(mask)));
    }
    ElboNodes out;
    out.reconstruction = ops::sum_cols(g, ops::concat_cols(g, step_nll));
    out.kl = kl;
    double klw = kl_weight_override >= 0 ? kl_weight_override : config_.kl_weight;
    auto per_item = ops::add(g, out.reconstruction, ops::scale(g, out.kl, klw));
    out.objective = ops::mean_all(g, per_item);
    return out;
}

std::pair<double, double> VaeModel::elbo(const std::vector<std::string>& tokens, const Condition& c,
                                         const Tensor& eps) const {
    Graph g;
    BatchItem item;
    item.token_ids = to_ids(tokens);
    item.condition = c;
    auto nodes = elbo_graph(g, {item}, eps);
    double recon = nodes.reconstruction->val.data[0];
    double kl = nodes.kl->val.data[0];
    if (!std::isfinite(recon) || !std::isfinite(kl)) throw NumericError("elbo produced non-finite values");
    return {recon, kl};
}

std::vector<std::vector<std::string>> VaeModel::sample_utterances(const Condition& c, int n, int max_len,
                                                                  uint64_t seed) const {
    if (!trained_) throw StateError("sample_utterances: model is untrained");
    if (n < 1) throw InputError("sample_utterances: n must be >= 1");
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    for (int i = 0; i < n; ++i) {
        Graph g;
        auto cond = condition_graph(g, {c}).emb;
        Tensor z_val(1, dims_.latent_dim);
        if (config_.use_prior_network) {
            auto [pmu, plogvar] = prior_graph(g, cond);
            for (int j = 0; j < dims_.latent_dim; ++j)
                z_val.data[j] = pmu->val.data[j] + std::exp(0.5 * plogvar->val.data[j]) * rng.normal();
        } else {
            for (int j = 0; j < dims_.latent_dim; ++j) z_val.data[j] = rng.normal();
        }
        auto z = g.constant(z_val);
        auto h = ops::vtanh(g, dec_init_(g, ops::concat_cols(g, {z, cond})));
        std::vector<std::string> tokens;
        int prev = text::Vocab::kBos;
        for (int t = 0; t < max_len; ++t) {
            auto input = ops::concat_cols(g, {ops::embed(g, *word_emb_, {prev}), z, cond});
            h = dec_cell_.step(g, input, h);
            auto probs = ops::softmax_rows(g, out_proj_(g, h));
            int tok = static_cast<int>(rng.categorical(probs->val.data));
            if (tok == text::Vocab::kEos) break;
            tokens.push_back(vocab_.token(tok));
            prev = tok;
        }
        out.push_back(std::move(tokens));
    }
    return out;
}

std::vector<std::string> VaeModel::reconstruct(const std::vector<std::string>& tokens, const Condition& c) const {
    Graph g;
    BatchItem item;
    item.token_ids = to_ids(tokens);
    item.condition = c;
    auto cond = condition_graph(g, {c}).emb;
    auto [mu, logvar] = posterior_graph(g, {item}, cond);
    auto h = ops::vtanh(g, dec_init_(g, ops::concat_cols(g, {mu, cond})));
    std::vector<std::string> out;
    int prev = text::Vocab::kBos;
    for (int t = 0; t < config_.max_len; ++t) {
        auto input = ops::concat_cols(g, {ops::embed(g, *word_emb_, {prev}), mu, cond});
        h = dec_cell_.step(g, input, h);
        auto logits = out_proj_(g, h);
        int best = 0;
        for (int j = 1; j < logits->val.cols; ++j)
            if (logits->val.data[j] > logits->val.data[best]) best = j;
        if (best == text::Vocab::kEos) break;
        out.push_back(vocab_.token(best));
        prev = best;
    }
    return out;
}

double VaeModel::reconstruction_loss(const std::vector<BatchItem>& items) const {
    if (items.empty()) throw InputError("reconstruction_loss: empty item list");
    double total = 0.0;
    long tokens = 0;
    for (const auto& item : items) {
        Graph g;
        Tensor eps(1, dims_.latent_dim);  // posterior mean: zero noise
        auto nodes = elbo_graph(g, {item}, eps);
        total += nodes.reconstruction->val.data[0];
        tokens += static_cast<long>(item.token_ids.size()) + 1;
    }
    return total / tokens;
}

std::pair<Tensor, Tensor> VaeModel::prior_at(const Condition& c) const {
    Graph g;
    auto cond = condition_graph(g, {c}).emb;
    if (!config_.use_prior_network) return {Tensor(1, dims_.latent_dim), Tensor(1, dims_.latent_dim)};
    auto [pmu, plogvar] = prior_graph(g, cond);
    return {pmu->val, plogvar->val};
}

VaeModel train_vae(const Dataset& corpus, const VaeConfig& config) {
    config.validate();
    if (corpus.instances.empty()) throw InputError("train_vae: empty corpus");

    text::Vocab vocab;
    text::add_corpus_words(vocab, corpus);
    VaeModel model(corpus.schema, std::move(vocab), config);

    std::vector<VaeModel::BatchItem> items;
    items.reserve(corpus.instances.size());
    for (const auto& inst : corpus.instances) items.push_back(model.make_item(inst));

    Adam opt(model.params(), config.learning_rate);
    Rng rng(config.seed);
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    long total_steps = std::max<long>(1, (long)((items.size() + config.batch_size - 1) / config.batch_size) *
                                             config.epochs);
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double recon_sum = 0.0, kl_sum = 0.0;
        long count = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<VaeModel::BatchItem> batch;
            for (size_t i = start; i < end; ++i) batch.push_back(items[order[i]]);
            Tensor eps(static_cast<int>(batch.size()), model.config().scaled().latent_dim);
            for (double& v : eps.data) v = rng.normal();

            double klw = config.kl_weight;
            if (config.anneal_kl) {
                double warm = std::min(1.0, static_cast<double>(step) / std::max<long>(1, total_steps / 2));
                klw *= warm;
            }
            Graph g;
            auto nodes = model.elbo_graph(g, batch, eps, klw);
            double obj = nodes.objective->val.data[0];
            if (!std::isfinite(obj)) throw TrainingError("vae training diverged (non-finite loss)", epoch);
            for (int b = 0; b < (int)batch.size(); ++b) {
                recon_sum += nodes.reconstruction->val.data[b];
                kl_sum += nodes.kl->val.data[b];
            }
            count += static_cast<long>(batch.size());
            g.backward(nodes.objective);
            opt.step();
            ++step;
        }
        model.history_.push_back({recon_sum / count, kl_sum / count});
    }
    model.trained_ = true;
    return model;
}

void VaeModel::save(const std::string& path) const {
    nlohmann::json manifest;
    manifest["kind"] = "vae";
    manifest["format_version"] = 1;
    manifest["schema_hash"] = schema_->hash();
    manifest["vocab"] = vocab_.to_json();
    manifest["trained"] = trained_;
    manifest["config"] = {{"word_embedding_dim", config_.word_embedding_dim},
                          {"utterance_encoder_hidden", config_.utterance_encoder_hidden},
                          {"context_encoder_hidden", config_.context_encoder_hidden},
                          {"decoder_hidden", config_.decoder_hidden},
                          {"latent_dim", config_.latent_dim},
                          {"prior_bottleneck", config_.prior_bottleneck},
                          {"kl_weight", config_.kl_weight},
                          {"anneal_kl", config_.anneal_kl},
                          {"batch_size", config_.batch_size},
                          {"learning_rate", config_.learning_rate},
                          {"epochs", config_.epochs},
                          {"use_prior_network", config_.use_prior_network},
                          {"cond_label_dim", config_.cond_label_dim},
                          {"desk_scale_factor", config_.desk_scale_factor},
                          {"max_len", config_.max_len},
                          {"seed", config_.seed}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history_) hist.push_back({{"reconstruction", h.reconstruction}, {"kl", h.kl}});
    manifest["history"] = hist;
    write_checkpoint(path, manifest, params_);
}

VaeModel VaeModel::load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema) {
    Checkpoint ckpt = read_checkpoint(path);
    if (ckpt.manifest.value("kind", "") != "vae") throw ParseError("checkpoint is not a vae model");
    if (ckpt.manifest.at("schema_hash").get<uint64_t>() != schema->hash())
        throw SchemaError("vae checkpoint was trained under a different schema");
    const auto& cj = ckpt.manifest.at("config");
    VaeConfig config;
    config.word_embedding_dim = cj.at("word_embedding_dim");
    config.utterance_encoder_hidden = cj.at("utterance_encoder_hidden");
    config.context_encoder_hidden = cj.at("context_encoder_hidden");
    config.decoder_hidden = cj.at("decoder_hidden");
    config.latent_dim = cj.at("latent_dim");
    config.prior_bottleneck = cj.at("prior_bottleneck");
    config.kl_weight = cj.at("kl_weight");
    config.anneal_kl = cj.at("anneal_kl");
    config.batch_size = cj.at("batch_size");
    config.learning_rate = cj.at("learning_rate");
    config.epochs = cj.at("epochs");
    config.use_prior_network = cj.at("use_prior_network");
    config.cond_label_dim = cj.at("cond_label_dim");
    config.desk_scale_factor = cj.at("desk_scale_factor");
    config.max_len = cj.at("max_len");
    config.seed = cj.at("seed");
    VaeModel model(std::move(schema), text::Vocab::from_json(ckpt.manifest.at("vocab")), config);
    load_params(ckpt, model.params_);
    model.trained_ = ckpt.manifest.value("trained", false);
    for (const auto& h : ckpt.manifest.at("history"))
        model.history_.push_back({h.at("reconstruction"), h.at("kl")});
    return model;
}

}  // namespace tailaug::gen
