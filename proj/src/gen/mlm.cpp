#include "tailaug/gen/mlm.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/core/checkpoint.hpp"
#include "tailaug/core/errors.hpp"
#include "tailaug/core/optim.hpp"
#include "tailaug/text/vocab_build.hpp"

namespace tailaug::gen {

using corpus::Condition;
using corpus::ConfidenceBin;
using corpus::Dataset;
using corpus::RoutingInstance;

namespace {
constexpr int kNumSpecials = 7;  // <pad> <unk> <bos> <eos> <mask> <cls> <sep>
constexpr int kCatPositions = 3;
constexpr int kClsPos = 3;
}  // namespace

void MlmConfig::validate() const {
    if (layers_total < 2 || layers_total % 2 != 0) throw InputError("mlm config: layers_total must be even >= 2");
    if (model_dim < 1 || heads < 1 || model_dim % heads != 0)
        throw InputError("mlm config: model_dim must be a positive multiple of heads");
    if (mask_prob_categorical < 0 || mask_prob_categorical > 1 || mask_prob_utterance < 0 ||
        mask_prob_utterance > 1)
        throw InputError("mlm config: mask probabilities must lie in [0,1]");
    if (kl_weight < 0) throw InputError("mlm config: kl_weight must be >= 0");
    if (batch_size < 1 || epochs < 0 || learning_rate <= 0) throw InputError("mlm config: bad training params");
}

bool StoplistTagger::maskable(const std::string& token) const {
    static const std::set<std::string> kStoplist = {
        "the",  "a",     "an",    "to",    "for",  "on",    "in",    "at",    "of",    "my",    "me",
        "your", "our",   "you",   "i",     "it",   "this",  "that",  "these", "those", "and",   "or",
        "not",  "no",    "is",    "are",   "was",  "were",  "be",    "been",  "do",    "does",  "did",
        "can",  "could", "will",  "would", "shall", "should", "may",  "might", "what",  "who",   "whom",
        "when", "where", "why",   "how",   "which", "with",  "from",  "by",    "about", "into",  "onto",
        "over", "under", "please", "now",  "there", "here",  "am",    "us",    "we",    "they",  "them",
        "he",   "she",   "his",   "her",   "its"};
    return kStoplist.count(token) == 0;
}

MlmModel::MlmModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, MlmConfig config)
    : schema_(std::move(schema)), vocab_(std::move(vocab)), config_(config) {
    config_.validate();
    const auto& s = *schema_;
    first_word_id_ = kNumSpecials;
    // categorical label tokens appended after the word block
    dt_base_ = vocab_.size();
    for (const auto& l : s.device_types) vocab_.add(text::label_token("dt", l));
    ds_base_ = vocab_.size();
    for (const auto& l : s.device_statuses) vocab_.add(text::label_token("ds", l));
    cb_base_ = vocab_.size();
    for (const char* l : {"HIGH", "MEDIUM", "LOW"}) vocab_.add(text::label_token("cb", l));

    Rng rng(config_.seed);
    int d = config_.model_dim;
    token_emb_ = &params_.add("token_emb", Tensor::xavier(vocab_.size(), d, rng));
    pos_emb_ = &params_.add("pos_emb", Tensor::xavier(config_.max_positions, d, rng));
    domain_emb_ = &params_.add("domain_emb", Tensor::xavier((int)s.domains.size(), config_.cond_label_dim, rng));
    intent_emb_ = &params_.add("intent_emb", Tensor::xavier((int)s.intents.size(), config_.cond_label_dim, rng));
    slot_key_emb_ =
        &params_.add("slot_key_emb", Tensor::xavier((int)s.slot_keys.size(), config_.cond_label_dim, rng));
    skill_emb_ = &params_.add("skill_emb", Tensor::xavier((int)s.skills.size(), config_.cond_label_dim, rng));
    cond_proj_ = nn::Linear(params_, "cond_proj", 4 * config_.cond_label_dim, d, rng);
    encoder_ = nn::TransformerStack(params_, "encoder", config_.layers_total / 2, d, config_.heads, false, rng);
    decoder_ = nn::TransformerStack(params_, "decoder", config_.layers_total / 2, d, config_.heads, false, rng);
    posterior_head_ = nn::Linear(params_, "posterior_head", d, 2 * d, rng);
    prior_hidden_ = nn::Linear(params_, "prior_hidden", d, config_.prior_bottleneck, rng);
    prior_head_ = nn::Linear(params_, "prior_head", config_.prior_bottleneck, 2 * d, rng);
    out_proj_ = nn::Linear(params_, "out_proj", d, vocab_.size(), rng);
}

bool MlmModel::is_word_token(int id) const { return id >= first_word_id_ && id < dt_base_; }
int MlmModel::device_type_token(int id) const { return dt_base_ + id; }
int MlmModel::device_status_token(int id) const { return ds_base_ + id; }
int MlmModel::confidence_token(ConfidenceBin b) const { return cb_base_ + static_cast<int>(b); }

std::vector<int> MlmModel::build_sequence(const std::vector<std::string>& tokens, int device_type,
                                          int device_status, ConfidenceBin confidence) const {
    if (device_type < 0 || device_type >= (int)schema_->device_types.size() || device_status < 0 ||
        device_status >= (int)schema_->device_statuses.size())
        throw VocabError("build_sequence: categorical id outside the schema vocabularies");
    std::vector<int> seq;
    seq.push_back(device_type_token(device_type));
    seq.push_back(device_status_token(device_status));
    seq.push_back(confidence_token(confidence));
    seq.push_back(text::Vocab::kCls);
    for (const auto& t : tokens) seq.push_back(vocab_.id(t));
    seq.push_back(text::Vocab::kSep);
    if ((int)seq.size() > config_.max_positions) throw InputError("build_sequence: utterance too long");
    return seq;
}

std::vector<int> MlmModel::build_sequence(const RoutingInstance& inst) const {
    const auto& top = inst.hypotheses[corpus::top1_index(inst)];
    const auto& shared = inst.hypotheses[0];
    return build_sequence(shared.tokens, shared.device_type, shared.device_status, top.confidence);
}

void MlmModel::check_layout(const std::vector<int>& seq) const {
    if ((int)seq.size() < kCatPositions + 3) throw InputError("mlm sequence too short for the layout");
    auto cat_ok = [&](int id, int base, int count) {
        return (id >= base && id < base + count) || id == text::Vocab::kMask;
    };
    if (!cat_ok(seq[0], dt_base_, (int)schema_->device_types.size()) ||
        !cat_ok(seq[1], ds_base_, (int)schema_->device_statuses.size()) || !cat_ok(seq[2], cb_base_, 3))
        throw InputError("mlm sequence: first three positions must be categorical field tokens");
    if (seq[kClsPos] != text::Vocab::kCls) throw InputError("mlm sequence: [CLS] must follow the categorical fields");
    if (seq.back() != text::Vocab::kSep) throw InputError("mlm sequence: [SEP] must close the sequence");
}

MaskedSequence MlmModel::mask_sequence(const std::vector<int>& seq, Rng& rng) const {
    check_layout(seq);
    MaskedSequence out;
    const int max_attempts = 64;  // 0-probability configs can never draw a mask
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        out.tokens = seq;
        out.mask_positions.clear();
        out.originals.clear();
        for (int p = 0; p < (int)seq.size(); ++p) {
            if (p == kClsPos || p + 1 == (int)seq.size()) continue;  // [CLS]/[SEP] never masked
            double prob = p < kCatPositions ? config_.mask_prob_categorical : config_.mask_prob_utterance;
            if (rng.bernoulli(prob)) {
                out.mask_positions.push_back(p);
                out.originals.push_back(seq[p]);
                out.tokens[p] = text::Vocab::kMask;
            }
        }
        if (!out.mask_positions.empty()) return out;
    }
    // degenerate floor: force one uniformly chosen maskable position
    out.tokens = seq;
    std::vector<int> maskable;
    for (int p = 0; p < (int)seq.size(); ++p)
        if (p != kClsPos && p + 1 != (int)seq.size()) maskable.push_back(p);
    int p = maskable[rng.randint(maskable.size())];
    out.mask_positions = {p};
    out.originals = {seq[p]};
    out.tokens[p] = text::Vocab::kMask;
    return out;
}

NodeP MlmModel::condition_vec(Graph& g, const Condition& c) const {
    NodeP slot_bag;
    if (c.slot_keys.empty()) {
        slot_bag = g.constant(Tensor(1, config_.cond_label_dim));
    } else {
        Tensor avg(1, (int)c.slot_keys.size(), 1.0 / c.slot_keys.size());
        slot_bag = ops::matmul(g, g.constant(std::move(avg)), ops::embed(g, *slot_key_emb_, c.slot_keys));
    }
    auto concat = ops::concat_cols(g, {ops::embed(g, *domain_emb_, {c.domain}),
                                       ops::embed(g, *intent_emb_, {c.intent}), slot_bag,
                                       ops::embed(g, *skill_emb_, {c.skill})});
    return ops::vtanh(g, cond_proj_(g, concat));  // 1 x d
}

NodeP MlmModel::encode(Graph& g, const std::vector<int>& tokens, NodeP cond) const {
    int len = (int)tokens.size();
    if (len > config_.max_positions) throw InputError("mlm: sequence exceeds max positions");
    auto x = ops::add(g, ops::embed(g, *token_emb_, tokens), nn::positional(g, *pos_emb_, len));
    // condition embedding plays the segment-embedding role at every position
    Tensor ones(len, 1, 1.0);
    auto cond_rows = ops::matmul(g, g.constant(std::move(ones)), cond);
    x = ops::add(g, x, cond_rows);
    return encoder_(g, x, nullptr, false);
}

std::pair<NodeP, NodeP> MlmModel::posterior(Graph& g, NodeP enc_out) const {
    // mean-pool of the encoder half feeds the two Gaussian heads; the
    // condition already entered through the segment embeddings
    int len = enc_out->val.rows;
    Tensor mean_w(1, len, 1.0 / len);
    auto pooled = ops::matmul(g, g.constant(std::move(mean_w)), enc_out);
    auto head = posterior_head_(g, pooled);
    int d = config_.model_dim;
    return {ops::slice_cols(g, head, 0, d), ops::slice_cols(g, head, d, 2 * d)};
}

std::pair<NodeP, NodeP> MlmModel::prior(Graph& g, NodeP cond) const {
    auto head = prior_head_(g, ops::vtanh(g, prior_hidden_(g, cond)));
    int d = config_.model_dim;
    return {ops::slice_cols(g, head, 0, d), ops::slice_cols(g, head, d, 2 * d)};
}

NodeP MlmModel::decode_with_latent(Graph& g, NodeP enc_out, NodeP z) const {
    int len = enc_out->val.rows;
    // z replaces the [CLS] hidden state at the encoder/decoder boundary
    std::vector<int> before(kClsPos), after;
    for (int i = 0; i < kClsPos; ++i) before[i] = i;
    for (int i = kClsPos + 1; i < len; ++i) after.push_back(i);
    auto dec_in = ops::stack_rows(g, {ops::gather_rows(g, enc_out, before), z, ops::gather_rows(g, enc_out, after)});
    return decoder_(g, dec_in, nullptr, false);
}

MlmModel::LossNodes MlmModel::loss_graph(Graph& g, const MaskedSequence& seq, const Condition& c,
                                         const Tensor& eps) const {
    if (seq.mask_positions.empty()) throw InputError("mlm loss: no masked positions");
    if (eps.rows != 1 || eps.cols != config_.model_dim) throw InputError("mlm loss: eps must be 1 x model_dim");
    auto cond = condition_vec(g, c);
    auto enc_out = encode(g, seq.tokens, cond);
    auto [mu, logvar] = posterior(g, enc_out);
    auto [pmu, plogvar] = prior(g, cond);
    auto kl = ops::gaussian_kl_rows(g, mu, logvar, pmu, plogvar);
    auto z = ops::add(g, mu, ops::mul(g, ops::vexp(g, ops::scale(g, logvar, 0.5)), g.constant(eps)));
    auto dec_out = decode_with_latent(g, enc_out, z);
    auto logits = out_proj_(g, dec_out);  // L x V
    auto masked_logits = ops::gather_rows(g, logits, seq.mask_positions);
    auto nll = ops::scale(
        g, ops::pick_per_row(g, ops::log_softmax_rows(g, masked_logits), seq.originals), -1.0);
    LossNodes out;
    out.logits = logits;
    out.masked_ce = ops::mean_all(g, nll);
    out.kl = ops::mean_all(g, kl);
    out.objective = ops::add(g, out.masked_ce, ops::scale(g, out.kl, config_.kl_weight));
    return out;
}

Tensor MlmModel::sample_prior(const Condition& c, Rng& rng) const {
    Graph g;
    auto cond = condition_vec(g, c);
    auto [pmu, plogvar] = prior(g, cond);
    Tensor z(1, config_.model_dim);
    for (int j = 0; j < config_.model_dim; ++j)
        z.data[j] = pmu->val.data[j] + std::exp(0.5 * plogvar->val.data[j]) * rng.normal();
    return z;
}

std::vector<int> MlmModel::tokens_for_position(const std::vector<int>& seq, int position) const {
    std::vector<int> candidates;
    if (position == 0) {
        for (int i = 0; i < (int)schema_->device_types.size(); ++i) candidates.push_back(dt_base_ + i);
    } else if (position == 1) {
        for (int i = 0; i < (int)schema_->device_statuses.size(); ++i) candidates.push_back(ds_base_ + i);
    } else if (position == 2) {
        for (int i = 0; i < 3; ++i) candidates.push_back(cb_base_ + i);
    } else if (position > kClsPos && position + 1 < (int)seq.size()) {
        for (int i = first_word_id_; i < dt_base_; ++i) candidates.push_back(i);
    } else {
        throw InputError("mlm: position has no sampling support");
    }
    return candidates;
}

std::vector<double> MlmModel::predictive_at(const MaskedSequence& seq, const Condition& c, const Tensor& z,
                                            int position) const {
    Graph g;
    auto cond = condition_vec(g, c);
    auto enc_out = encode(g, seq.tokens, cond);
    auto dec_out = decode_with_latent(g, enc_out, g.constant(z));
    auto logits = out_proj_(g, dec_out);
    auto candidates = tokens_for_position(seq.tokens, position);
    std::vector<double> probs(candidates.size());
    double mx = -1e300;
    for (size_t i = 0; i < candidates.size(); ++i) mx = std::max(mx, logits->val.at(position, candidates[i]));
    double total = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        probs[i] = std::exp(logits->val.at(position, candidates[i]) - mx);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return probs;
}

MlmModel::Perturbed MlmModel::perturb(const RoutingInstance& inst, Rng& rng, const ContentWordTagger* tagger) const {
    if (!trained_) throw StateError("perturb: model is untrained");
    StoplistTagger default_tagger;
    const ContentWordTagger& tag = tagger ? *tagger : default_tagger;

    const auto& shared = inst.hypotheses[0];
    auto seq = build_sequence(inst);
    Condition c = Condition::from_top1(inst);

    MaskedSequence masked;
    masked.tokens = seq;
    for (int p = 0; p < (int)seq.size(); ++p) {
        bool maskable;
        double prob;
        if (p < kCatPositions) {
            maskable = true;
            prob = config_.mask_prob_categorical;
        } else if (p == kClsPos || p + 1 == (int)seq.size()) {
            continue;
        } else {
            // only content words (verbs/nouns per the tagger) are candidates
            maskable = tag.maskable(shared.tokens[p - kClsPos - 1]);
            prob = config_.mask_prob_utterance;
        }
        if (maskable && rng.bernoulli(prob)) {
            masked.mask_positions.push_back(p);
            masked.originals.push_back(seq[p]);
            masked.tokens[p] = text::Vocab::kMask;
        }
    }

    Perturbed out;
    out.device_type = shared.device_type;
    out.device_status = shared.device_status;
    out.tokens = shared.tokens;
    if (masked.mask_positions.empty()) return out;  // nothing maskable drawn

    Tensor z = sample_prior(c, rng);
    Graph g;
    auto cond = condition_vec(g, c);
    auto enc_out = encode(g, masked.tokens, cond);
    auto dec_out = decode_with_latent(g, enc_out, g.constant(z));
    auto logits = out_proj_(g, dec_out);

    for (int p : masked.mask_positions) {
        auto candidates = tokens_for_position(masked.tokens, p);
        std::vector<double> probs(candidates.size());
        double mx = -1e300;
        for (size_t i = 0; i < candidates.size(); ++i) mx = std::max(mx, logits->val.at(p, candidates[i]));
        double total = 0.0;
        for (size_t i = 0; i < candidates.size(); ++i) {
            probs[i] = std::exp(logits->val.at(p, candidates[i]) - mx);
            total += probs[i];
        }
        for (double& v : probs) v /= total;
        int pick = candidates[rng.categorical(probs)];
        if (p == 0)
            out.device_type = pick - dt_base_;
        else if (p == 1)
            out.device_status = pick - ds_base_;
        else if (p >= kClsPos + 1)
            out.tokens[p - kClsPos - 1] = vocab_.token(pick);
        // position 2 (confidence) is hypothesis-level: sampled value ignored
    }
    return out;
}

MlmModel train_mlm(const Dataset& corpus, const MlmConfig& config) {
    config.validate();
    if (corpus.instances.empty()) throw InputError("train_mlm: empty corpus");

    text::Vocab vocab;
    text::add_corpus_words(vocab, corpus);
    MlmModel model(corpus.schema, std::move(vocab), config);

    Adam opt(model.params(), config.learning_rate);
    Rng rng(config.seed);

    std::vector<size_t> order(corpus.instances.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double ce_sum = 0.0, kl_sum = 0.0;
        long count = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            double inv = 1.0 / static_cast<double>(end - start);
            for (size_t i = start; i < end; ++i) {
                const auto& inst = corpus.instances[order[i]];
                auto seq = model.build_sequence(inst);
                auto masked = model.mask_sequence(seq, rng);
                Tensor eps(1, config.model_dim);
                for (double& v : eps.data) v = rng.normal();
                Graph g;
                auto nodes = model.loss_graph(g, masked, Condition::from_top1(inst), eps);
                double ce = nodes.masked_ce->val.data[0];
                double kl = nodes.kl->val.data[0];
                if (!std::isfinite(ce) || !std::isfinite(kl))
                    throw TrainingError("mlm training diverged (non-finite loss)", epoch);
                ce_sum += ce;
                kl_sum += kl;
                ++count;
                g.backward(ops::scale(g, nodes.objective, inv));
            }
            opt.step();
        }
        model.history_.push_back({ce_sum / count, kl_sum / count});
    }
    model.trained_ = true;
    return model;
}

void MlmModel::save(const std::string& path) const {
    nlohmann::json manifest;
    manifest["kind"] = "mlm";
    manifest["format_version"] = 1;
    manifest["schema_hash"] = schema_->hash();
    manifest["trained"] = trained_;
    manifest["config"] = {{"layers_total", config_.layers_total},
                          {"model_dim", config_.model_dim},
                          {"heads", config_.heads},
                          {"mask_prob_categorical", config_.mask_prob_categorical},
                          {"mask_prob_utterance", config_.mask_prob_utterance},
                          {"learning_rate", config_.learning_rate},
                          {"epochs", config_.epochs},
                          {"kl_weight", config_.kl_weight},
                          {"batch_size", config_.batch_size},
                          {"cond_label_dim", config_.cond_label_dim},
                          {"prior_bottleneck", config_.prior_bottleneck},
                          {"max_positions", config_.max_positions},
                          {"seed", config_.seed}};
    // store the word block only; label blocks are rebuilt from the schema
    nlohmann::json words = nlohmann::json::array();
    for (int i = 0; i < dt_base_; ++i) words.push_back(vocab_.token(i));
    manifest["vocab"] = words;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : history_) hist.push_back({{"masked_ce", h.masked_ce}, {"kl", h.kl}});
    manifest["history"] = hist;
    write_checkpoint(path, manifest, params_);
}

MlmModel MlmModel::load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema) {
    Checkpoint ckpt = read_checkpoint(path);
    if (ckpt.manifest.value("kind", "") != "mlm") throw ParseError("checkpoint is not an mlm model");
    if (ckpt.manifest.at("schema_hash").get<uint64_t>() != schema->hash())
        throw SchemaError("mlm checkpoint was trained under a different schema");
    const auto& cj = ckpt.manifest.at("config");
    MlmConfig config;
    config.layers_total = cj.at("layers_total");
    config.model_dim = cj.at("model_dim");
    config.heads = cj.at("heads");
    config.mask_prob_categorical = cj.at("mask_prob_categorical");
    config.mask_prob_utterance = cj.at("mask_prob_utterance");
    config.learning_rate = cj.at("learning_rate");
    config.epochs = cj.at("epochs");
    config.kl_weight = cj.at("kl_weight");
    config.batch_size = cj.at("batch_size");
    config.cond_label_dim = cj.at("cond_label_dim");
    config.prior_bottleneck = cj.at("prior_bottleneck");
    config.max_positions = cj.at("max_positions");
    config.seed = cj.at("seed");
    MlmModel model(std::move(schema), text::Vocab::from_json(ckpt.manifest.at("vocab")), config);
    load_params(ckpt, model.params_);
    model.trained_ = ckpt.manifest.value("trained", false);
    for (const auto& h : ckpt.manifest.at("history")) model.history_.push_back({h.at("masked_ce"), h.at("kl")});
    return model;
}

}  // namespace tailaug::gen
