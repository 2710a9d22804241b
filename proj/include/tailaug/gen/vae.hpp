#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"
#include "tailaug/nn/layers.hpp"
#include "tailaug/text/vocab.hpp"

namespace tailaug::gen {

// Conditional VAE text generator; with use_prior_network the latent prior
// becomes the learned conditional Gaussian (pcVAE) instead of N(0, I).
struct VaeConfig {
    int word_embedding_dim = 512;
    int utterance_encoder_hidden = 1024;  // per direction
    int context_encoder_hidden = 128;     // Emb(c) output size
    int decoder_hidden = 1024;
    int latent_dim = 128;
    int prior_bottleneck = 100;  // tanh bottleneck of the prior network
    double kl_weight = 0.1;
    bool anneal_kl = false;  // linear warmup over the first half of training
    int batch_size = 256;
    double learning_rate = 1e-3;
    int epochs = 30;
    bool use_prior_network = false;
    int cond_label_dim = 64;  // per condition-field embedding
    // uniform divisor over all dims above; 1 restores the full-size preset
    int desk_scale_factor = 8;
    int max_len = 32;
    uint64_t seed = 1;

    VaeConfig scaled() const;
    void validate() const;
};

struct VaeEpochStats {
    double reconstruction = 0.0;
    double kl = 0.0;
};

class VaeModel {
public:
    VaeModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, VaeConfig config);

    // (reconstruction NLL, KL) of one utterance under one reparameterized
    // sample; `eps` must be 1 x latent_dim (frozen noise)
    std::pair<double, double> elbo(const std::vector<std::string>& tokens, const corpus::Condition& c,
                                   const Tensor& eps) const;

    struct BatchItem {
        std::vector<int> token_ids;
        corpus::Condition condition;
    };
    struct ElboNodes {
        NodeP reconstruction;  // B x 1, summed over tokens
        NodeP kl;              // B x 1
        NodeP objective;       // scalar mean of recon + kl_weight * kl
    };
    ElboNodes elbo_graph(Graph& g, const std::vector<BatchItem>& batch, const Tensor& eps,
                         double kl_weight_override = -1.0) const;

    std::vector<std::vector<std::string>> sample_utterances(const corpus::Condition& c, int n, int max_len,
                                                            uint64_t seed) const;

    // deterministic greedy reconstruction of an utterance (z = posterior mean)
    std::vector<std::string> reconstruct(const std::vector<std::string>& tokens, const corpus::Condition& c) const;

    // posterior-mean per-token NLL averaged over a held-out set
    double reconstruction_loss(const std::vector<BatchItem>& items) const;

    std::vector<int> to_ids(const std::vector<std::string>& tokens) const;
    BatchItem make_item(const corpus::RoutingInstance& inst) const;

    // prior parameters at a condition (pcVAE introspection)
    std::pair<Tensor, Tensor> prior_at(const corpus::Condition& c) const;

    ParamSet& params() const { return params_; }
    const VaeConfig& config() const { return config_; }
    const text::Vocab& vocab() const { return vocab_; }
    const std::vector<VaeEpochStats>& history() const { return history_; }
    bool trained() const { return trained_; }

    void save(const std::string& path) const;
    static VaeModel load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema);

private:
    friend VaeModel train_vae(const corpus::Dataset& corpus, const VaeConfig& config);

    struct CondNodes {
        NodeP emb;  // B x context_encoder_hidden
    };
    CondNodes condition_graph(Graph& g, const std::vector<corpus::Condition>& conds) const;
    std::pair<NodeP, NodeP> posterior_graph(Graph& g, const std::vector<BatchItem>& batch, NodeP cond) const;
    std::pair<NodeP, NodeP> prior_graph(Graph& g, NodeP cond) const;

    std::shared_ptr<const corpus::CorpusSchema> schema_;
    text::Vocab vocab_;
    VaeConfig config_;   // as given
    VaeConfig dims_;     // after desk scaling
    mutable ParamSet params_;
    std::vector<VaeEpochStats> history_;
    bool trained_ = false;

    Param *word_emb_, *domain_emb_, *intent_emb_, *slot_key_emb_, *skill_emb_;
    nn::Linear cond_proj_;
    nn::GruCell enc_fwd_, enc_bwd_;
    nn::Linear posterior_head_;
    nn::Linear prior_hidden_, prior_head_;
    nn::Linear dec_init_;
    nn::GruCell dec_cell_;
    nn::Linear out_proj_;
};

// Minimizes mean reconstruction + kl_weight * KL with Adam; per-epoch
// averages recorded in the returned model's history.
VaeModel train_vae(const corpus::Dataset& corpus, const VaeConfig& config);

}  // namespace tailaug::gen
