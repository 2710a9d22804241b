#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"
#include "tailaug/nn/transformer.hpp"
#include "tailaug/text/vocab.hpp"

namespace tailaug::gen {

// Conditional variational masked LM: a from-scratch transformer split into
// encoder/decoder halves with a latent sample replacing the [CLS] state at
// the boundary and condition embeddings added at every position.
struct MlmConfig {
    int layers_total = 8;  // even; first half encodes, second half decodes
    int model_dim = 128;   // latent size equals model_dim
    int heads = 4;
    double mask_prob_categorical = 0.9;
    double mask_prob_utterance = 0.3;
    double learning_rate = 5e-5;
    int epochs = 15;
    double kl_weight = 0.1;
    int batch_size = 32;
    int cond_label_dim = 32;
    int prior_bottleneck = 32;
    int max_positions = 48;
    uint64_t seed = 1;

    void validate() const;
};

// Input layout (C1, C2, C3, [CLS], W_1..W_T, [SEP]) with some positions
// replaced by [MASK].
struct MaskedSequence {
    std::vector<int> tokens;
    std::vector<int> mask_positions;
    std::vector<int> originals;  // tokens behind mask_positions
};

// Decides which utterance tokens are content words (mask candidates).
class ContentWordTagger {
public:
    virtual ~ContentWordTagger() = default;
    virtual bool maskable(const std::string& token) const = 0;
};

// Default heuristic: anything outside a closed-class stoplist is content.
class StoplistTagger : public ContentWordTagger {
public:
    bool maskable(const std::string& token) const override;
};

// Rule lexicon: only the listed words are content.
class LexiconTagger : public ContentWordTagger {
public:
    explicit LexiconTagger(std::set<std::string> content_words) : words_(std::move(content_words)) {}
    bool maskable(const std::string& token) const override { return words_.count(token) > 0; }

private:
    std::set<std::string> words_;
};

struct MlmEpochStats {
    double masked_ce = 0.0;
    double kl = 0.0;
};

class MlmModel {
public:
    MlmModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, MlmConfig config);

    // builds the Eq-layout token sequence for utterance-level fields
    std::vector<int> build_sequence(const std::vector<std::string>& tokens, int device_type, int device_status,
                                    corpus::ConfidenceBin confidence) const;
    std::vector<int> build_sequence(const corpus::RoutingInstance& inst) const;

    // random masking per config; at least one position masked (resamples)
    MaskedSequence mask_sequence(const std::vector<int>& seq, Rng& rng) const;

    struct LossNodes {
        NodeP masked_ce;  // scalar sum over masked positions / count
        NodeP kl;         // scalar
        NodeP objective;  // masked_ce + kl_weight * kl
        NodeP logits;     // L x V (for masked-position invariants)
    };
    LossNodes loss_graph(Graph& g, const MaskedSequence& seq, const corpus::Condition& c, const Tensor& eps) const;

    // re-fills masked content words and categorical fields from p(z|c);
    // returns perturbed utterance-level fields, hypothesis fields untouched
    struct Perturbed {
        std::vector<std::string> tokens;
        int device_type = -1;
        int device_status = -1;
    };
    Perturbed perturb(const corpus::RoutingInstance& inst, Rng& rng, const ContentWordTagger* tagger = nullptr) const;

    // predictive distribution at one position of a masked sequence under a
    // fixed latent, restricted to the tokens valid for that position
    std::vector<double> predictive_at(const MaskedSequence& seq, const corpus::Condition& c, const Tensor& z,
                                      int position) const;

    ParamSet& params() const { return params_; }
    const MlmConfig& config() const { return config_; }
    const text::Vocab& vocab() const { return vocab_; }
    const std::vector<MlmEpochStats>& history() const { return history_; }
    bool trained() const { return trained_; }

    // token-id ranges by role
    bool is_word_token(int id) const;
    int device_type_token(int id) const;
    int device_status_token(int id) const;
    int confidence_token(corpus::ConfidenceBin b) const;

    void save(const std::string& path) const;
    static MlmModel load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema);

    // sample z from the conditional prior
    Tensor sample_prior(const corpus::Condition& c, Rng& rng) const;

private:
    friend MlmModel train_mlm(const corpus::Dataset& corpus, const MlmConfig& config);

    NodeP condition_vec(Graph& g, const corpus::Condition& c) const;
    NodeP encode(Graph& g, const std::vector<int>& tokens, NodeP cond) const;
    NodeP decode_with_latent(Graph& g, NodeP enc_out, NodeP z) const;
    std::pair<NodeP, NodeP> posterior(Graph& g, NodeP enc_out) const;
    std::pair<NodeP, NodeP> prior(Graph& g, NodeP cond) const;
    void check_layout(const std::vector<int>& seq) const;
    std::vector<int> tokens_for_position(const std::vector<int>& seq, int position) const;

    std::shared_ptr<const corpus::CorpusSchema> schema_;
    text::Vocab vocab_;
    MlmConfig config_;
    mutable ParamSet params_;
    std::vector<MlmEpochStats> history_;
    bool trained_ = false;

    int first_word_id_ = 0;  // label tokens come first, words after
    int dt_base_ = 0, ds_base_ = 0, cb_base_ = 0;

    Param *token_emb_, *pos_emb_;
    Param *domain_emb_, *intent_emb_, *slot_key_emb_, *skill_emb_;
    nn::Linear cond_proj_;
    nn::TransformerStack encoder_, decoder_;
    nn::Linear posterior_head_, prior_hidden_, prior_head_, out_proj_;
};

MlmModel train_mlm(const corpus::Dataset& corpus, const MlmConfig& config);

}  // namespace tailaug::gen
