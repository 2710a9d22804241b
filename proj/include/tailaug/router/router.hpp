#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"
#include "tailaug/nn/layers.hpp"
#include "tailaug/text/vocab.hpp"

namespace tailaug::router {

struct RouterConfig {
    int word_embedding_dim = 64;
    int categorical_embedding_dim = 16;  // per categorical field
    int text_encoder_hidden = 64;        // per direction
    int hypothesis_sequence_hidden = 64;  // per direction
    int mlp_hidden = 64;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int epochs = 10;
    uint64_t seed = 1;
    bool share_mlp = true;  // one scoring MLP across hypothesis positions

    void validate() const;
};

// Anything that maps a hypothesis list to action probabilities; lets the
// evaluation operations run against oracle/test doubles as well as the
// trained model.
class RoutingPolicy {
public:
    virtual ~RoutingPolicy() = default;
    virtual std::vector<double> route(const corpus::RoutingInstance& inst) const = 0;
};

struct EpochStats {
    double train_loss = 0.0;
    double valid_accuracy = 0.0;
};

// Offsets of each component inside the encoded hypothesis vector.
struct EncodedLayout {
    int text = 0;
    int device_type = 0;
    int device_status = 0;
    int domain = 0;
    int intent = 0;
    int slot_bag = 0;
    int confidence = 0;
    int skill = 0;
    int total = 0;
};

class RouterModel : public RoutingPolicy {
public:
    RouterModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, RouterConfig config);

    // action probabilities over the original hypothesis order
    std::vector<double> route(const corpus::RoutingInstance& inst) const override;

    // concatenated feature vector of one hypothesis (1 x encoded_dim)
    Tensor encode_hypothesis(const corpus::Hypothesis& h) const;
    EncodedLayout encoded_layout() const;
    int encoded_dim() const { return encoded_layout().total; }

    // mean cross-entropy of the logged actions over a batch of instances
    NodeP batch_loss(Graph& g, const std::vector<const corpus::RoutingInstance*>& batch) const;

    // batched argmax-match accuracy (inference only)
    double accuracy(const corpus::Dataset& ds) const;

    ParamSet& params() const { return params_; }
    const RouterConfig& config() const { return config_; }
    const text::Vocab& vocab() const { return vocab_; }
    const std::vector<EpochStats>& history() const { return history_; }

    void save(const std::string& path) const;
    static RouterModel load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema);

private:
    friend RouterModel train_router(const corpus::Dataset&, const corpus::Dataset&, const RouterConfig&);

    struct BatchForward {
        NodeP logits;                       // B x N_max in confidence-sorted space
        std::vector<std::vector<int>> sort_order;  // per instance: position -> original index
    };
    BatchForward forward_batch(Graph& g, const std::vector<const corpus::RoutingInstance*>& batch) const;

    std::shared_ptr<const corpus::CorpusSchema> schema_;
    text::Vocab vocab_;
    RouterConfig config_;
    mutable ParamSet params_;  // graphs copy values; inference never mutates
    std::vector<EpochStats> history_;

    Param *word_emb_, *device_type_emb_, *device_status_emb_, *domain_emb_, *intent_emb_, *slot_key_emb_,
        *confidence_emb_, *skill_emb_;
    nn::LstmCell text_fwd_, text_bwd_, hyp_fwd_, hyp_bwd_;
    std::vector<nn::Linear> mlp_hidden_;  // one entry when share_mlp, else per position
    std::vector<nn::Linear> mlp_out_;
};

// Cross-entropy training against the logged actions; returns the
// best-validation-accuracy checkpoint with the per-epoch history attached.
RouterModel train_router(const corpus::Dataset& train, const corpus::Dataset& valid, const RouterConfig& config);

// (1/|test|) sum 1[argmax route(H_i) = a_i]; argmax ties break low.
double replication_accuracy(const RoutingPolicy& policy, const corpus::Dataset& test);

struct IntentAccuracy {
    double accuracy = 0.0;
    int count = 0;
};

// per logged-action-intent replication accuracy and traffic counts
std::map<int, IntentAccuracy> per_intent_accuracy(const RoutingPolicy& policy, const corpus::Dataset& test);

}  // namespace tailaug::router
