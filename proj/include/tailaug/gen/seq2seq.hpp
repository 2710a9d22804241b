#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"
#include "tailaug/nn/transformer.hpp"
#include "tailaug/text/vocab.hpp"

namespace tailaug::gen {

enum class FaceMode { off, pre_weight, post_weight };

const char* to_string(FaceMode m);
FaceMode face_mode_from_string(const std::string& s);

struct SamplingParams {
    double top_p = 0.9;
    double temperature = 1.0;
};

// Joint encoder-decoder generator over the sentinel layout
//   input : <dom> domain <int> intent <slot> keys... <skill> skill <x0> <x1> <x2>
//   target: <x0> device_type <x1> device_status <x2> utterance... <eos>
struct Seq2SeqConfig {
    int encoder_layers = 4;
    int decoder_layers = 4;
    int model_dim = 128;
    int heads = 4;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int epochs = 5;
    bool use_mcl = false;
    FaceMode face_mode = FaceMode::off;
    double mcl_temperature = 0.1;
    double mcl_weight = 0.1;
    SamplingParams sampling;
    int retry_limit = 5;
    bool face_renormalize = true;   // mean-1 rescale of pre-weights (raw formula when false)
    bool dynamic_frequencies = false;  // re-estimate token frequencies each epoch
    int max_target_len = 40;
    int max_positions = 64;
    uint64_t seed = 1;

    void validate() const;
};

// Unigram relative frequencies over the training corpus text. Structural
// tokens (sentinels, categorical labels) never occur in text, so they keep
// zero frequency and with it full pre-weight.
class TokenFrequencyTable {
public:
    explicit TokenFrequencyTable(int vocab_size) : freqs_(vocab_size, 0.0) {}

    static TokenFrequencyTable from_word_ids(int vocab_size, const std::vector<std::vector<int>>& texts);

    double freq(int token) const { return freqs_.at(token); }
    double total() const { return total_; }
    int size() const { return static_cast<int>(freqs_.size()); }
    const std::vector<double>& freqs() const { return freqs_; }

    void restore(std::vector<double> freqs) {
        freqs_ = std::move(freqs);
        total_ = 0.0;
        for (double f : freqs_) total_ += f;
    }

private:
    std::vector<double> freqs_;
    double total_ = 0.0;
};

// w_i = 1 - f_i / max_j f_j, then mean-1 renormalization (unless disabled).
// All-equal frequencies make the renormalization undefined: falls back to
// all-ones and reports it through `degenerate_fallback` when given.
std::vector<double> face_pre_weights(const TokenFrequencyTable& freqs, bool renormalize = true,
                                     bool* degenerate_fallback = nullptr);

// 1 + ReLU(freq(predicted) - freq(target)) / sum_j freq(c_j)
double face_post_weight(int predicted, int target, const TokenFrequencyTable& freqs);

// -sum_t w(t) * log softmax(logits_t)[target_t]
NodeP face_loss_graph(Graph& g, NodeP logits, const std::vector<int>& targets, FaceMode mode,
                      const TokenFrequencyTable& freqs, bool renormalize = true);
double face_loss(const Tensor& logits, const std::vector<int>& targets, FaceMode mode,
                 const TokenFrequencyTable& freqs, bool renormalize = true);

struct MclNodes {
    NodeP loss;      // scalar, mean over batch items
    NodeP per_item;  // B x 1 (items with no eligible negatives contribute 0)
};

// InfoNCE over cosine similarity with in-batch negatives; negatives sharing
// the anchor's condition key are masked out of the denominator.
MclNodes masked_contrastive_loss(Graph& g, NodeP input_reps, NodeP output_reps,
                                 const std::vector<std::string>& condition_keys, double temperature);

struct SequencePair {
    std::vector<int> input_ids;
    std::vector<int> target_ids;  // sentinel-delimited, without the final <eos>
    std::string condition_key;
};

struct GeneratedFields {
    std::vector<std::string> tokens;
    int device_type = -1;
    int device_status = -1;
};

struct Seq2SeqEpochStats {
    double face_loss = 0.0;  // per-sequence mean of the (possibly weighted) CE
    double mcl_loss = 0.0;
};

class Seq2SeqModel {
public:
    Seq2SeqModel(std::shared_ptr<const corpus::CorpusSchema> schema, text::Vocab vocab, Seq2SeqConfig config);

    SequencePair serialize_condition(const corpus::Condition& c) const;
    SequencePair make_pair(const corpus::RoutingInstance& inst) const;

    // inverse of the target layout; nullopt when malformed
    std::optional<GeneratedFields> parse_target(const std::vector<int>& ids) const;

    struct BatchNodes {
        NodeP objective;
        NodeP face_component;  // mean per-sequence CE/FACE sum
        NodeP mcl_component;   // zero constant when MCL is off
    };
    BatchNodes batch_loss(Graph& g, const std::vector<SequencePair>& batch, const TokenFrequencyTable& freqs) const;

    struct GenerateResult {
        std::vector<GeneratedFields> samples;
        int dropped = 0;  // conditions exhausted after retry_limit malformed decodes
    };
    GenerateResult generate(const corpus::Condition& c, int n, const SamplingParams& sampling, uint64_t seed) const;

    // argmax next-token accuracy under teacher forcing
    double teacher_forced_accuracy(const std::vector<SequencePair>& pairs) const;

    const TokenFrequencyTable& frequencies() const;

    ParamSet& params() const { return params_; }
    const Seq2SeqConfig& config() const { return config_; }
    const text::Vocab& vocab() const { return vocab_; }
    const std::vector<Seq2SeqEpochStats>& history() const { return history_; }
    bool trained() const { return trained_; }

    void save(const std::string& path) const;
    static Seq2SeqModel load(const std::string& path, std::shared_ptr<const corpus::CorpusSchema> schema);

private:
    friend Seq2SeqModel train_seq2seq(const corpus::Dataset& corpus, const Seq2SeqConfig& config);

    NodeP encode(Graph& g, const std::vector<int>& input_ids) const;
    NodeP decode(Graph& g, const std::vector<int>& dec_inputs, NodeP memory) const;
    std::vector<int> word_ids(const std::vector<std::string>& tokens) const;
    int sample_from_logits(const Tensor& logits_row, const SamplingParams& sampling, Rng& rng) const;

    std::shared_ptr<const corpus::CorpusSchema> schema_;
    text::Vocab vocab_;
    Seq2SeqConfig config_;
    mutable ParamSet params_;
    std::vector<Seq2SeqEpochStats> history_;
    std::optional<TokenFrequencyTable> freqs_;
    bool trained_ = false;

    // token-id blocks
    int first_word_id_ = 0;
    int mark_dom_, mark_int_, mark_slot_, mark_skill_, mark_x0_, mark_x1_, mark_x2_;
    int dom_base_, int_base_, key_base_, skill_base_, dt_base_, ds_base_;

    Param *token_emb_, *pos_enc_, *pos_dec_;
    nn::TransformerStack encoder_, decoder_;
    nn::Linear out_proj_;
};

Seq2SeqModel train_seq2seq(const corpus::Dataset& corpus, const Seq2SeqConfig& config);

}  // namespace tailaug::gen
