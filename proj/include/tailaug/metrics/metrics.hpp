#pragma once

#include <map>
#include <string>
#include <vector>

namespace tailaug::metrics {

using TokenSeq = std::vector<std::string>;

// Additively smoothed n-gram language model with begin/end padding, used as
// the shared fluency scorer. Unknown words map to an <unk> event so any
// text gets a finite score.
class NgramLanguageModel {
public:
    NgramLanguageModel(int order, double alpha);

    int order() const { return order_; }
    int vocab_size() const { return static_cast<int>(vocab_.size()); }

    // P(token | context) under additive smoothing; token/context may contain
    // words outside the training vocabulary (mapped to <unk>)
    double prob(const std::vector<std::string>& context, const std::string& token) const;

    // sum of log P over all tokens plus the end-of-sentence event
    double log_prob(const TokenSeq& text) const;

    friend NgramLanguageModel train_ngram_lm(const std::vector<TokenSeq>& corpus, int order, double alpha);

private:
    std::string normalize(const std::string& tok) const;
    std::string context_key(const std::vector<std::string>& context) const;

    int order_;
    double alpha_;
    std::map<std::string, int> vocab_;                       // token -> id (includes </s>, <unk>)
    std::map<std::string, std::map<std::string, long>> counts_;  // context key -> token counts
    std::map<std::string, long> context_totals_;
};

NgramLanguageModel train_ngram_lm(const std::vector<TokenSeq>& corpus, int order = 3, double alpha = 0.01);

// exp of the mean negative log-likelihood per token (end tokens included)
double perplexity(const NgramLanguageModel& lm, const std::vector<TokenSeq>& texts);

// |distinct whitespace-normalized texts| / |texts|
double unique_rate(const std::vector<std::string>& texts);
double unique_rate_tokens(const std::vector<TokenSeq>& texts);

// unique n-grams across the whole set over total n-gram tokens
double dist_n(const std::vector<TokenSeq>& texts, int n);

// entropy of the pooled empirical n-gram distribution (natural log)
double ent_n(const std::vector<TokenSeq>& texts, int n = 4);

// KL(true_empirical || generated_empirical) with additive eps smoothing on
// both distributions; label ids must lie in [0, num_labels)
double field_kl(const std::vector<int>& true_samples, const std::vector<int>& generated_samples, int num_labels,
                double eps = 1e-6);

// corpus BLEU with brevity penalty, uniform weights over 1..max_n
double bleu(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses, int max_n);

}  // namespace tailaug::metrics
