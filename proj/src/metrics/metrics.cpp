#include "tailaug/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tailaug/core/errors.hpp"

namespace tailaug::metrics {

namespace {
const std::string kEos = "</s>";
const std::string kBos = "<s>";
const std::string kUnk = "<unk>";
}  // namespace

NgramLanguageModel::NgramLanguageModel(int order, double alpha) : order_(order), alpha_(alpha) {
    if (order < 1) throw InputError("ngram lm: order must be >= 1");
    if (alpha <= 0) throw InputError("ngram lm: smoothing alpha must be > 0");
}

std::string NgramLanguageModel::normalize(const std::string& tok) const {
    return vocab_.count(tok) ? tok : kUnk;
}

std::string NgramLanguageModel::context_key(const std::vector<std::string>& context) const {
    std::string key;
    size_t start = context.size() > static_cast<size_t>(order_ - 1) ? context.size() - (order_ - 1) : 0;
    for (size_t i = start; i < context.size(); ++i) {
        key += context[i] == kBos ? kBos : normalize(context[i]);
        key += '\x1f';
    }
    return key;
}

double NgramLanguageModel::prob(const std::vector<std::string>& context, const std::string& token) const {
    std::string key = context_key(context);
    double v = static_cast<double>(vocab_.size());
    auto it = counts_.find(key);
    long total = 0, count = 0;
    if (it != counts_.end()) {
        total = context_totals_.at(key);
        auto jt = it->second.find(normalize(token));
        if (jt != it->second.end()) count = jt->second;
    }
    return (count + alpha_) / (total + alpha_ * v);
}

double NgramLanguageModel::log_prob(const TokenSeq& text) const {
    std::vector<std::string> context(order_ - 1, kBos);
    double lp = 0.0;
    for (const auto& tok : text) {
        lp += std::log(prob(context, tok));
        context.push_back(normalize(tok));
    }
    lp += std::log(prob(context, kEos));
    return lp;
}

NgramLanguageModel train_ngram_lm(const std::vector<TokenSeq>& corpus, int order, double alpha) {
    if (corpus.empty()) throw InputError("train_ngram_lm: empty corpus");
    NgramLanguageModel lm(order, alpha);
    lm.vocab_[kEos] = 0;
    lm.vocab_[kUnk] = 1;
    for (const auto& text : corpus)
        for (const auto& tok : text)
            lm.vocab_.emplace(tok, static_cast<int>(lm.vocab_.size()));
    for (const auto& text : corpus) {
        std::vector<std::string> context(order - 1, kBos);
        auto observe = [&](const std::string& tok) {
            std::string key = lm.context_key(context);
            ++lm.counts_[key][tok];
            ++lm.context_totals_[key];
        };
        for (const auto& tok : text) {
            observe(tok);
            context.push_back(tok);
        }
        observe(kEos);
    }
    return lm;
}

double perplexity(const NgramLanguageModel& lm, const std::vector<TokenSeq>& texts) {
    if (texts.empty()) throw InputError("perplexity: empty text list");
    double lp = 0.0;
    long tokens = 0;
    for (const auto& t : texts) {
        lp += lm.log_prob(t);
        tokens += static_cast<long>(t.size()) + 1;  // end token counts
    }
    return std::exp(-lp / tokens);
}

double unique_rate(const std::vector<std::string>& texts) {
    if (texts.empty()) throw InputError("unique_rate: empty text list");
    std::set<std::string> distinct;
    for (const auto& t : texts) {
        std::istringstream in(t);
        std::string tok, norm;
        while (in >> tok) {
            if (!norm.empty()) norm += ' ';
            norm += tok;
        }
        distinct.insert(norm);
    }
    return static_cast<double>(distinct.size()) / texts.size();
}

double unique_rate_tokens(const std::vector<TokenSeq>& texts) {
    if (texts.empty()) throw InputError("unique_rate: empty text list");
    std::set<std::string> distinct;
    for (const auto& t : texts) {
        std::string joined;
        for (const auto& tok : t) {
            if (!joined.empty()) joined += ' ';
            joined += tok;
        }
        distinct.insert(joined);
    }
    return static_cast<double>(distinct.size()) / texts.size();
}

namespace {

std::map<std::string, long> ngram_counts(const std::vector<TokenSeq>& texts, int n, long* total_out) {
    std::map<std::string, long> counts;
    long total = 0;
    for (const auto& t : texts) {
        if (static_cast<int>(t.size()) < n) continue;
        for (size_t i = 0; i + n <= t.size(); ++i) {
            std::string key;
            for (int j = 0; j < n; ++j) {
                key += t[i + j];
                key += '\x1f';
            }
            ++counts[key];
            ++total;
        }
    }
    if (total_out) *total_out = total;
    return counts;
}

}  // namespace

double dist_n(const std::vector<TokenSeq>& texts, int n) {
    if (n < 1) throw InputError("dist_n: n must be >= 1");
    long total = 0;
    auto counts = ngram_counts(texts, n, &total);
    if (total == 0) throw InputError("dist_n: no n-grams present");
    return static_cast<double>(counts.size()) / total;
}

double ent_n(const std::vector<TokenSeq>& texts, int n) {
    if (n < 1) throw InputError("ent_n: n must be >= 1");
    long total = 0;
    auto counts = ngram_counts(texts, n, &total);
    if (total == 0) throw InputError("ent_n: no n-grams present");
    double ent = 0.0;
    for (const auto& [w, f] : counts) {
        double p = static_cast<double>(f) / total;
        ent -= p * std::log(p);
    }
    return ent;
}

double field_kl(const std::vector<int>& true_samples, const std::vector<int>& generated_samples, int num_labels,
                double eps) {
    if (true_samples.empty() || generated_samples.empty())
        throw InputError("field_kl: sample sets must be non-empty");
    if (num_labels < 1) throw SchemaError("field_kl: label space must be non-empty");
    auto tally = [&](const std::vector<int>& xs) {
        std::vector<double> c(num_labels, 0.0);
        for (int x : xs) {
            if (x < 0 || x >= num_labels) throw SchemaError("field_kl: sample outside the shared label space");
            c[x] += 1.0;
        }
        return c;
    };
    auto p = tally(true_samples);
    auto q = tally(generated_samples);
    double pz = 0.0, qz = 0.0;
    for (int i = 0; i < num_labels; ++i) {
        p[i] += eps;
        q[i] += eps;
        pz += p[i];
        qz += q[i];
    }
    double kl = 0.0;
    for (int i = 0; i < num_labels; ++i) {
        double pi = p[i] / pz, qi = q[i] / qz;
        kl += pi * std::log(pi / qi);
    }
    return kl;
}

double bleu(const std::vector<TokenSeq>& references, const std::vector<TokenSeq>& hypotheses, int max_n) {
    if (references.size() != hypotheses.size())
        throw InputError("bleu: reference/hypothesis list length mismatch");
    if (references.empty()) throw InputError("bleu: empty input");
    if (max_n < 1) throw InputError("bleu: max_n must be >= 1");

    long ref_len = 0, hyp_len = 0;
    std::vector<long> matched(max_n, 0), total(max_n, 0);
    for (size_t i = 0; i < references.size(); ++i) {
        ref_len += static_cast<long>(references[i].size());
        hyp_len += static_cast<long>(hypotheses[i].size());
        for (int n = 1; n <= max_n; ++n) {
            long t = 0;
            auto ref_counts = ngram_counts({references[i]}, n, nullptr);
            auto hyp_counts = ngram_counts({hypotheses[i]}, n, &t);
            total[n - 1] += t;
            for (const auto& [gram, count] : hyp_counts) {
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) matched[n - 1] += std::min(count, it->second);
            }
        }
    }
    double log_precision = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        if (total[n - 1] == 0 || matched[n - 1] == 0) return 0.0;
        log_precision += std::log(static_cast<double>(matched[n - 1]) / total[n - 1]) / max_n;
    }
    double bp = hyp_len >= ref_len || hyp_len == 0
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
    if (hyp_len == 0) return 0.0;
    return bp * std::exp(log_precision);
}

}  // namespace tailaug::metrics
