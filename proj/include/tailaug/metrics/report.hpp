#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailaug/corpus/types.hpp"
#include "tailaug/metrics/metrics.hpp"

namespace tailaug::metrics {

// One generated sample paired with the instance that conditioned it.
struct GeneratedSample {
    TokenSeq tokens;
    std::optional<int> device_type;
    std::optional<int> device_status;
    int condition_intent = -1;
    TokenSeq reference_tokens;  // source utterance (for BLEU / reconstruction rows)
};

struct GeneratorOutput {
    std::string name;
    std::vector<GeneratedSample> samples;
    bool generates_fields = false;             // false -> Field-KL cells stay empty
    bool reconstruction_metrics = false;       // BLEU/recon columns (VAE rows)
    std::optional<double> reconstruction_loss; // mean per-token NLL on held-out text
};

struct MetricCell {
    bool present = false;
    double value = 0.0;

    static MetricCell of(double v) { return {true, v}; }
};

struct MetricRow {
    std::string model;
    MetricCell perplexity, uniq, dist1, dist2, ent4;
    MetricCell kl_device_type, kl_device_status;
    MetricCell bleu1, bleu2, reconstruction_loss;
};

struct MetricReport {
    std::vector<MetricRow> full;
    std::vector<MetricRow> tail_only;

    std::string render_text() const;
    nlohmann::json to_json() const;
};

// Assembles the intrinsic table plus the low-count-intent sub-table. The
// reference corpus provides the fluency-LM training text and the true field
// distributions; metrics with missing inputs leave their cells empty.
MetricReport intrinsic_report(const std::vector<GeneratorOutput>& generators, const corpus::Dataset& reference,
                              const std::set<int>& low_count_intents, int lm_order = 3, double lm_alpha = 0.01);

}  // namespace tailaug::metrics
