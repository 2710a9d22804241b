#include "tailaug/metrics/report.hpp"

#include <cstdio>
#include <sstream>

#include "tailaug/core/errors.hpp"
#include "tailaug/corpus/schema.hpp"

namespace tailaug::metrics {

namespace {

std::string fmt_cell(const MetricCell& c) {
    if (!c.present) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", c.value);
    return buf;
}

MetricRow build_row(const GeneratorOutput& gen, const std::vector<const GeneratedSample*>& samples,
                    const NgramLanguageModel* lm, const std::vector<int>& true_device_types,
                    const std::vector<int>& true_device_statuses, int n_device_types, int n_device_statuses) {
    MetricRow row;
    row.model = gen.name;
    if (samples.empty()) return row;

    std::vector<TokenSeq> texts;
    texts.reserve(samples.size());
    for (const auto* s : samples) texts.push_back(s->tokens);

    if (lm) row.perplexity = MetricCell::of(perplexity(*lm, texts));
    row.uniq = MetricCell::of(unique_rate_tokens(texts));
    auto guarded = [&](int n) -> MetricCell {
        try {
            return MetricCell::of(dist_n(texts, n));
        } catch (const InputError&) {
            return {};
        }
    };
    row.dist1 = guarded(1);
    row.dist2 = guarded(2);
    try {
        row.ent4 = MetricCell::of(ent_n(texts, 4));
    } catch (const InputError&) {
    }

    if (gen.generates_fields) {
        std::vector<int> gen_dt, gen_ds;
        for (const auto* s : samples) {
            if (s->device_type) gen_dt.push_back(*s->device_type);
            if (s->device_status) gen_ds.push_back(*s->device_status);
        }
        if (!gen_dt.empty() && !true_device_types.empty())
            row.kl_device_type = MetricCell::of(field_kl(true_device_types, gen_dt, n_device_types));
        if (!gen_ds.empty() && !true_device_statuses.empty())
            row.kl_device_status = MetricCell::of(field_kl(true_device_statuses, gen_ds, n_device_statuses));
    }

    if (gen.reconstruction_metrics) {
        std::vector<TokenSeq> refs;
        std::vector<TokenSeq> hyps;
        for (const auto* s : samples) {
            if (s->reference_tokens.empty()) continue;
            refs.push_back(s->reference_tokens);
            hyps.push_back(s->tokens);
        }
        if (!refs.empty()) {
            row.bleu1 = MetricCell::of(bleu(refs, hyps, 1));
            row.bleu2 = MetricCell::of(bleu(refs, hyps, 2));
        }
        if (gen.reconstruction_loss) row.reconstruction_loss = MetricCell::of(*gen.reconstruction_loss);
    }
    return row;
}

}  // namespace

MetricReport intrinsic_report(const std::vector<GeneratorOutput>& generators, const corpus::Dataset& reference,
                              const std::set<int>& low_count_intents, int lm_order, double lm_alpha) {
    MetricReport report;

    std::vector<TokenSeq> lm_corpus;
    std::vector<int> true_dt_full, true_ds_full, true_dt_tail, true_ds_tail;
    for (const auto& inst : reference.instances) {
        const auto& h = inst.hypotheses[0];
        lm_corpus.push_back(h.tokens);
        true_dt_full.push_back(h.device_type);
        true_ds_full.push_back(h.device_status);
        int intent = inst.hypotheses[inst.logged_action].nlu.intent;
        if (low_count_intents.count(intent)) {
            true_dt_tail.push_back(h.device_type);
            true_ds_tail.push_back(h.device_status);
        }
    }
    std::optional<NgramLanguageModel> lm;
    if (!lm_corpus.empty()) lm = train_ngram_lm(lm_corpus, lm_order, lm_alpha);

    int n_dt = reference.schema ? static_cast<int>(reference.schema->device_types.size()) : 0;
    int n_ds = reference.schema ? static_cast<int>(reference.schema->device_statuses.size()) : 0;

    for (const auto& gen : generators) {
        std::vector<const GeneratedSample*> all, tail;
        for (const auto& s : gen.samples) {
            all.push_back(&s);
            if (low_count_intents.count(s.condition_intent)) tail.push_back(&s);
        }
        report.full.push_back(
            build_row(gen, all, lm ? &*lm : nullptr, true_dt_full, true_ds_full, n_dt, n_ds));
        report.tail_only.push_back(
            build_row(gen, tail, lm ? &*lm : nullptr, true_dt_tail, true_ds_tail, n_dt, n_ds));
    }
    return report;
}

std::string MetricReport::render_text() const {
    std::ostringstream out;
    auto emit = [&out](const std::vector<MetricRow>& rows, const char* title) {
        out << title << "\n";
        out << "model | perplexity | unique_rate | dist1 | dist2 | ent4 | kl_device_type | kl_device_status"
               " | bleu1 | bleu2 | recon_loss\n";
        for (const auto& r : rows) {
            out << r.model << " | " << fmt_cell(r.perplexity) << " | " << fmt_cell(r.uniq) << " | "
                << fmt_cell(r.dist1) << " | " << fmt_cell(r.dist2) << " | " << fmt_cell(r.ent4) << " | "
                << fmt_cell(r.kl_device_type) << " | " << fmt_cell(r.kl_device_status) << " | "
                << fmt_cell(r.bleu1) << " | " << fmt_cell(r.bleu2) << " | " << fmt_cell(r.reconstruction_loss)
                << "\n";
        }
    };
    emit(full, "== intrinsic metrics ==");
    out << "\n";
    emit(tail_only, "== low-count intents only ==");
    return out.str();
}

nlohmann::json MetricReport::to_json() const {
    auto cell = [](const MetricCell& c) {
        return c.present ? nlohmann::json(c.value) : nlohmann::json(nullptr);
    };
    auto rows_json = [&](const std::vector<MetricRow>& rows) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) {
            arr.push_back({{"model", r.model},
                           {"perplexity", cell(r.perplexity)},
                           {"unique_rate", cell(r.uniq)},
                           {"dist1", cell(r.dist1)},
                           {"dist2", cell(r.dist2)},
                           {"ent4", cell(r.ent4)},
                           {"kl_device_type", cell(r.kl_device_type)},
                           {"kl_device_status", cell(r.kl_device_status)},
                           {"bleu1", cell(r.bleu1)},
                           {"bleu2", cell(r.bleu2)},
                           {"reconstruction_loss", cell(r.reconstruction_loss)}});
        }
        return arr;
    };
    return {{"full", rows_json(full)}, {"low_count_only", rows_json(tail_only)}};
}

}  // namespace tailaug::metrics
