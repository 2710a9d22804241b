#pragma once

#include "tailaug/corpus/types.hpp"
#include "tailaug/text/vocab.hpp"

namespace tailaug::text {

// Adds every utterance word of the dataset (shared text lives on hypothesis 0).
inline void add_corpus_words(Vocab& v, const corpus::Dataset& ds) {
    for (const auto& inst : ds.instances)
        for (const auto& tok : inst.hypotheses[0].tokens) v.add(tok);
}

}  // namespace tailaug::text
