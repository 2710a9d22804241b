#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <utility>

#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"

namespace tailaug::corpus {

// Synthesizes `size` routing instances whose logged-action intents follow
// the schema's Zipf law. Deterministic for a fixed (schema, size, seed).
Dataset generate_corpus(std::shared_ptr<const CorpusSchema> schema, size_t size, uint64_t seed,
                        SplitTag tag = SplitTag::train);

// Same generator restricted to a subset of intents (Zipf weights
// renormalized over the subset); used to build the low-count-intent test set.
Dataset generate_corpus_for_intents(std::shared_ptr<const CorpusSchema> schema, const std::vector<int>& intents,
                                    size_t size, uint64_t seed, SplitTag tag = SplitTag::test_tail);

// Logged-action intent id -> number of instances.
std::map<int, int> intent_counts(const Dataset& ds);

// Tail = instances whose logged-action intent count in `ds` is < threshold.
std::pair<Dataset, Dataset> split_head_tail(const Dataset& ds, int intent_count_threshold);

}  // namespace tailaug::corpus
