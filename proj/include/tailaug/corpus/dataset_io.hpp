#pragma once

#include <memory>
#include <string>

#include "tailaug/corpus/schema.hpp"
#include "tailaug/corpus/types.hpp"

namespace tailaug::corpus {

// Line-delimited UTF-8 records; one flat JSON map per instance with keys
// `instance_id`, `hypotheses` and `logged_action`. Categorical fields are
// written as schema labels, so files are portable across processes that
// share the schema file.
void save_dataset(const Dataset& ds, const std::string& path);

Dataset load_dataset(const std::string& path, std::shared_ptr<const CorpusSchema> schema,
                     SplitTag tag = SplitTag::train);

}  // namespace tailaug::corpus
