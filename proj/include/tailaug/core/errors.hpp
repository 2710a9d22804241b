#pragma once

#include <stdexcept>
#include <string>

namespace tailaug {

// Error taxonomy shared across modules. Every throw site states which
// contract was violated in the message.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InputError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

// Raised by dataset/config readers; carries the offending line when known.
struct ParseError : Error {
    explicit ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_number(line) {}
    long line_number;
};

struct VocabError : Error {
    using Error::Error;
};

struct StateError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& msg, int epoch = -1)
        : Error(epoch >= 0 ? msg + " (epoch " + std::to_string(epoch) + ")" : msg),
          epoch_index(epoch) {}
    int epoch_index;
};

struct GenerationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace tailaug
