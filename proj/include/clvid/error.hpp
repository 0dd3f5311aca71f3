#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clvid {

// Root of every error raised by the library. Each subclass names a failure
// category so callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class GraphError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class ProtocolError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class BudgetError : public Error { public: using Error::Error; };
class EmptyBufferError : public Error { public: using Error::Error; };
class EstimationError : public Error { public: using Error::Error; };
class AggregationError : public Error { public: using Error::Error; };

// Malformed binary file; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Non-finite loss during training.
class DivergenceError : public Error { public: using Error::Error; };

} // namespace clvid
