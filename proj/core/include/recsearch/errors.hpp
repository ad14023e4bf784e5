#pragma once

#include <stdexcept>
#include <string>

namespace recsearch {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data (bad JSON, missing fields, inconsistent ids).
struct ParseError : Error {
    using Error::Error;
};

// Missing or invalid configuration. CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// A domain invariant was violated (duplicate items, reward/score mismatch, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Model gateway failures.
struct GatewayError : Error {
    using Error::Error;
};

// Transient transport failure (connection refused, 5xx, timeout). Retryable.
struct TransportError : GatewayError {
    using GatewayError::GatewayError;
};

// The backend answered but cannot satisfy the request (e.g. token
// alternatives requested but not supported). Not retryable.
struct ProtocolError : GatewayError {
    using GatewayError::GatewayError;
};

// Search level failures (unscored state queried, empty frontier, ...).
struct SearchError : Error {
    using Error::Error;
};

}  // namespace recsearch
